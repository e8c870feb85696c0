//! Run-trace CSV: one row per iteration, optionally with per-worker columns
//! `fresh_i,p_i,comm_i,comp_i`.

use std::io::{Read, Write};

use dsag_core::{RunTrace, TraceRow};

use crate::error::{CliError, CliResult};
use crate::fmt_f64;

const BASE_HEADER: [&str; 5] = ["iteration", "time_s", "suboptimality", "xi", "fresh_count"];

/// Gaps reported by `run`.
pub const MILESTONES: [f64; 3] = [1e-2, 1e-4, 1e-8];

pub fn write_run_trace<W: Write>(trace: &RunTrace, per_worker: bool, out: W) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    let internal = |e: csv::Error| CliError::Internal(format!("writing trace: {e}"));
    let mut header: Vec<String> = BASE_HEADER.iter().map(|s| s.to_string()).collect();
    if per_worker {
        for i in 0..trace.num_workers {
            header.extend([format!("fresh_{i}"), format!("p_{i}"), format!("comm_{i}"), format!("comp_{i}")]);
        }
    }
    w.write_record(&header).map_err(internal)?;
    for row in &trace.rows {
        let mut rec = vec![
            row.iteration.to_string(),
            fmt_f64(row.time_s),
            fmt_f64(row.suboptimality),
            fmt_f64(row.xi),
            row.fresh_count.to_string(),
        ];
        if per_worker {
            for i in 0..trace.num_workers {
                rec.push(u8::from(row.fresh.get(i).copied().unwrap_or(false)).to_string());
                rec.push(row.p.get(i).map_or(String::new(), |p| p.to_string()));
                match row.latency.get(i).copied().flatten() {
                    Some((comm, comp)) => rec.extend([fmt_f64(comm), fmt_f64(comp)]),
                    None => rec.extend([String::new(), String::new()]),
                }
            }
        }
        w.write_record(&rec).map_err(internal)?;
    }
    w.flush().map_err(|e| CliError::Internal(format!("writing trace: {e}")))
}

/// Reads a run trace. Without per-worker columns the trace has zero workers.
pub fn read_run_trace<R: Read>(input: R) -> CliResult<RunTrace> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr
        .headers()
        .map_err(|e| CliError::usage(format!("cannot read trace header: {e}")))?
        .clone();
    let names: Vec<&str> = headers.iter().collect();
    if names.len() < BASE_HEADER.len() || names[..BASE_HEADER.len()] != BASE_HEADER {
        return Err(CliError::usage(format!(
            "run trace must start with columns {}",
            BASE_HEADER.join(",")
        )));
    }
    let extra = &names[BASE_HEADER.len()..];
    if extra.len() % 4 != 0 {
        return Err(CliError::usage("per-worker columns must come in groups fresh_i,p_i,comm_i,comp_i"));
    }
    let num_workers = extra.len() / 4;
    for i in 0..num_workers {
        let expect = [format!("fresh_{i}"), format!("p_{i}"), format!("comm_{i}"), format!("comp_{i}")];
        if extra[4 * i..4 * i + 4] != expect {
            return Err(CliError::usage(format!("unexpected per-worker columns for worker {i}")));
        }
    }

    let mut rows = Vec::new();
    let mut bad = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let line = idx + 2;
        match rec.map_err(|e| e.to_string()).and_then(|r| parse_row(&r, num_workers)) {
            Ok(row) => rows.push(row),
            Err(msg) => bad.push(format!("line {line}: {msg}")),
        }
    }
    if !bad.is_empty() {
        return Err(CliError::Usage(format!("malformed run-trace row(s):\n  {}", bad.join("\n  "))));
    }
    if rows.is_empty() {
        return Err(CliError::usage("run trace has no rows"));
    }
    Ok(RunTrace {
        num_workers,
        rows,
        rebalances: Vec::new(),
    })
}

fn parse_row(rec: &csv::StringRecord, num_workers: usize) -> Result<TraceRow, String> {
    fn num<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize) -> Result<T, String> {
        let v = rec.get(i).unwrap_or("");
        v.parse().map_err(|_| format!("column {} `{v}` is not a valid number", i + 1))
    }
    let mut row = TraceRow {
        iteration: num(rec, 0)?,
        time_s: num(rec, 1)?,
        suboptimality: num(rec, 2)?,
        xi: num(rec, 3)?,
        fresh_count: num(rec, 4)?,
        fresh: Vec::with_capacity(num_workers),
        p: Vec::with_capacity(num_workers),
        latency: Vec::with_capacity(num_workers),
    };
    for i in 0..num_workers {
        let base = BASE_HEADER.len() + 4 * i;
        row.fresh.push(num::<u8>(rec, base)? != 0);
        row.p.push(num(rec, base + 1)?);
        let comm = rec.get(base + 2).unwrap_or("");
        let comp = rec.get(base + 3).unwrap_or("");
        row.latency.push(if comm.is_empty() && comp.is_empty() {
            None
        } else {
            Some((num(rec, base + 2)?, num(rec, base + 3)?))
        });
    }
    Ok(row)
}

/// Human-readable summary: time to each milestone gap, final gap.
pub fn summary(trace: &RunTrace) -> String {
    let mut s = String::new();
    for gap in MILESTONES {
        match trace.time_to_gap(gap) {
            Some(t) => s.push_str(&format!("time to gap {gap:e}: {t:.6} s\n")),
            None => s.push_str(&format!("time to gap {gap:e}: not reached\n")),
        }
    }
    s.push_str(&format!(
        "iterations: {}, simulated time: {:.6} s, final gap: {:e}\n",
        trace.rows.last().map_or(0, |r| r.iteration),
        trace.total_time(),
        trace.final_suboptimality()
    ));
    if !trace.rebalances.is_empty() {
        let its: Vec<String> = trace.rebalances.iter().map(|t| t.to_string()).collect();
        s.push_str(&format!("rebalanced after iterations: {}\n", its.join(", ")));
    }
    s
}
