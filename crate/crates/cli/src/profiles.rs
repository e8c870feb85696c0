//! Fitting per-worker latency profiles to a trace, and the profile CSV that
//! `fit` writes and `predict` reads.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use dsag_core::latency::fit_gamma_from_moments;
use dsag_core::{LatencyDist, WorkerProfile};
use serde::Deserialize;

use crate::error::{CliError, CliResult};
use crate::ingest::TraceRecord;
use crate::fmt_f64;

pub const PROFILE_HEADER: [&str; 13] = [
    "worker_id",
    "samples",
    "comm_mean",
    "comm_var",
    "comm_shape",
    "comm_scale",
    "comp_mean",
    "comp_var",
    "comp_shape",
    "comp_scale",
    "bytes_b",
    "comp_load_c",
    "degenerate",
];

/// Fitted latency moments of one worker. Computation moments refer to the
/// load `comp_load_c`.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedProfile {
    pub worker_id: usize,
    pub samples: usize,
    pub comm_mean: f64,
    pub comm_var: f64,
    pub comp_mean: f64,
    pub comp_var: f64,
    pub bytes_b: u64,
    pub comp_load_c: f64,
    /// Fewer than two samples, or a component without spread; such a
    /// component is treated as constant.
    pub degenerate: bool,
}

fn moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let constant = xs.iter().all(|&x| x == xs[0]);
    if xs.len() < 2 || constant {
        return (if constant { xs[0] } else { mean }, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Keeps the records with `timestamp_s ≥ latest − window_s`.
pub fn apply_window(records: Vec<TraceRecord>, window_s: f64) -> CliResult<Vec<TraceRecord>> {
    if !(window_s > 0.0 && window_s.is_finite()) {
        return Err(CliError::usage(format!("window must be positive, got {window_s}")));
    }
    if records.iter().any(|r| r.timestamp_s.is_none()) {
        return Err(CliError::usage("--window needs a timestamp_s column with a value in every row"));
    }
    let latest = records
        .iter()
        .filter_map(|r| r.timestamp_s)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(records
        .into_iter()
        .filter(|r| r.timestamp_s.is_some_and(|t| t >= latest - window_s))
        .collect())
}

/// Fits each worker's communication and computation moments. Computation
/// samples recorded at different loads are rescaled linearly to the load of
/// the worker's most recent record.
pub fn fit_profiles(records: &[TraceRecord]) -> CliResult<Vec<FittedProfile>> {
    if records.is_empty() {
        return Err(CliError::usage("no trace rows to fit"));
    }
    let mut by_worker: BTreeMap<usize, Vec<&TraceRecord>> = BTreeMap::new();
    for r in records {
        by_worker.entry(r.worker_id).or_default().push(r);
    }
    let mut out = Vec::with_capacity(by_worker.len());
    for (worker_id, recs) in by_worker {
        // Most recent by timestamp, then iteration, then file order.
        let latest = recs
            .iter()
            .enumerate()
            .max_by(|(ia, a), (ib, b)| {
                let ta = a.timestamp_s.unwrap_or(f64::NEG_INFINITY);
                let tb = b.timestamp_s.unwrap_or(f64::NEG_INFINITY);
                ta.total_cmp(&tb).then(a.iteration.cmp(&b.iteration)).then(ia.cmp(ib))
            })
            .map(|(_, r)| *r)
            .expect("nonempty group");
        let load = latest.comp_load_c;
        let comm: Vec<f64> = recs.iter().map(|r| r.comm_latency_s()).collect();
        let comp: Vec<f64> = recs
            .iter()
            .map(|r| r.compute_latency_s * (load / r.comp_load_c))
            .collect();
        let (comm_mean, comm_var) = moments(&comm);
        let (comp_mean, comp_var) = moments(&comp);
        out.push(FittedProfile {
            worker_id,
            samples: recs.len(),
            comm_mean,
            comm_var,
            comp_mean,
            comp_var,
            bytes_b: latest.bytes_b,
            comp_load_c: load,
            degenerate: recs.len() < 2 || comm_var == 0.0 || comp_var == 0.0,
        });
    }
    Ok(out)
}

fn gamma_cells(mean: f64, var: f64) -> (String, String) {
    match fit_gamma_from_moments(mean, var) {
        Ok(g) => (fmt_f64(g.shape()), fmt_f64(g.scale())),
        Err(_) => (String::new(), String::new()),
    }
}

pub fn write_profiles<W: Write>(profiles: &[FittedProfile], out: W) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    let internal = |e: csv::Error| CliError::Internal(format!("writing profiles: {e}"));
    w.write_record(PROFILE_HEADER).map_err(internal)?;
    for p in profiles {
        let (comm_shape, comm_scale) = gamma_cells(p.comm_mean, p.comm_var);
        let (comp_shape, comp_scale) = gamma_cells(p.comp_mean, p.comp_var);
        w.write_record([
            p.worker_id.to_string(),
            p.samples.to_string(),
            fmt_f64(p.comm_mean),
            fmt_f64(p.comm_var),
            comm_shape,
            comm_scale,
            fmt_f64(p.comp_mean),
            fmt_f64(p.comp_var),
            comp_shape,
            comp_scale,
            p.bytes_b.to_string(),
            fmt_f64(p.comp_load_c),
            u8::from(p.degenerate).to_string(),
        ])
        .map_err(internal)?;
    }
    w.flush().map_err(|e| CliError::Internal(format!("writing profiles: {e}")))
}

#[derive(Debug, Deserialize)]
struct ProfileRecord {
    worker_id: usize,
    comm_mean: f64,
    comm_var: f64,
    comp_mean: f64,
    comp_var: f64,
    #[serde(default)]
    bytes_b: Option<u64>,
    #[serde(default)]
    comp_load_c: Option<f64>,
}

/// Reads a profile CSV (the output of `fit`, or any CSV with at least the
/// `worker_id` and the four moment columns). Profiles are returned in worker
/// order.
pub fn read_profiles<R: Read>(input: R) -> CliResult<Vec<WorkerProfile>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut out: BTreeMap<usize, WorkerProfile> = BTreeMap::new();
    let mut bad = Vec::new();
    for (i, rec) in rdr.deserialize::<ProfileRecord>().enumerate() {
        let line = i + 2;
        let built = rec.map_err(|e| e.to_string()).and_then(|r| {
            let comm = LatencyDist::from_moments(r.comm_mean, r.comm_var).map_err(|e| e.to_string())?;
            let comp = LatencyDist::from_moments(r.comp_mean, r.comp_var).map_err(|e| e.to_string())?;
            WorkerProfile::new(
                r.worker_id,
                comm,
                comp,
                r.bytes_b.unwrap_or(0),
                r.comp_load_c.unwrap_or(1.0),
            )
            .map_err(|e| e.to_string())
        });
        match built {
            Ok(p) => {
                if out.insert(p.worker_id, p).is_some() {
                    bad.push(format!("line {line}: duplicate worker_id"));
                }
            }
            Err(msg) => bad.push(format!("line {line}: {msg}")),
        }
    }
    if !bad.is_empty() {
        return Err(CliError::Usage(format!("malformed profile row(s):\n  {}", bad.join("\n  "))));
    }
    if out.is_empty() {
        return Err(CliError::usage("profile file has no rows"));
    }
    Ok(out.into_values().collect())
}
