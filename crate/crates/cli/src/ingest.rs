//! Per-task latency traces recorded at the coordinator.
//!
//! A trace is a CSV with one row per completed task. Columns are matched by
//! name; [`ColumnMap`] renames foreign columns onto the canonical ones.

use std::collections::BTreeMap;
use std::io::Read;

use crate::error::{CliError, CliResult};

/// One completed task.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub worker_id: usize,
    pub iteration: u64,
    /// Time from sending the iterate until the response arrived.
    pub total_latency_s: f64,
    /// Time spent computing, as reported by the worker.
    pub compute_latency_s: f64,
    pub bytes_b: u64,
    pub comp_load_c: f64,
    pub timestamp_s: Option<f64>,
}

impl TraceRecord {
    pub fn comm_latency_s(&self) -> f64 {
        self.total_latency_s - self.compute_latency_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Field {
    WorkerId,
    Iteration,
    Total,
    Compute,
    Bytes,
    Load,
    Timestamp,
}

impl Field {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "worker_id" => Self::WorkerId,
            "iteration" => Self::Iteration,
            "total_latency_s" => Self::Total,
            "compute_latency_s" => Self::Compute,
            "bytes_b" => Self::Bytes,
            "comp_load_c" => Self::Load,
            "timestamp_s" => Self::Timestamp,
            _ => return None,
        })
    }
}

/// Column names accepted in place of the canonical ones without an explicit
/// mapping. They follow the naming of publicly released latency traces.
const ALIASES: &[(&str, &str)] = &[
    ("worker_index", "worker_id"),
    ("worker", "worker_id"),
    ("latency", "total_latency_s"),
    ("compute_latency", "compute_latency_s"),
    ("nbytes", "bytes_b"),
    ("comp_mc", "comp_load_c"),
    ("timestamp", "timestamp_s"),
    ("time", "timestamp_s"),
];

/// Renames CSV columns onto trace fields.
#[derive(Debug, Clone, Default)]
pub struct ColumnMap {
    renames: BTreeMap<String, String>,
}

impl ColumnMap {
    /// Parses `column=field` pairs.
    pub fn parse(pairs: &[String]) -> CliResult<Self> {
        let mut renames = BTreeMap::new();
        for pair in pairs {
            let Some((col, field)) = pair.split_once('=') else {
                return Err(CliError::usage(format!("column mapping `{pair}` is not of the form column=field")));
            };
            if Field::parse(field.trim()).is_none() {
                return Err(CliError::usage(format!("column mapping `{pair}`: unknown field `{field}`")));
            }
            renames.insert(col.trim().to_owned(), field.trim().to_owned());
        }
        Ok(Self { renames })
    }

    fn resolve(&self, column: &str) -> Option<Field> {
        let column = column.trim();
        if let Some(field) = self.renames.get(column) {
            return Field::parse(field);
        }
        Field::parse(column).or_else(|| {
            ALIASES
                .iter()
                .find(|(alias, _)| *alias == column)
                .and_then(|(_, field)| Field::parse(field))
        })
    }
}

/// Lines reported per malformed-trace error before truncating.
const MAX_REPORTED: usize = 20;

/// Reads a trace. Every malformed row is reported by line number.
pub fn read_trace<R: Read>(input: R, map: &ColumnMap) -> CliResult<Vec<TraceRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr
        .headers()
        .map_err(|e| CliError::usage(format!("cannot read trace header: {e}")))?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(CliError::usage("trace is empty"));
    }
    let mut columns: BTreeMap<Field, usize> = BTreeMap::new();
    for (idx, name) in headers.iter().enumerate() {
        if let Some(field) = map.resolve(name) {
            if columns.insert(field, idx).is_some() {
                return Err(CliError::usage(format!("trace header maps two columns onto `{name}`")));
            }
        }
    }
    let required = [
        (Field::WorkerId, "worker_id"),
        (Field::Iteration, "iteration"),
        (Field::Total, "total_latency_s"),
        (Field::Compute, "compute_latency_s"),
    ];
    let missing: Vec<&str> = required
        .iter()
        .filter(|(f, _)| !columns.contains_key(f))
        .map(|(_, name)| *name)
        .collect();
    if !missing.is_empty() {
        return Err(CliError::usage(format!("trace header lacks column(s) {}", missing.join(", "))));
    }

    let mut records = Vec::new();
    let mut bad: Vec<String> = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                bad.push(format!("line {line}: {e}"));
                continue;
            }
        };
        match parse_row(&row, &columns) {
            Ok(rec) => records.push(rec),
            Err(msg) => bad.push(format!("line {line}: {msg}")),
        }
    }
    if !bad.is_empty() {
        let shown = bad.len().min(MAX_REPORTED);
        let mut msg = format!("{} malformed trace row(s):\n  {}", bad.len(), bad[..shown].join("\n  "));
        if bad.len() > shown {
            msg.push_str(&format!("\n  ... and {} more", bad.len() - shown));
        }
        return Err(CliError::Usage(msg));
    }
    if records.is_empty() {
        return Err(CliError::usage("trace has no rows"));
    }
    Ok(records)
}

fn parse_row(row: &csv::StringRecord, columns: &BTreeMap<Field, usize>) -> Result<TraceRecord, String> {
    let get = |f: Field| columns.get(&f).map(|&i| row.get(i).unwrap_or(""));
    fn num<T: std::str::FromStr>(value: Option<&str>, name: &str) -> Result<T, String> {
        let v = value.unwrap_or("");
        v.parse().map_err(|_| format!("{name} `{v}` is not a valid number"))
    }
    let rec = TraceRecord {
        worker_id: num(get(Field::WorkerId), "worker_id")?,
        iteration: num(get(Field::Iteration), "iteration")?,
        total_latency_s: num(get(Field::Total), "total_latency_s")?,
        compute_latency_s: num(get(Field::Compute), "compute_latency_s")?,
        bytes_b: match get(Field::Bytes) {
            Some(v) if !v.is_empty() => num(Some(v), "bytes_b")?,
            _ => 0,
        },
        comp_load_c: match get(Field::Load) {
            Some(v) if !v.is_empty() => num(Some(v), "comp_load_c")?,
            _ => 1.0,
        },
        timestamp_s: match get(Field::Timestamp) {
            Some(v) if !v.is_empty() => Some(num(Some(v), "timestamp_s")?),
            _ => None,
        },
    };
    if !(rec.compute_latency_s >= 0.0 && rec.compute_latency_s.is_finite()) {
        return Err(format!("compute latency {} is negative or not finite", rec.compute_latency_s));
    }
    if !(rec.total_latency_s >= rec.compute_latency_s && rec.total_latency_s.is_finite()) {
        return Err(format!(
            "total latency {} is below the compute latency {}",
            rec.total_latency_s, rec.compute_latency_s
        ));
    }
    if !(rec.comp_load_c > 0.0 && rec.comp_load_c.is_finite()) {
        return Err(format!("comp_load_c {} is not positive", rec.comp_load_c));
    }
    if rec.timestamp_s.is_some_and(|t| !t.is_finite()) {
        return Err("timestamp_s is not finite".into());
    }
    Ok(rec)
}
