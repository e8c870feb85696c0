//! Library side of the `dsag` command-line tool.

pub mod config;
pub mod error;
pub mod ingest;
pub mod predict;
pub mod profiles;
pub mod runtrace;

pub use error::{CliError, CliResult};

/// Scientific notation with 17 significant digits, enough to round-trip any
/// `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Parses a code rate given as a decimal (`0.5`) or a fraction (`45/49`).
pub fn parse_rate(s: &str) -> CliResult<f64> {
    let bad = || CliError::usage(format!("code rate `{s}` is not a number or fraction"));
    let rate = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            a / b
        }
        None => s.trim().parse().map_err(|_| bad())?,
    };
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(CliError::usage(format!("code rate must lie in (0, 1], got {s}")));
    }
    Ok(rate)
}
