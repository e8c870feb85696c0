//! Latency predictions from fitted profiles.

use std::io::Write;

use dsag_core::order_stats::{pooled_iid_profiles, sample_order_stat, simulate_iterations};
use dsag_core::WorkerProfile;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CliError, CliResult};
use crate::fmt_f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// The `w`-th order statistic of one round.
    OrderStat,
    /// Iteration completion times of the iterative process.
    Iterative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictOptions {
    pub w: usize,
    pub mode: Mode,
    pub iterations: usize,
    pub samples: usize,
    pub margin: f64,
    pub seed: u64,
    /// Pool all profiles into one shared distribution.
    pub iid: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderStatReport {
    pub mean: f64,
    pub std_err: f64,
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    OrderStat(OrderStatReport),
    /// `(completion time, fresh count)` per iteration.
    Iterative(Vec<(f64, usize)>),
}

impl Prediction {
    /// Mean latency per iteration.
    pub fn mean_latency(&self) -> f64 {
        match self {
            Self::OrderStat(r) => r.mean,
            Self::Iterative(rows) => rows.last().map_or(0.0, |r| r.0) / rows.len().max(1) as f64,
        }
    }
}

/// Nearest-rank quantile of sorted values.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn check(profiles: &[WorkerProfile], opts: &PredictOptions) -> CliResult<()> {
    let n = profiles.len();
    if opts.w == 0 || opts.w > n {
        return Err(CliError::usage(format!("--w must lie in [1, {n}] for {n} profiles, got {}", opts.w)));
    }
    if opts.samples == 0 || opts.iterations == 0 {
        return Err(CliError::usage("--samples and --iterations must be positive"));
    }
    if !(opts.margin >= 0.0 && opts.margin.is_finite()) {
        return Err(CliError::usage(format!("--margin must be nonnegative, got {}", opts.margin)));
    }
    Ok(())
}

/// Runs the prediction on `profiles` as given, ignoring `opts.iid`.
pub fn predict_with(profiles: &[WorkerProfile], opts: &PredictOptions) -> CliResult<Prediction> {
    check(profiles, opts)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    match opts.mode {
        Mode::OrderStat => {
            let mut xs = sample_order_stat(profiles, opts.w, opts.samples, &mut rng)?;
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let std_err = if xs.len() > 1 {
                (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0) / n).sqrt()
            } else {
                0.0
            };
            xs.sort_by(f64::total_cmp);
            Ok(Prediction::OrderStat(OrderStatReport {
                mean,
                std_err,
                q05: quantile(&xs, 0.05),
                q50: quantile(&xs, 0.5),
                q95: quantile(&xs, 0.95),
                samples: xs.len(),
            }))
        }
        Mode::Iterative => {
            let tl = simulate_iterations(profiles, opts.w, opts.iterations, &mut rng, opts.margin)?;
            Ok(Prediction::Iterative(
                tl.completion_times.into_iter().zip(tl.fresh_counts).collect(),
            ))
        }
    }
}

/// Runs the prediction, pooling the profiles first when `opts.iid` is set.
pub fn predict(profiles: &[WorkerProfile], opts: &PredictOptions) -> CliResult<Prediction> {
    if opts.iid {
        predict_with(&pooled_iid_profiles(profiles)?, opts)
    } else {
        predict_with(profiles, opts)
    }
}

pub fn write_prediction<W: Write>(pred: &Prediction, opts: &PredictOptions, out: W) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    let internal = |e: csv::Error| CliError::Internal(format!("writing prediction: {e}"));
    let model = if opts.iid { "iid" } else { "heterogeneous" };
    match pred {
        Prediction::OrderStat(r) => {
            w.write_record(["model", "w", "samples", "mean_s", "std_err_s", "q05_s", "q50_s", "q95_s"])
                .map_err(internal)?;
            w.write_record([
                model.to_owned(),
                opts.w.to_string(),
                r.samples.to_string(),
                fmt_f64(r.mean),
                fmt_f64(r.std_err),
                fmt_f64(r.q05),
                fmt_f64(r.q50),
                fmt_f64(r.q95),
            ])
            .map_err(internal)?;
        }
        Prediction::Iterative(rows) => {
            w.write_record(["model", "iteration", "time_s", "latency_s", "fresh_count"])
                .map_err(internal)?;
            let mut prev = 0.0;
            for (t, &(time, fresh)) in rows.iter().enumerate() {
                w.write_record([
                    model.to_owned(),
                    (t + 1).to_string(),
                    fmt_f64(time),
                    fmt_f64(time - prev),
                    fresh.to_string(),
                ])
                .map_err(internal)?;
                prev = time;
            }
        }
    }
    w.flush().map_err(|e| CliError::Internal(format!("writing prediction: {e}")))
}
