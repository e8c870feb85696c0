use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// State after one iteration. Row 0 describes the initial iterate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: u64,
    /// Close of the iteration on the virtual clock.
    pub time_s: f64,
    pub suboptimality: f64,
    pub xi: f64,
    pub fresh_count: usize,
    pub fresh: Vec<bool>,
    /// Subpartition count of each worker at the close of the iteration.
    pub p: Vec<usize>,
    /// `(communication, computation)` latency of each worker's fresh result.
    pub latency: Vec<Option<(f64, f64)>>,
}

impl TraceRow {
    /// Ratio of the slowest to the fastest fresh total latency.
    pub fn latency_ratio(&self) -> Option<f64> {
        let totals: Vec<f64> = self.latency.iter().flatten().map(|(a, b)| a + b).collect();
        if totals.len() < 2 {
            return None;
        }
        let max = totals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = totals.iter().copied().fold(f64::INFINITY, f64::min);
        Some(max / min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub num_workers: usize,
    pub rows: Vec<TraceRow>,
    /// Iterations after which a new partitioning was distributed.
    pub rebalances: Vec<u64>,
}

impl RunTrace {
    /// First simulated time at which the suboptimality is at most `gap`.
    pub fn time_to_gap(&self, gap: f64) -> Option<f64> {
        self.rows.iter().find(|r| r.suboptimality <= gap).map(|r| r.time_s)
    }

    pub fn final_suboptimality(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.suboptimality)
    }

    /// Smallest suboptimality over the rows with `time_s ≥ from`.
    pub fn min_suboptimality_after(&self, from: f64) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.time_s >= from)
            .map(|r| r.suboptimality)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn total_time(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.time_s)
    }
}

/// `⌈r·N⌉`, ignoring rounding noise in the product.
pub fn coded_wait_count(rate: f64, n: usize) -> usize {
    let x = rate * n as f64;
    let nearest = x.round();
    let k = if (x - nearest).abs() <= 1e-9 * x.max(1.0) { nearest } else { x.ceil() };
    (k as usize).clamp(1, n)
}

/// Iteration times of an idealized MDS-coded scheme with rate `rate`, derived
/// from a gradient-descent trace: each worker's computation latency is scaled
/// by `1/rate` and each iteration lasts until the `⌈rate·N⌉`-th fastest worker
/// finishes. Decoding is free, so the convergence per iteration is GD's.
pub fn coded_bound_trace(gd: &RunTrace, rate: f64) -> Result<RunTrace> {
    if !(rate > 0.0 && rate <= 1.0) {
        return domain(format!("code rate must lie in (0, 1], got {rate}"));
    }
    let n = gd.num_workers;
    let k = coded_wait_count(rate, n);
    let mut rows = Vec::with_capacity(gd.rows.len());
    let mut time = 0.0;
    let mut lat = vec![0.0; n];
    for row in &gd.rows {
        if row.iteration > 0 {
            for (x, l) in lat.iter_mut().zip(&row.latency) {
                let Some((comm, comp)) = l else {
                    return domain(format!(
                        "iteration {} lacks a latency for every worker",
                        row.iteration
                    ));
                };
                *x = comm + comp / rate;
            }
            let (_, kth, _) = lat.select_nth_unstable_by(k - 1, f64::total_cmp);
            time += *kth;
        }
        let mut out = row.clone();
        out.time_s = time;
        rows.push(out);
    }
    Ok(RunTrace {
        num_workers: n,
        rows,
        rebalances: gd.rebalances.clone(),
    })
}
