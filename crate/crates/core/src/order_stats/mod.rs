//! Latency of the `w`-th fastest of `N` heterogeneous workers.
//!
//! Two predictors: a single-round Monte Carlo estimate of the `w`-th order
//! statistic, and an event-driven simulation of the iterative process in
//! which workers that miss an iteration stay busy with stale tasks.

mod engine;

pub use engine::{Arrival, IterationOutcome, TaskQueueSim};

use rand::Rng;

use crate::error::{domain, Result};
use crate::latency::{LatencyDist, WorkerProfile};

/// Monte Carlo estimate of the expected `w`-th order statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderStatEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub samples: usize,
}

/// Per-iteration output of [`simulate_iterations`].
#[derive(Debug, Clone, PartialEq)]
pub struct IterationTimeline {
    /// Time at which iteration `t` closes, `t = 1..=ℓ`.
    pub completion_times: Vec<f64>,
    /// Number of workers whose iteration-`t` task arrived within iteration `t`.
    pub fresh_counts: Vec<usize>,
    /// Number of iterations in which each worker delivered a fresh result.
    pub per_worker_fresh: Vec<usize>,
}

impl IterationTimeline {
    pub fn num_iterations(&self) -> usize {
        self.completion_times.len()
    }

    /// Average iteration latency, `T_ℓ / ℓ`.
    pub fn mean_iteration_latency(&self) -> f64 {
        self.completion_times.last().copied().unwrap_or(0.0) / self.num_iterations().max(1) as f64
    }
}

fn check_w(n: usize, w: usize) -> Result<()> {
    if n == 0 {
        return domain("at least one worker profile is required");
    }
    if w == 0 || w > n {
        return domain(format!("w must lie in [1, {n}], got {w}"));
    }
    Ok(())
}

/// Draws `num_samples` realizations of the `w`-th smallest total latency,
/// each worker sampled at its reference load.
pub fn sample_order_stat<R: Rng + ?Sized>(
    profiles: &[WorkerProfile],
    w: usize,
    num_samples: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_w(profiles.len(), w)?;
    if num_samples == 0 {
        return domain("num_samples must be at least 1");
    }
    let mut draw = vec![0.0; profiles.len()];
    let out = (0..num_samples)
        .map(|_| {
            for (x, p) in draw.iter_mut().zip(profiles) {
                *x = p.sample_total(p.ref_load_c, rng);
            }
            let (_, wth, _) = draw.select_nth_unstable_by(w - 1, f64::total_cmp);
            *wth
        })
        .collect();
    Ok(out)
}

/// Monte Carlo estimate of `E[w-th smallest latency]`.
pub fn mc_order_stat<R: Rng + ?Sized>(
    profiles: &[WorkerProfile],
    w: usize,
    num_samples: usize,
    rng: &mut R,
) -> Result<OrderStatEstimate> {
    let xs = sample_order_stat(profiles, w, num_samples, rng)?;
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std_err = if xs.len() > 1 {
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        f64::NAN
    };
    Ok(OrderStatEstimate {
        mean,
        std_err,
        samples: xs.len(),
    })
}

/// Simulates `iterations` rounds of an iterative computation in which the
/// coordinator proceeds once `w` fresh results have arrived, extended by
/// `margin` times the elapsed iteration time.
pub fn simulate_iterations<R: Rng + ?Sized>(
    profiles: &[WorkerProfile],
    w: usize,
    iterations: usize,
    rng: &mut R,
    margin: f64,
) -> Result<IterationTimeline> {
    check_w(profiles.len(), w)?;
    if iterations == 0 {
        return domain("at least one iteration is required");
    }
    if !(margin >= 0.0) {
        return domain(format!("margin must be nonnegative, got {margin}"));
    }
    let mut sim = TaskQueueSim::<()>::new(profiles.len());
    let mut timeline = IterationTimeline {
        completion_times: Vec::with_capacity(iterations),
        fresh_counts: Vec::with_capacity(iterations),
        per_worker_fresh: vec![0; profiles.len()],
    };
    for t in 1..=iterations as u64 {
        let out = sim.run_iteration(t, w, margin, |i, _, _| {
            let p = &profiles[i];
            (p.sample_total(p.ref_load_c, rng), ())
        });
        for a in out.arrivals.iter().filter(|a| a.fresh) {
            timeline.per_worker_fresh[a.worker] += 1;
        }
        timeline.completion_times.push(out.end);
        timeline.fresh_counts.push(out.fresh_count);
    }
    Ok(timeline)
}

/// Fraction of iterations in which each worker delivers a fresh result.
pub fn estimate_fresh_fractions<R: Rng + ?Sized>(
    profiles: &[WorkerProfile],
    w: usize,
    iterations: usize,
    rng: &mut R,
    margin: f64,
) -> Result<Vec<f64>> {
    let timeline = simulate_iterations(profiles, w, iterations, rng, margin)?;
    Ok(timeline
        .per_worker_fresh
        .iter()
        .map(|&c| c as f64 / iterations as f64)
        .collect())
}

/// Replaces every profile by one shared profile whose communication and
/// computation components carry the pooled mean and variance across all
/// workers, i.e. the i.i.d. latency assumption.
pub fn pooled_iid_profiles(profiles: &[WorkerProfile]) -> Result<Vec<WorkerProfile>> {
    if profiles.is_empty() {
        return domain("at least one worker profile is required");
    }
    let pool = |component: fn(&WorkerProfile) -> LatencyDist| -> Result<LatencyDist> {
        let n = profiles.len() as f64;
        let mean = profiles.iter().map(|p| component(p).mean()).sum::<f64>() / n;
        let second = profiles
            .iter()
            .map(|p| {
                let d = component(p);
                d.variance() + d.mean() * d.mean()
            })
            .sum::<f64>()
            / n;
        let variance = (second - mean * mean).max(0.0);
        LatencyDist::from_moments(mean, variance)
    };
    // Computation is pooled at each worker's own reference load.
    let comm = pool(|p| p.comm)?;
    let comp = pool(|p| p.comp)?;
    profiles
        .iter()
        .map(|p| WorkerProfile::new(p.worker_id, comm, comp, p.bytes_b, p.ref_load_c))
        .collect()
}
