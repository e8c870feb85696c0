//! Latency profiling and subpartition optimization.
//!
//! The profiler keeps a moving time window of per-task latency samples and
//! reduces it to per-worker moments. [`optimize`] equalizes the expected
//! total latency across workers by choosing each worker's subpartition count,
//! subject to a lower bound on the expected per-iteration contribution `h`,
//! which is estimated by simulating the iterative process.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::latency::{scale_comp_moments, LatencyDist, WorkerProfile};
use crate::order_stats::TaskQueueSim;

pub const DEFAULT_WINDOW_S: f64 = 10.0;
pub const DEFAULT_SIM_BUDGET: usize = 100;
pub const DEFAULT_THRESHOLD: f64 = 0.10;

/// One completed task as seen by the coordinator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencySample {
    pub worker: usize,
    /// Completion time.
    pub time: f64,
    pub comm: f64,
    pub comp: f64,
    /// Subpartition count the task was computed with.
    pub p: usize,
}

/// Window moments of one worker. Computation moments refer to `observed_p`
/// subpartitions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkerStats {
    pub e_comm: f64,
    pub v_comm: f64,
    pub e_comp: f64,
    pub v_comp: f64,
    pub observed_p: usize,
    pub sample_count: usize,
    /// Set when either sample variance is zero.
    pub degenerate: bool,
}

impl WorkerStats {
    /// Expected computation latency with `p` subpartitions.
    pub fn e_comp_at(&self, p: usize) -> f64 {
        self.e_comp * self.observed_p as f64 / p as f64
    }

    /// Expected total latency with `p` subpartitions.
    pub fn e_total_at(&self, p: usize) -> f64 {
        self.e_comm + self.e_comp_at(p)
    }

    /// Latency profile with `p` subpartitions, for simulation. Zero variances
    /// are replaced by `(1e-6·mean)²` so that every positive component is a
    /// proper gamma.
    pub fn profile_at(&self, worker: usize, p: usize) -> Result<WorkerProfile> {
        let (e_comp, v_comp) = if self.e_comp > 0.0 {
            let v = if self.v_comp > 0.0 { self.v_comp } else { (1e-6 * self.e_comp).powi(2) };
            scale_comp_moments(self.e_comp, v, self.observed_p, p)?
        } else {
            (0.0, 0.0)
        };
        let comm = component(self.e_comm, self.v_comm)?;
        let comp = component(e_comp, v_comp)?;
        WorkerProfile::new(worker, comm, comp, 0, 1.0)
    }
}

fn component(mean: f64, var: f64) -> Result<LatencyDist> {
    if mean > 0.0 && var <= 0.0 {
        LatencyDist::from_moments(mean, (1e-6 * mean).powi(2))
    } else {
        LatencyDist::from_moments(mean, var)
    }
}

/// Per-worker window statistics; `None` for workers with fewer than two
/// samples in the window.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfiledStats {
    pub workers: Vec<Option<WorkerStats>>,
}

impl ProfiledStats {
    pub fn num_workers(&self) -> usize {
        self.workers.len()
    }

    pub fn is_complete(&self) -> bool {
        self.workers.iter().all(Option::is_some)
    }

    fn all(&self) -> Result<Vec<WorkerStats>> {
        self.workers
            .iter()
            .enumerate()
            .map(|(i, s)| match s {
                Some(s) => Ok(*s),
                None => domain(format!("no latency statistics for worker {i}")),
            })
            .collect()
    }
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Reduces the samples with `time ≥ now − window` to per-worker moments.
///
/// Computation samples recorded at different subpartition counts are first
/// rescaled linearly to the count of the worker's most recent sample.
pub fn windowed_stats(samples: &[LatencySample], num_workers: usize, window: f64, now: f64) -> Result<ProfiledStats> {
    if !(window > 0.0) {
        return domain(format!("window must be positive, got {window}"));
    }
    let cutoff = now - window;
    let mut per_worker: Vec<Vec<&LatencySample>> = vec![Vec::new(); num_workers];
    for s in samples.iter().filter(|s| s.time >= cutoff && s.time <= now) {
        if s.worker >= num_workers {
            return domain(format!("sample for worker {} of {num_workers}", s.worker));
        }
        if s.p == 0 {
            return domain("sample recorded with zero subpartitions");
        }
        per_worker[s.worker].push(s);
    }
    let workers = per_worker
        .into_iter()
        .map(|ss| {
            if ss.len() < 2 {
                return None;
            }
            let latest = ss.iter().max_by(|a, b| a.time.total_cmp(&b.time)).unwrap();
            let p_ref = latest.p;
            let comm: Vec<f64> = ss.iter().map(|s| s.comm).collect();
            let comp: Vec<f64> = ss.iter().map(|s| s.comp * s.p as f64 / p_ref as f64).collect();
            let (e_comm, v_comm) = mean_var(&comm);
            let (e_comp, v_comp) = mean_var(&comp);
            Some(WorkerStats {
                e_comm,
                v_comm,
                e_comp,
                v_comp,
                observed_p: p_ref,
                sample_count: ss.len(),
                degenerate: v_comm == 0.0 || v_comp == 0.0,
            })
        })
        .collect();
    Ok(ProfiledStats { workers })
}

/// Moving-window latency profiler.
#[derive(Debug, Clone)]
pub struct Profiler {
    num_workers: usize,
    window: f64,
    samples: VecDeque<LatencySample>,
}

impl Profiler {
    pub fn new(num_workers: usize, window: f64) -> Result<Self> {
        if !(window > 0.0) {
            return domain(format!("window must be positive, got {window}"));
        }
        Ok(Self {
            num_workers,
            window,
            samples: VecDeque::new(),
        })
    }

    /// Records a sample. Samples must arrive in nondecreasing time order.
    pub fn record(&mut self, sample: LatencySample) {
        self.samples.push_back(sample);
        let cutoff = sample.time - self.window;
        while self.samples.front().is_some_and(|s| s.time < cutoff) {
            self.samples.pop_front();
        }
    }

    pub fn snapshot(&self, now: f64) -> Result<ProfiledStats> {
        let samples: Vec<LatencySample> = self.samples.iter().copied().collect();
        windowed_stats(&samples, self.num_workers, self.window, now)
    }
}

/// Knobs of the contribution estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSettings {
    pub w: usize,
    /// Simulated iterations per estimate.
    pub sim_budget: usize,
    pub margin: f64,
    /// Whether results arriving in the margin window count as fresh.
    pub count_margin: bool,
}

impl SimSettings {
    pub fn new(w: usize) -> Self {
        Self {
            w,
            sim_budget: DEFAULT_SIM_BUDGET,
            margin: 0.0,
            count_margin: true,
        }
    }
}

fn check_p(p: &[usize], n_per_worker: &[usize]) -> Result<()> {
    if p.len() != n_per_worker.len() {
        return domain(format!("{} subpartition counts for {} workers", p.len(), n_per_worker.len()));
    }
    for (i, (&pi, &ni)) in p.iter().zip(n_per_worker).enumerate() {
        if pi == 0 || pi > ni {
            return domain(format!("worker {i}: subpartition count {pi} outside [1, {ni}]"));
        }
    }
    Ok(())
}

/// Expected contribution `h(p) = Σ uᵢ·nᵢ/(pᵢ·n)` and the fresh fractions `u`.
pub fn contribution<R: Rng + ?Sized>(
    p: &[usize],
    stats: &ProfiledStats,
    n_per_worker: &[usize],
    settings: SimSettings,
    rng: &mut R,
) -> Result<(f64, Vec<f64>)> {
    check_p(p, n_per_worker)?;
    let all = stats.all()?;
    if all.len() != p.len() {
        return domain("statistics and subpartition counts differ in length");
    }
    let n_workers = p.len();
    if settings.w == 0 || settings.w > n_workers {
        return domain(format!("w must lie in [1, {n_workers}], got {}", settings.w));
    }
    if settings.sim_budget == 0 {
        return domain("simulation budget must be positive");
    }
    let profiles = all
        .iter()
        .zip(p)
        .enumerate()
        .map(|(i, (s, &pi))| s.profile_at(i, pi))
        .collect::<Result<Vec<_>>>()?;
    let mut sim = TaskQueueSim::<()>::new(n_workers);
    let mut fresh = vec![0usize; n_workers];
    for t in 1..=settings.sim_budget as u64 {
        let out = sim.run_iteration(t, settings.w, settings.margin, |i, _, _| {
            let pr = &profiles[i];
            (pr.sample_total(pr.ref_load_c, rng), ())
        });
        for a in &out.arrivals {
            if a.fresh && (settings.count_margin || a.time <= out.wth_fresh) {
                fresh[a.worker] += 1;
            }
        }
    }
    let u: Vec<f64> = fresh.iter().map(|&c| c as f64 / settings.sim_budget as f64).collect();
    let n: usize = n_per_worker.iter().sum();
    let h = u
        .iter()
        .zip(p.iter().zip(n_per_worker))
        .map(|(ui, (&pi, &ni))| ui * ni as f64 / (pi as f64 * n as f64))
        .sum();
    Ok((h, u))
}

/// `h_min = h(p₀)`.
pub fn h_min_baseline<R: Rng + ?Sized>(
    p0: &[usize],
    stats: &ProfiledStats,
    n_per_worker: &[usize],
    settings: SimSettings,
    rng: &mut R,
) -> Result<f64> {
    contribution(p0, stats, n_per_worker, settings, rng).map(|(h, _)| h)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalancerSolution {
    pub p: Vec<usize>,
    /// Ratio of the largest to the smallest expected total latency.
    pub predicted_ratio: f64,
    pub predicted_h: f64,
}

fn expected_latencies(stats: &[WorkerStats], p: &[usize]) -> Vec<f64> {
    stats.iter().zip(p).map(|(s, &pi)| s.e_total_at(pi)).collect()
}

/// Max/min ratio of expected total latencies under `p`.
pub fn latency_ratio(stats: &ProfiledStats, p: &[usize]) -> Result<f64> {
    let lat = expected_latencies(&stats.all()?, p);
    Ok(ratio(&lat))
}

fn ratio(lat: &[f64]) -> f64 {
    let max = lat.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = lat.iter().copied().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else if max > 0.0 {
        f64::INFINITY
    } else {
        1.0
    }
}

/// Index of the extreme value; the lowest index wins ties.
fn argext(lat: &[f64], eligible: impl Fn(usize) -> bool, slowest: bool) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &x) in lat.iter().enumerate() {
        if !eligible(i) {
            continue;
        }
        best = match best {
            Some(b) if (slowest && x <= lat[b]) || (!slowest && x >= lat[b]) => Some(b),
            _ => Some(i),
        };
    }
    best
}

/// Equalization step: every worker's subpartition count is set so that its
/// expected total latency matches that of the currently slowest worker.
pub fn equalize(stats: &ProfiledStats, n_per_worker: &[usize]) -> Result<Vec<usize>> {
    let all = stats.all()?;
    if all.len() != n_per_worker.len() {
        return domain("statistics and worker sizes differ in length");
    }
    let current: Vec<usize> = all.iter().map(|s| s.observed_p).collect();
    let lat = expected_latencies(&all, &current);
    let slow = argext(&lat, |_| true, true).expect("at least one worker");
    let target = lat[slow];
    Ok(all
        .iter()
        .zip(n_per_worker)
        .map(|(s, &ni)| {
            let denom = target - s.e_comm;
            let work = s.e_comp * s.observed_p as f64;
            let p = if denom > 0.0 && work > 0.0 {
                (work / denom).floor()
            } else {
                s.observed_p as f64
            };
            (p.max(1.0) as usize).min(ni)
        })
        .collect())
}

/// Scores `p` against the given statistics.
pub fn evaluate<R: Rng + ?Sized>(
    p: &[usize],
    stats: &ProfiledStats,
    n_per_worker: &[usize],
    settings: SimSettings,
    rng: &mut R,
) -> Result<BalancerSolution> {
    let (h, _) = contribution(p, stats, n_per_worker, settings, rng)?;
    Ok(BalancerSolution {
        p: p.to_vec(),
        predicted_ratio: latency_ratio(stats, p)?,
        predicted_h: h,
    })
}

/// Subpartition optimizer: equalize expected latencies, then shift work
/// toward the fastest workers until `h ≥ h_min`, then away from the slowest
/// ones while `h ≥ 0.99·h_min`. A final step that breaks the relaxed
/// constraint is undone.
///
/// Every contribution estimate within one call reuses the same random
/// stream, so that comparisons between candidates are not swamped by noise.
pub fn optimize<R: Rng + ?Sized>(
    p: &[usize],
    stats: &ProfiledStats,
    n_per_worker: &[usize],
    h_min: f64,
    settings: SimSettings,
    rng: &mut R,
) -> Result<BalancerSolution> {
    check_p(p, n_per_worker)?;
    if !(h_min > 0.0) {
        return domain(format!("h_min must be positive, got {h_min}"));
    }
    let all = stats.all()?;
    let seed: u64 = rng.random();
    let h_of = |p: &[usize]| -> Result<f64> {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        contribution(p, stats, n_per_worker, settings, &mut r).map(|(h, _)| h)
    };
    let mut cur = equalize(stats, n_per_worker)?;
    let mut h = h_of(&cur)?;
    // Each step moves one count by at least one within [1, nᵢ], and each loop
    // moves counts in one direction only.
    let max_steps: usize = n_per_worker.iter().sum();

    let mut steps = 0;
    while h < h_min && steps < max_steps {
        let lat = expected_latencies(&all, &cur);
        let Some(i) = argext(&lat, |i| cur[i] > 1, false) else {
            break;
        };
        let smaller = (0.99 * cur[i] as f64).floor() as usize;
        cur[i] = smaller.clamp(1, cur[i] - 1);
        h = h_of(&cur)?;
        steps += 1;
    }

    steps = 0;
    while h >= 0.99 * h_min && steps < max_steps {
        let lat = expected_latencies(&all, &cur);
        let Some(i) = argext(&lat, |i| cur[i] < n_per_worker[i], true) else {
            break;
        };
        let prev = cur[i];
        let larger = (1.01 * prev as f64).ceil() as usize;
        cur[i] = larger.clamp(prev + 1, n_per_worker[i]);
        let h_next = h_of(&cur)?;
        if h_next < 0.99 * h_min {
            cur[i] = prev;
            break;
        }
        h = h_next;
        steps += 1;
    }

    Ok(BalancerSolution {
        predicted_ratio: ratio(&expected_latencies(&all, &cur)),
        p: cur,
        predicted_h: h,
    })
}

/// True iff `candidate` improves the latency ratio of `current` by more than
/// the fraction `threshold`.
pub fn should_distribute(current: &BalancerSolution, candidate: &BalancerSolution, threshold: f64) -> bool {
    if candidate.p == current.p {
        return false;
    }
    candidate.predicted_ratio <= (1.0 - threshold) * current.predicted_ratio
}
