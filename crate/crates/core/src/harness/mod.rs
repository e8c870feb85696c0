//! Virtual-clock cluster simulation of the optimization methods.
//!
//! Latencies are simulated; the subgradients each worker returns are computed
//! exactly, from the iterate the worker was handed when it started its task.

mod bursts;
mod dataset;
mod trace;

pub use bursts::{burst_factor, inject_bursts, BurstEvent};
pub use dataset::{normalize_columns, synthetic_logreg, synthetic_pca, LogRegData};
pub use trace::{coded_bound_trace, coded_wait_count, RunTrace, TraceRow};

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gradient_cache::{GradientCache, SubgradientEntry};
use crate::latency::{comp_load, LatencyDist, WorkerProfile};
use crate::load_balancer::{
    evaluate, h_min_baseline, optimize, should_distribute, LatencySample, Profiler, SimSettings,
};
use crate::methods::{apply_update, optimum_oracle, subgradient, suboptimality, Optimum, ProblemSpec};
use crate::order_stats::TaskQueueSim;
use crate::partitioning::PartitionState;

pub const DEFAULT_MARGIN: f64 = 0.02;

/// Seed offsets of the independent random streams of a run.
const STREAM_INIT: u64 = 0x5eed_0001;
const STREAM_BALANCER: u64 = 0x5eed_0002;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Full gradient every iteration; waits for all workers.
    Gd,
    /// Sum of the fresh results only.
    Sgd,
    /// Cache of fresh results; stale ones are discarded.
    Sag,
    /// Cache of fresh and stale results.
    Dsag,
    /// Idealized MDS-coded gradient descent.
    Coded,
}

impl Method {
    fn is_full_gradient(self) -> bool {
        matches!(self, Self::Gd | Self::Coded)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Pca,
    Logreg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    /// Number of samples.
    pub n: usize,
    /// Number of raw features. Logistic regression appends an intercept.
    pub d: usize,
    /// PCA only.
    #[serde(default = "default_components")]
    pub components: usize,
    /// PCA only: per-column standard deviation decay.
    #[serde(default = "default_decay")]
    pub spectrum_decay: f64,
    /// Logistic regression only: label flip probability.
    #[serde(default = "default_label_noise")]
    pub label_noise: f64,
    /// Defaults depend on the method and problem kind.
    #[serde(default)]
    pub stepsize: Option<f64>,
    /// Defaults to the experiment seed.
    #[serde(default)]
    pub data_seed: Option<u64>,
}

fn default_components() -> usize {
    1
}

fn default_decay() -> f64 {
    0.9
}

fn default_label_noise() -> f64 {
    0.05
}

/// Default stepsize of a method on a problem kind.
pub fn default_stepsize(method: Method, kind: ProblemKind) -> f64 {
    match (method, kind) {
        (Method::Gd | Method::Coded, _) => 1.0,
        (_, ProblemKind::Pca) => 0.9,
        (_, ProblemKind::Logreg) => 0.25,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionConfig {
    /// Same count for every worker.
    #[serde(default)]
    pub subpartitions: Option<usize>,
    /// Per-worker counts; overrides `subpartitions`.
    #[serde(default)]
    pub per_worker: Option<Vec<usize>>,
}

/// Moments override for one worker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkerLatencyConfig {
    pub id: usize,
    #[serde(default)]
    pub comm_mean: Option<f64>,
    #[serde(default)]
    pub comm_var: Option<f64>,
    #[serde(default)]
    pub comp_mean: Option<f64>,
    #[serde(default)]
    pub comp_var: Option<f64>,
}

/// Latency scenario. Computation moments are for one pass over a worker's
/// entire local data; a task over a subpartition scales them linearly in the
/// number of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencyConfig {
    pub comm_mean: f64,
    #[serde(default)]
    pub comm_var: f64,
    pub comp_mean: f64,
    #[serde(default)]
    pub comp_var: f64,
    #[serde(default)]
    pub worker: Vec<WorkerLatencyConfig>,
    #[serde(default)]
    pub bursts: Vec<BurstEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BalancerConfig {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Iterations between invocations.
    #[serde(default = "default_cadence")]
    pub cadence: u64,
    #[serde(default = "default_window")]
    pub window_s: f64,
    #[serde(default = "default_sim_budget")]
    pub sim_budget: usize,
    #[serde(default = "default_true")]
    pub count_margin: bool,
    /// Virtual time between a decision and its taking effect.
    #[serde(default)]
    pub delay_s: f64,
}

fn default_threshold() -> f64 {
    crate::load_balancer::DEFAULT_THRESHOLD
}

fn default_cadence() -> u64 {
    10
}

fn default_window() -> f64 {
    crate::load_balancer::DEFAULT_WINDOW_S
}

fn default_sim_budget() -> usize {
    crate::load_balancer::DEFAULT_SIM_BUDGET
}

fn default_true() -> bool {
    true
}

impl Default for BalancerConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            threshold: default_threshold(),
            cadence: default_cadence(),
            window_s: default_window(),
            sim_budget: default_sim_budget(),
            count_margin: true,
            delay_s: 0.0,
        }
    }
}

/// Stopping rule; the run ends at whichever limit is hit first.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    #[serde(default)]
    pub iterations: Option<u64>,
    #[serde(default)]
    pub time_s: Option<f64>,
    /// Stop once the suboptimality is at most this value.
    #[serde(default)]
    pub target_gap: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodedConfig {
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub method: Method,
    pub workers: usize,
    /// Fresh results to wait for; defaults to all workers.
    #[serde(default)]
    pub w: Option<usize>,
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(default)]
    pub seed: u64,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub partitions: PartitionConfig,
    pub latency: LatencyConfig,
    #[serde(default)]
    pub balancer: BalancerConfig,
    pub budget: BudgetConfig,
    #[serde(default)]
    pub coded: Option<CodedConfig>,
}

fn default_margin() -> f64 {
    DEFAULT_MARGIN
}

fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

impl ExperimentConfig {
    /// Fresh results waited for per iteration.
    pub fn effective_w(&self) -> usize {
        if self.method.is_full_gradient() {
            self.workers
        } else {
            self.w.unwrap_or(self.workers)
        }
    }

    /// The margin only matters while some worker is still outstanding.
    pub fn effective_margin(&self) -> f64 {
        if self.effective_w() == self.workers {
            0.0
        } else {
            self.margin
        }
    }

    pub fn stepsize(&self) -> f64 {
        self.problem
            .stepsize
            .unwrap_or_else(|| default_stepsize(self.method, self.problem.kind))
    }

    /// Rows held by each worker: contiguous blocks, sizes differing by at
    /// most one.
    pub fn rows_per_worker(&self) -> Vec<usize> {
        split_rows(self.problem.n, self.workers)
    }

    /// Initial subpartition counts.
    pub fn initial_partitions(&self) -> Vec<usize> {
        if self.method.is_full_gradient() {
            return vec![1; self.workers];
        }
        match (&self.partitions.per_worker, self.partitions.subpartitions) {
            (Some(p), _) => p.clone(),
            (None, Some(p)) => vec![p; self.workers],
            (None, None) => vec![1; self.workers],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n_workers = self.workers;
        if n_workers == 0 {
            return invalid("workers must be at least 1");
        }
        if let Some(w) = self.w {
            if w == 0 || w > n_workers {
                return invalid(format!("w must lie in [1, {n_workers}], got {w}"));
            }
            if self.method.is_full_gradient() && w != n_workers {
                return invalid("gd and coded wait for all workers; w must equal workers");
            }
        }
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return invalid(format!("margin must be nonnegative, got {}", self.margin));
        }
        let pr = &self.problem;
        if pr.n < n_workers {
            return invalid(format!("{} samples cannot be split over {n_workers} workers", pr.n));
        }
        if pr.d == 0 {
            return invalid("d must be at least 1");
        }
        if pr.kind == ProblemKind::Pca && (pr.components == 0 || pr.components > pr.d) {
            return invalid(format!("components must lie in [1, {}], got {}", pr.d, pr.components));
        }
        if let Some(eta) = pr.stepsize {
            if !(eta > 0.0 && eta.is_finite()) {
                return invalid(format!("stepsize must be positive, got {eta}"));
            }
        }
        if self.method.is_full_gradient()
            && (self.partitions.per_worker.as_ref().is_some_and(|p| p.iter().any(|&x| x != 1))
                || self.partitions.subpartitions.is_some_and(|p| p != 1))
        {
            return invalid("gd and coded process each worker's full partition; subpartitions must be 1");
        }
        let p0 = self.initial_partitions();
        if p0.len() != n_workers {
            return invalid(format!("{} subpartition counts for {n_workers} workers", p0.len()));
        }
        for (i, (&p, &ni)) in p0.iter().zip(&self.rows_per_worker()).enumerate() {
            if p == 0 || p > ni {
                return invalid(format!("worker {i}: subpartition count {p} outside [1, {ni}]"));
            }
        }
        let lat = &self.latency;
        check_moments("latency", lat.comm_mean, lat.comm_var, lat.comp_mean, lat.comp_var)?;
        for o in &lat.worker {
            if o.id >= n_workers {
                return invalid(format!("latency override for worker {} of {n_workers}", o.id));
            }
            let (cm, cv, zm, zv) = self.worker_moments(o.id);
            check_moments(&format!("latency.worker {}", o.id), cm, cv, zm, zv)?;
        }
        for b in &lat.bursts {
            b.validate(n_workers).map_err(|e| Error::Config(format!("latency.bursts: {e}")))?;
        }
        let bal = &self.balancer;
        if bal.enabled {
            if self.method.is_full_gradient() {
                return invalid("the load balancer applies to sgd, sag and dsag only");
            }
            if !(0.0..1.0).contains(&bal.threshold) {
                return invalid(format!("balancer threshold must lie in [0, 1), got {}", bal.threshold));
            }
            if bal.cadence == 0 || bal.sim_budget == 0 {
                return invalid("balancer cadence and sim_budget must be positive");
            }
            if !(bal.window_s > 0.0) || !(bal.delay_s >= 0.0) {
                return invalid("balancer window must be positive and delay nonnegative");
            }
        }
        let b = &self.budget;
        if b.iterations.is_none() && b.time_s.is_none() {
            return invalid("budget needs iterations or time_s");
        }
        if b.iterations == Some(0) || b.time_s.is_some_and(|t| !(t > 0.0)) {
            return invalid("budget limits must be positive");
        }
        match (self.method, self.coded) {
            (Method::Coded, None) => return invalid("method coded needs a [coded] rate"),
            (Method::Coded, Some(c)) if !(c.rate > 0.0 && c.rate <= 1.0) => {
                return invalid(format!("code rate must lie in (0, 1], got {}", c.rate))
            }
            _ => {}
        }
        Ok(())
    }

    /// `(comm mean, comm var, comp mean, comp var)` of a worker after
    /// overrides.
    fn worker_moments(&self, worker: usize) -> (f64, f64, f64, f64) {
        let l = &self.latency;
        let mut m = (l.comm_mean, l.comm_var, l.comp_mean, l.comp_var);
        for o in l.worker.iter().filter(|o| o.id == worker) {
            m.0 = o.comm_mean.unwrap_or(m.0);
            m.1 = o.comm_var.unwrap_or(m.1);
            m.2 = o.comp_mean.unwrap_or(m.2);
            m.3 = o.comp_var.unwrap_or(m.3);
        }
        m
    }
}

fn check_moments(what: &str, comm_mean: f64, comm_var: f64, comp_mean: f64, comp_var: f64) -> Result<()> {
    if !(comm_mean >= 0.0 && comm_var >= 0.0 && comp_var >= 0.0) {
        return invalid(format!("{what}: means and variances must be nonnegative"));
    }
    if !(comp_mean > 0.0) {
        return invalid(format!("{what}: comp_mean must be positive"));
    }
    if comm_mean == 0.0 && comm_var > 0.0 {
        return invalid(format!("{what}: zero-mean communication must have zero variance"));
    }
    Ok(())
}

fn split_rows(n: usize, workers: usize) -> Vec<usize> {
    (0..workers)
        .map(|i| n / workers + usize::from(i < n % workers))
        .collect()
}

/// Builds the problem instance described by `config`.
pub fn prepare_dataset(config: &ExperimentConfig) -> Result<ProblemSpec> {
    let pr = &config.problem;
    let seed = pr.data_seed.unwrap_or(config.seed);
    let eta = config.stepsize();
    match pr.kind {
        ProblemKind::Logreg => {
            let data = synthetic_logreg(pr.n, pr.d, pr.label_noise, seed)?;
            ProblemSpec::logreg(data.features, data.labels, 1.0 / pr.n as f64, eta)
        }
        ProblemKind::Pca => ProblemSpec::pca(synthetic_pca(pr.n, pr.d, pr.spectrum_decay, seed)?, pr.components, eta),
    }
}

/// A validated experiment: configuration, problem instance and its optimum.
#[derive(Debug, Clone)]
pub struct Experiment {
    config: ExperimentConfig,
    spec: ProblemSpec,
    optimum: Optimum,
}

struct WorkerState {
    part: PartitionState,
    /// Global index of the row before the worker's first row.
    offset: usize,
    /// Subpartition count to switch to, and the time it takes effect.
    pending: Option<(usize, f64)>,
}

struct Task {
    first: usize,
    last: usize,
    p: usize,
    comm: f64,
    comp: f64,
    grad: Array2<f64>,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let spec = prepare_dataset(&config)?;
        Self::with_problem(config, spec)
    }

    /// Uses `spec` as the problem instance; the dataset fields of the config
    /// other than `n` are ignored, and `spec.stepsize` is used as is.
    pub fn with_problem(config: ExperimentConfig, spec: ProblemSpec) -> Result<Self> {
        config.validate()?;
        if spec.num_samples() != config.problem.n {
            return invalid(format!(
                "problem has {} samples, config says {}",
                spec.num_samples(),
                config.problem.n
            ));
        }
        let optimum = optimum_oracle(&spec)?;
        Ok(Self { config, spec, optimum })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn optimum(&self) -> &Optimum {
        &self.optimum
    }

    fn base_profiles(&self) -> Result<Vec<WorkerProfile>> {
        let (d, k) = self.spec.iterate_shape();
        self.config
            .rows_per_worker()
            .iter()
            .enumerate()
            .map(|(i, &ni)| {
                let (cm, cv, zm, zv) = self.config.worker_moments(i);
                WorkerProfile::new(
                    i,
                    LatencyDist::from_moments(cm, cv)?,
                    LatencyDist::from_moments(zm, zv)?,
                    (d * k * 8) as u64,
                    comp_load(1.0, d, k, ni)?,
                )
            })
            .collect()
    }

    /// Runs the simulation. Coded runs simulate gradient descent and then
    /// apply [`coded_bound_trace`].
    pub fn run(&self) -> Result<RunTrace> {
        let trace = self.simulate()?;
        match (self.config.method, self.config.coded) {
            (Method::Coded, Some(c)) => coded_bound_trace(&trace, c.rate),
            _ => Ok(trace),
        }
    }

    fn simulate(&self) -> Result<RunTrace> {
        let cfg = &self.config;
        let spec = &self.spec;
        let n_workers = cfg.workers;
        let w = cfg.effective_w();
        let margin = cfg.effective_margin();
        let (d, k) = spec.iterate_shape();
        let rows = cfg.rows_per_worker();
        let profiles = self.base_profiles()?;
        let bursts = &cfg.latency.bursts;

        let mut latency_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(STREAM_INIT));
        let mut balancer_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(STREAM_BALANCER));

        let p0 = cfg.initial_partitions();
        let mut workers = Vec::with_capacity(n_workers);
        let mut offset = 0;
        for (&ni, &pi) in rows.iter().zip(&p0) {
            workers.push(WorkerState {
                part: PartitionState::new(ni, pi)?,
                offset,
                pending: None,
            });
            offset += ni;
        }

        let mut v = spec.initial_iterate(&mut init_rng)?;
        let mut cache = GradientCache::new(spec.num_samples(), (d, k));
        let mut sim = TaskQueueSim::<Option<Task>>::new(n_workers);
        let mut profiler = Profiler::new(n_workers, cfg.balancer.window_s)?;
        let settings = SimSettings {
            w,
            sim_budget: cfg.balancer.sim_budget,
            margin,
            count_margin: cfg.balancer.count_margin,
        };
        let mut h_min: Option<f64> = None;

        let mut trace = RunTrace {
            num_workers: n_workers,
            rows: vec![TraceRow {
                iteration: 0,
                time_s: 0.0,
                suboptimality: suboptimality(spec, &v, &self.optimum)?,
                xi: 0.0,
                fresh_count: 0,
                fresh: vec![false; n_workers],
                p: p0.clone(),
                latency: vec![None; n_workers],
            }],
            rebalances: Vec::new(),
        };

        let mut t: u64 = 0;
        loop {
            if cfg.budget.iterations.is_some_and(|max| t >= max)
                || cfg.budget.time_s.is_some_and(|max| sim.now() >= max)
                || cfg.budget.target_gap.is_some_and(|g| trace.final_suboptimality() <= g)
            {
                break;
            }
            t += 1;

            let mut task_error: Option<Error> = None;
            let outcome = sim.run_iteration(t, w, margin, |i, _, now| {
                let ws = &mut workers[i];
                let p_new = match ws.pending {
                    Some((p, at)) if now >= at => {
                        ws.pending = None;
                        Some(p)
                    }
                    _ => None,
                };
                let task = ws.part.next(p_new).and_then(|(a, b)| {
                    let (first, last) = (ws.offset + a, ws.offset + b);
                    let load = comp_load(1.0, d, k, last - first + 1)?;
                    let profile = &profiles[i];
                    let comm = profile.comm.sample(&mut latency_rng);
                    let comp = profile
                        .comp_at(load)
                        .scaled(burst_factor(bursts, i, now))
                        .sample(&mut latency_rng);
                    let grad = subgradient(spec, &v, first, last)?;
                    Ok(Task { first, last, p: ws.part.p, comm, comp, grad })
                });
                match task {
                    Ok(task) => (task.comm + task.comp, Some(task)),
                    Err(e) => {
                        task_error.get_or_insert(e);
                        (0.0, None)
                    }
                }
            });
            if let Some(e) = task_error {
                return Err(e);
            }

            let mut fresh = vec![false; n_workers];
            let mut latency = vec![None; n_workers];
            let mut fresh_tasks: Vec<(usize, Task)> = Vec::new();
            for arrival in outcome.arrivals {
                let task = arrival.payload.expect("tasks without errors carry a payload");
                profiler.record(LatencySample {
                    worker: arrival.worker,
                    time: arrival.time,
                    comm: task.comm,
                    comp: task.comp,
                    p: task.p,
                });
                if arrival.fresh {
                    fresh[arrival.worker] = true;
                    latency[arrival.worker] = Some((task.comm, task.comp));
                }
                match cfg.method {
                    Method::Gd | Method::Coded | Method::Sgd => {
                        if arrival.fresh {
                            fresh_tasks.push((arrival.worker, task));
                        }
                    }
                    Method::Sag | Method::Dsag => {
                        if arrival.fresh || cfg.method == Method::Dsag {
                            let entry = SubgradientEntry::new(task.first, task.last, arrival.iteration, task.grad);
                            cache.try_insert(entry)?;
                        }
                    }
                }
            }

            let xi = match cfg.method {
                Method::Gd | Method::Coded | Method::Sgd => {
                    fresh_tasks.sort_by_key(|(worker, _)| *worker);
                    let mut sum = Array2::zeros((d, k));
                    let mut covered = 0;
                    for (_, task) in &fresh_tasks {
                        sum += &task.grad;
                        covered += task.last - task.first + 1;
                    }
                    let xi = covered as f64 / spec.num_samples() as f64;
                    v = apply_update(spec, &v, &sum, xi)?;
                    xi
                }
                Method::Sag | Method::Dsag => {
                    let (sum, xi) = cache.gradient_estimate()?;
                    v = apply_update(spec, &v, sum, xi)?;
                    xi
                }
            };

            if cfg.balancer.enabled && t % cfg.balancer.cadence == 0 {
                let stats = profiler.snapshot(sim.now())?;
                if stats.is_complete() {
                    let h_min = match h_min {
                        Some(h) => h,
                        None => *h_min.insert(h_min_baseline(&p0, &stats, &rows, settings, &mut balancer_rng)?),
                    };
                    let current: Vec<usize> = workers
                        .iter()
                        .map(|ws| ws.pending.map_or(ws.part.p, |(p, _)| p))
                        .collect();
                    let candidate = optimize(&current, &stats, &rows, h_min, settings, &mut balancer_rng)?;
                    let now_sol = evaluate(&current, &stats, &rows, settings, &mut balancer_rng)?;
                    if should_distribute(&now_sol, &candidate, cfg.balancer.threshold) {
                        let effective = sim.now() + cfg.balancer.delay_s;
                        for (ws, (&new, &old)) in workers.iter_mut().zip(candidate.p.iter().zip(&current)) {
                            if new != old {
                                ws.pending = Some((new, effective));
                            }
                        }
                        trace.rebalances.push(t);
                    }
                }
            }

            trace.rows.push(TraceRow {
                iteration: t,
                time_s: outcome.end,
                suboptimality: suboptimality(spec, &v, &self.optimum)?,
                xi,
                fresh_count: outcome.fresh_count,
                fresh,
                p: workers.iter().map(|ws| ws.part.p).collect(),
                latency,
            });
        }
        Ok(trace)
    }
}

/// Prepares the dataset, computes the optimum and runs the simulation.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunTrace> {
    Experiment::new(config.clone())?.run()
}
