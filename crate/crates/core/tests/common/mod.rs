#![allow(dead_code)]

use dsag_core::harness::{
    BalancerConfig, BudgetConfig, BurstEvent, ExperimentConfig, LatencyConfig, Method, PartitionConfig,
    ProblemConfig, ProblemKind, WorkerLatencyConfig,
};

/// Small logistic-regression experiment with deterministic, identical workers.
pub fn config(method: Method, workers: usize, n: usize) -> ExperimentConfig {
    ExperimentConfig {
        method,
        workers,
        w: None,
        margin: 0.02,
        seed: 3,
        problem: ProblemConfig {
            kind: ProblemKind::Logreg,
            n,
            d: 4,
            components: 1,
            spectrum_decay: 0.9,
            label_noise: 0.1,
            stepsize: None,
            data_seed: None,
        },
        partitions: PartitionConfig::default(),
        latency: LatencyConfig {
            comm_mean: 0.0,
            comm_var: 0.0,
            comp_mean: 1.0,
            comp_var: 0.0,
            worker: vec![],
            bursts: vec![],
        },
        balancer: BalancerConfig::default(),
        budget: BudgetConfig {
            iterations: Some(30),
            time_s: None,
            target_gap: None,
        },
        coded: None,
    }
}

pub fn slow_worker(id: usize, comp_mean: f64, comp_var: f64) -> WorkerLatencyConfig {
    WorkerLatencyConfig {
        id,
        comm_mean: None,
        comm_var: None,
        comp_mean: Some(comp_mean),
        comp_var: Some(comp_var),
    }
}

pub fn burst(worker: usize, start: f64, end: Option<f64>, scale: f64) -> BurstEvent {
    BurstEvent {
        worker,
        start,
        end,
        comp_mean_scale: scale,
    }
}
