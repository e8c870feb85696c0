//! Fixtures shared by the benchmarks.

use dsag_core::latency::{LatencyDist, WorkerProfile};
use dsag_core::load_balancer::{ProfiledStats, WorkerStats};
use dsag_core::ProblemSpec;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gamma-distributed workers whose mean computation latency grows with the index.
pub fn profiles(n: usize) -> Vec<WorkerProfile> {
    (0..n)
        .map(|i| {
            let comp = 1.0 + i as f64 / n as f64;
            WorkerProfile::new(
                i,
                LatencyDist::from_moments(0.01, 1e-6).unwrap(),
                LatencyDist::from_moments(comp, (0.1 * comp).powi(2)).unwrap(),
                0,
                1.0,
            )
            .unwrap()
        })
        .collect()
}

pub fn stats(n: usize, p: usize) -> ProfiledStats {
    let workers = (0..n)
        .map(|i| {
            let e_comp = 1.0 + i as f64 / n as f64;
            Some(WorkerStats {
                e_comm: 0.01,
                v_comm: 1e-6,
                e_comp,
                v_comp: (0.1 * e_comp).powi(2),
                observed_p: p,
                sample_count: 20,
                degenerate: false,
            })
        })
        .collect();
    ProfiledStats { workers }
}

pub fn logreg(n: usize, d: usize, seed: u64) -> ProblemSpec {
    let mut r = rng(seed);
    let data = Array2::from_shape_fn((n, d), |_| r.random_range(-1.0..1.0));
    let labels = Array1::from_shape_fn(n, |_| if r.random_bool(0.5) { 1.0 } else { -1.0 });
    ProblemSpec::logreg(data, labels, 1.0 / n as f64, 1.0).unwrap()
}

pub fn pca(n: usize, d: usize, k: usize, seed: u64) -> ProblemSpec {
    let mut r = rng(seed);
    let data = Array2::from_shape_fn((n, d), |_| r.random_range(-1.0..1.0));
    ProblemSpec::pca(data, k, 1.0).unwrap()
}
