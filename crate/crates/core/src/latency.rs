//! Per-worker latency model.
//!
//! The latency of one task at worker `i` is the sum of two independent
//! components: a communication latency that depends only on the number of
//! bytes exchanged, and a computation latency whose mean and variance scale
//! linearly (resp. quadratically) with the computational load. Both
//! components are modeled as gamma random variables; a constant variant
//! exists for hand-checkable simulations.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Shape/scale parameterization of a gamma distribution (scale in seconds).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaParams {
    shape: f64,
    scale: f64,
}

impl GammaParams {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite()) || !(scale > 0.0 && scale.is_finite()) {
            return domain(format!(
                "gamma parameters must be positive and finite (shape={shape}, scale={scale})"
            ));
        }
        Ok(Self { shape, scale })
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn mean(&self) -> f64 {
        self.shape * self.scale
    }

    pub fn variance(&self) -> f64 {
        self.shape * self.scale * self.scale
    }

    /// Multiplies the random variable by `factor`: the mean scales by `factor`
    /// and the variance by `factor²`, the shape is unchanged.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            shape: self.shape,
            scale: self.scale * factor,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        // Parameters are validated on construction.
        Gamma::new(self.shape, self.scale)
            .expect("validated gamma parameters")
            .sample(rng)
    }
}

/// Distribution of one latency component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LatencyDist {
    /// Zero-variance latency; sampling always returns the value.
    Constant(f64),
    Gamma(GammaParams),
}

impl LatencyDist {
    /// Builds a distribution from its first two moments. A zero variance
    /// yields [`LatencyDist::Constant`]; a positive one a moment-matched gamma.
    pub fn from_moments(mean: f64, variance: f64) -> Result<Self> {
        if !(mean >= 0.0 && mean.is_finite()) || !(variance >= 0.0 && variance.is_finite()) {
            return domain(format!(
                "latency moments must be nonnegative and finite (mean={mean}, variance={variance})"
            ));
        }
        if variance == 0.0 || mean == 0.0 {
            if variance != 0.0 {
                return domain("a zero-mean latency must have zero variance");
            }
            return Ok(Self::Constant(mean));
        }
        fit_gamma_from_moments(mean, variance).map(Self::Gamma)
    }

    pub fn mean(&self) -> f64 {
        match self {
            Self::Constant(x) => *x,
            Self::Gamma(g) => g.mean(),
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            Self::Constant(_) => 0.0,
            Self::Gamma(g) => g.variance(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        match self {
            Self::Constant(x) => Self::Constant(x * factor),
            Self::Gamma(g) => Self::Gamma(g.scaled(factor)),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Constant(x) => *x,
            Self::Gamma(g) => g.sample(rng),
        }
    }
}

/// Latency model of one worker: communication latency at `bytes_b` bytes and
/// computation latency at the reference load `ref_load_c`.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkerProfile {
    pub worker_id: usize,
    pub comm: LatencyDist,
    pub comp: LatencyDist,
    pub bytes_b: u64,
    pub ref_load_c: f64,
}

impl WorkerProfile {
    pub fn new(
        worker_id: usize,
        comm: LatencyDist,
        comp: LatencyDist,
        bytes_b: u64,
        ref_load_c: f64,
    ) -> Result<Self> {
        if !(ref_load_c > 0.0 && ref_load_c.is_finite()) {
            return domain(format!("reference load must be positive, got {ref_load_c}"));
        }
        Ok(Self {
            worker_id,
            comm,
            comp,
            bytes_b,
            ref_load_c,
        })
    }

    /// Profile with both components deterministic, at unit reference load.
    pub fn deterministic(worker_id: usize, comm: f64, comp: f64) -> Self {
        Self {
            worker_id,
            comm: LatencyDist::Constant(comm),
            comp: LatencyDist::Constant(comp),
            bytes_b: 0,
            ref_load_c: 1.0,
        }
    }

    /// Computation latency distribution at `load_c`, linearly rescaled from the
    /// reference load.
    pub fn comp_at(&self, load_c: f64) -> LatencyDist {
        self.comp.scaled(load_c / self.ref_load_c)
    }

    /// Expected total latency at `load_c`.
    pub fn mean_total(&self, load_c: f64) -> f64 {
        self.comm.mean() + self.comp_at(load_c).mean()
    }

    /// Draws `(communication, computation)` latencies for one task at `load_c`.
    pub fn sample_parts<R: Rng + ?Sized>(&self, load_c: f64, rng: &mut R) -> (f64, f64) {
        let comm = self.comm.sample(rng);
        let comp = self.comp_at(load_c).sample(rng);
        (comm, comp)
    }

    /// Draws one total latency at `load_c`.
    pub fn sample_total<R: Rng + ?Sized>(&self, load_c: f64, rng: &mut R) -> f64 {
        let (comm, comp) = self.sample_parts(load_c, rng);
        comm + comp
    }
}

/// Moment-matched gamma: shape = e²/v, scale = v/e.
pub fn fit_gamma_from_moments(mean: f64, variance: f64) -> Result<GammaParams> {
    if !(mean > 0.0) || !(variance > 0.0) {
        return domain(format!(
            "gamma fit needs positive mean and variance (mean={mean}, variance={variance})"
        ));
    }
    GammaParams::new(mean * mean / variance, variance / mean)
}

/// Operation count of multiplying `rows` rows of density `density` and
/// dimension `dim` with a `dim × cols` iterate: `2·ζ·d·k·rows`.
pub fn comp_load(density: f64, dim: usize, cols: usize, rows: usize) -> Result<f64> {
    if !(density > 0.0 && density <= 1.0) {
        return domain(format!("density must lie in (0, 1], got {density}"));
    }
    if dim == 0 || cols == 0 || rows == 0 {
        return domain("dimension, column and row counts must be at least 1");
    }
    Ok(2.0 * density * dim as f64 * cols as f64 * rows as f64)
}

/// Rescales computation-latency moments recorded at `p_old` subpartitions to
/// `p_new` subpartitions: `e·p_old/p_new` and `v·p_old²/p_new²`.
pub fn scale_comp_moments(mean: f64, variance: f64, p_old: usize, p_new: usize) -> Result<(f64, f64)> {
    if p_old == 0 || p_new == 0 {
        return domain("subpartition counts must be at least 1");
    }
    if !(mean > 0.0) || !(variance > 0.0) {
        return domain(format!(
            "moments must be positive (mean={mean}, variance={variance})"
        ));
    }
    let ratio = p_old as f64 / p_new as f64;
    Ok((mean * ratio, variance * ratio * ratio))
}

/// Draws one total latency sample of `profile` at `load_c`.
pub fn sample_total_latency<R: Rng + ?Sized>(
    profile: &WorkerProfile,
    load_c: f64,
    rng: &mut R,
) -> Result<f64> {
    if !(load_c > 0.0) {
        return domain(format!("load must be positive, got {load_c}"));
    }
    Ok(profile.sample_total(load_c, rng))
}
