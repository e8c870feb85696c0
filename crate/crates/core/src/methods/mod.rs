//! Finite-sum objectives, per-range subgradients and the projected update.
//!
//! Two objectives are supported:
//!
//! * PCA with `R(V) = ½‖V‖²_F` and per-sample loss `½‖xᵢ − xᵢVVᵀ‖²` over
//!   orthonormal `V` (`d × k`). On that domain the loss equals
//!   `½(‖xᵢ‖² − ‖xᵢV‖²)`, which is the form differentiated here, so that
//!   `∇fᵢ = −xᵢᵀxᵢV` and a unit step `V − (Σ∇fᵢ + V)` is exactly `XᵀXV`.
//!   The projection is Gram-Schmidt.
//! * L2-regularized logistic regression with `R(V) = λ/2‖V‖²` and
//!   `fᵢ(V) = log(1 + exp(−bᵢxᵢᵀV)) / n`, `V` a `d × 1` column. No projection.
//!
//! Row indices are 1-based and inclusive.

mod gram_schmidt;
mod oracle;

pub use gram_schmidt::{gram_schmidt, orthonormality_error, span_residual};
pub use oracle::{optimum_oracle, Optimum};

use ndarray::{s, Array1, Array2, ArrayView2, Zip};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{domain, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    /// Top-`components` principal subspace.
    Pca { components: usize },
    /// Labels are ±1; `lambda` is the L2 weight.
    LogReg { labels: Array1<f64>, lambda: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projection {
    GramSchmidt,
    Identity,
}

/// A finite-sum problem instance together with its step size.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub objective: Objective,
    /// `n × d`, one sample per row.
    pub data: Array2<f64>,
    pub stepsize: f64,
    pub projection: Projection,
}

impl ProblemSpec {
    pub fn pca(data: Array2<f64>, components: usize, stepsize: f64) -> Result<Self> {
        if components == 0 || components > data.ncols() {
            return domain(format!(
                "component count {components} must lie in [1, {}]",
                data.ncols()
            ));
        }
        Self::validated(Self {
            objective: Objective::Pca { components },
            data,
            stepsize,
            projection: Projection::GramSchmidt,
        })
    }

    pub fn logreg(data: Array2<f64>, labels: Array1<f64>, lambda: f64, stepsize: f64) -> Result<Self> {
        if labels.len() != data.nrows() {
            return domain(format!(
                "{} labels for {} samples",
                labels.len(),
                data.nrows()
            ));
        }
        if labels.iter().any(|&b| b != 1.0 && b != -1.0) {
            return domain("labels must be -1 or +1");
        }
        if !(lambda >= 0.0) {
            return domain(format!("regularization must be nonnegative, got {lambda}"));
        }
        Self::validated(Self {
            objective: Objective::LogReg { labels, lambda },
            data,
            stepsize,
            projection: Projection::Identity,
        })
    }

    fn validated(self) -> Result<Self> {
        if self.data.nrows() == 0 || self.data.ncols() == 0 {
            return domain("data matrix must be nonempty");
        }
        if !(self.stepsize > 0.0) {
            return domain(format!("stepsize must be positive, got {}", self.stepsize));
        }
        if self.data.iter().any(|x| !x.is_finite()) {
            return domain("data matrix has non-finite entries");
        }
        Ok(self)
    }

    pub fn num_samples(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    /// Shape `(d, k)` of iterates and gradients.
    pub fn iterate_shape(&self) -> (usize, usize) {
        match &self.objective {
            Objective::Pca { components } => (self.dim(), *components),
            Objective::LogReg { .. } => (self.dim(), 1),
        }
    }

    /// Starting point: a random orthonormal basis for PCA, zero for logistic
    /// regression.
    pub fn initial_iterate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Array2<f64>> {
        let shape = self.iterate_shape();
        match self.objective {
            Objective::Pca { .. } => {
                let v = Array2::from_shape_fn(shape, |_| StandardNormal.sample(rng));
                gram_schmidt(&v)
            }
            Objective::LogReg { .. } => Ok(Array2::zeros(shape)),
        }
    }

    fn rows(&self, first: usize, last: usize) -> Result<ArrayView2<'_, f64>> {
        if first == 0 || first > last || last > self.num_samples() {
            return domain(format!(
                "row range [{first}, {last}] outside [1, {}]",
                self.num_samples()
            ));
        }
        Ok(self.data.slice(s![first - 1..last, ..]))
    }

    fn check_iterate(&self, v: &Array2<f64>) -> Result<()> {
        if v.dim() != self.iterate_shape() {
            return domain(format!(
                "iterate shape {:?}, expected {:?}",
                v.dim(),
                self.iterate_shape()
            ));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return domain("iterate has non-finite entries");
        }
        Ok(())
    }
}

/// Numerically stable `log(1 + eᵘ)`.
fn softplus(u: f64) -> f64 {
    u.max(0.0) + (-u.abs()).exp().ln_1p()
}

fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// `Σ_{i=first}^{last} ∇fᵢ(V)`, excluding the regularizer.
pub fn subgradient(spec: &ProblemSpec, v: &Array2<f64>, first: usize, last: usize) -> Result<Array2<f64>> {
    spec.check_iterate(v)?;
    let x = spec.rows(first, last)?;
    match &spec.objective {
        Objective::Pca { .. } => Ok(-x.t().dot(&x.dot(v))),
        Objective::LogReg { labels, .. } => {
            let n = spec.num_samples() as f64;
            let margins = x.dot(v);
            let b = labels.slice(s![first - 1..last]);
            let mut coef = Array2::zeros((x.nrows(), 1));
            Zip::from(coef.column_mut(0))
                .and(margins.column(0))
                .and(&b)
                .for_each(|c, &z, &bi| *c = -bi * sigmoid(-bi * z) / n);
            Ok(x.t().dot(&coef))
        }
    }
}

/// `Σ_{i=first}^{last} fᵢ(V)`, excluding the regularizer.
pub fn range_loss(spec: &ProblemSpec, v: &Array2<f64>, first: usize, last: usize) -> Result<f64> {
    spec.check_iterate(v)?;
    let x = spec.rows(first, last)?;
    match &spec.objective {
        Objective::Pca { .. } => {
            let xv = x.dot(v);
            let total = x.iter().map(|a| a * a).sum::<f64>();
            let kept = xv.iter().map(|a| a * a).sum::<f64>();
            Ok(0.5 * (total - kept))
        }
        Objective::LogReg { labels, .. } => {
            let n = spec.num_samples() as f64;
            let margins = x.dot(v);
            let b = labels.slice(s![first - 1..last]);
            Ok(margins
                .column(0)
                .iter()
                .zip(b.iter())
                .map(|(&z, &bi)| softplus(-bi * z))
                .sum::<f64>()
                / n)
        }
    }
}

pub fn regularizer(spec: &ProblemSpec, v: &Array2<f64>) -> f64 {
    let sq = v.iter().map(|a| a * a).sum::<f64>();
    match &spec.objective {
        Objective::Pca { .. } => 0.5 * sq,
        Objective::LogReg { lambda, .. } => 0.5 * lambda * sq,
    }
}

pub fn regularizer_gradient(spec: &ProblemSpec, v: &Array2<f64>) -> Array2<f64> {
    match &spec.objective {
        Objective::Pca { .. } => v.clone(),
        Objective::LogReg { lambda, .. } => v * *lambda,
    }
}

/// `F(V) = R(V) + Σᵢ fᵢ(V)`.
pub fn loss(spec: &ProblemSpec, v: &Array2<f64>) -> Result<f64> {
    Ok(regularizer(spec, v) + range_loss(spec, v, 1, spec.num_samples())?)
}

/// `∇F(V)`.
pub fn full_gradient(spec: &ProblemSpec, v: &Array2<f64>) -> Result<Array2<f64>> {
    Ok(subgradient(spec, v, 1, spec.num_samples())? + regularizer_gradient(spec, v))
}

/// Applies the projection operator of the problem.
pub fn project(spec: &ProblemSpec, v: Array2<f64>) -> Result<Array2<f64>> {
    match spec.projection {
        Projection::GramSchmidt => gram_schmidt(&v),
        Projection::Identity => Ok(v),
    }
}

/// One step `V ← G(V − η(H/ξ + ∇R(V)))`.
pub fn apply_update(spec: &ProblemSpec, v: &Array2<f64>, sum: &Array2<f64>, coverage: f64) -> Result<Array2<f64>> {
    if !(coverage > 0.0 && coverage <= 1.0) {
        return domain(format!("coverage must lie in (0, 1], got {coverage}"));
    }
    spec.check_iterate(v)?;
    if sum.dim() != v.dim() {
        return domain("gradient and iterate shapes differ");
    }
    let mut step = sum / coverage;
    step += &regularizer_gradient(spec, v);
    project(spec, v - &(step * spec.stepsize))
}

/// Fraction of the data's energy captured by the columns of `V`,
/// `‖XV‖²_F / ‖X‖²_F`.
pub fn explained_variance(data: &Array2<f64>, v: &Array2<f64>) -> f64 {
    let xv = data.dot(v);
    xv.iter().map(|a| a * a).sum::<f64>() / data.iter().map(|a| a * a).sum::<f64>()
}

/// Suboptimality gap of `V`: explained-variance shortfall for PCA, loss gap
/// `F(V) − F(V*)` for logistic regression.
pub fn suboptimality(spec: &ProblemSpec, v: &Array2<f64>, optimum: &Optimum) -> Result<f64> {
    match spec.objective {
        Objective::Pca { .. } => {
            spec.check_iterate(v)?;
            Ok(explained_variance(&spec.data, &optimum.v) - explained_variance(&spec.data, v))
        }
        Objective::LogReg { .. } => Ok(loss(spec, v)? - optimum.loss),
    }
}
