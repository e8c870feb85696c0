use nalgebra::{DMatrix, DVector, SymmetricEigen};
use ndarray::Array2;

use super::{full_gradient, loss, Objective, ProblemSpec};
use crate::error::{Error, Result};

const NEWTON_MAX_ITERS: usize = 500;
const GRADIENT_TOL: f64 = 1e-12;

/// Minimizer of a problem and its objective value.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub v: Array2<f64>,
    pub loss: f64,
}

/// Computes the optimum by dense linear algebra: the top right singular
/// vectors for PCA (eigenvectors of `XᵀX`), damped Newton for logistic
/// regression.
pub fn optimum_oracle(spec: &ProblemSpec) -> Result<Optimum> {
    let v = match &spec.objective {
        Objective::Pca { components } => top_eigenvectors(&spec.data, *components),
        Objective::LogReg { labels, lambda } => newton(spec, &labels.to_vec(), *lambda)?,
    };
    let loss = loss(spec, &v)?;
    Ok(Optimum { v, loss })
}

fn norm(a: &Array2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn to_nalgebra(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

fn top_eigenvectors(x: &Array2<f64>, k: usize) -> Array2<f64> {
    let gram = x.t().dot(x);
    let eig = SymmetricEigen::new(to_nalgebra(&gram));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    Array2::from_shape_fn((x.ncols(), k), |(i, j)| eig.eigenvectors[(i, order[j])])
}

fn newton(spec: &ProblemSpec, labels: &[f64], lambda: f64) -> Result<Array2<f64>> {
    let (n, d) = spec.data.dim();
    let nf = n as f64;
    let x = to_nalgebra(&spec.data);
    let mut v = Array2::<f64>::zeros((d, 1));
    let mut f = loss(spec, &v)?;
    for _ in 0..NEWTON_MAX_ITERS {
        let g = full_gradient(spec, &v)?;
        let gnorm = norm(&g);
        if gnorm <= GRADIENT_TOL {
            return Ok(v);
        }
        // Hessian: Xᵀ diag(σ(z)(1−σ(z))/n) X + λI with z = XV.
        let z = spec.data.dot(&v);
        let mut weighted = x.clone();
        for i in 0..n {
            let s = 1.0 / (1.0 + (-labels[i] * z[[i, 0]]).exp());
            let wgt = s * (1.0 - s) / nf;
            weighted.row_mut(i).scale_mut(wgt);
        }
        let mut hess = x.transpose() * weighted;
        for j in 0..d {
            hess[(j, j)] += lambda;
        }
        let rhs = DVector::from_fn(d, |i, _| g[[i, 0]]);
        let step = hess
            .clone()
            .cholesky()
            .map(|c| c.solve(&rhs))
            .or_else(|| hess.lu().solve(&rhs))
            .ok_or_else(|| Error::Oracle("singular Hessian".into()))?;
        // Backtracking keeps the iteration monotone far from the optimum.
        // Near it, loss differences drown in rounding and the gradient norm
        // decides instead.
        let decrease = g.iter().zip(step.iter()).map(|(a, b)| a * b).sum::<f64>();
        let mut t = 1.0;
        loop {
            let cand = Array2::from_shape_fn((d, 1), |(i, _)| v[[i, 0]] - t * step[i]);
            let fc = loss(spec, &cand)?;
            let armijo = fc <= f - 1e-4 * t * decrease;
            let flat = t == 1.0
                && fc <= f + 1e-12 * f.abs()
                && norm(&full_gradient(spec, &cand)?) < gnorm;
            if armijo || flat || t < 1e-10 {
                v = cand;
                f = fc;
                break;
            }
            t *= 0.5;
        }
    }
    let gnorm = norm(&full_gradient(spec, &v)?);
    if gnorm <= GRADIENT_TOL {
        Ok(v)
    } else {
        Err(Error::Oracle(format!(
            "Newton stopped at gradient norm {gnorm:e} after {NEWTON_MAX_ITERS} iterations"
        )))
    }
}
