use ndarray::{Array2, Axis};

use crate::error::{Error, Result};

/// Relative norm below which a column is treated as linearly dependent.
const DEPENDENCE_TOL: f64 = 1e-12;

/// Orthonormalizes the columns of `v`, left to right, keeping their span.
///
/// Classical Gram-Schmidt with one full reorthogonalization pass per column,
/// which keeps `QᵀQ = I` to machine precision.
pub fn gram_schmidt(v: &Array2<f64>) -> Result<Array2<f64>> {
    let mut q = v.clone();
    for j in 0..q.ncols() {
        let original = q.column(j).dot(&q.column(j)).sqrt();
        if !original.is_finite() {
            return Err(Error::RankDeficient { column: j });
        }
        for _pass in 0..2 {
            for i in 0..j {
                let proj = q.column(i).dot(&q.column(j));
                let qi = q.column(i).to_owned();
                q.column_mut(j).scaled_add(-proj, &qi);
            }
        }
        let norm = q.column(j).dot(&q.column(j)).sqrt();
        if !(norm > DEPENDENCE_TOL * original) || norm == 0.0 {
            return Err(Error::RankDeficient { column: j });
        }
        q.column_mut(j).mapv_inplace(|x| x / norm);
    }
    Ok(q)
}

/// Largest absolute entry of `QᵀQ − I`.
pub fn orthonormality_error(q: &Array2<f64>) -> f64 {
    let g = q.t().dot(q);
    g.indexed_iter()
        .map(|((i, j), &x)| (x - if i == j { 1.0 } else { 0.0 }).abs())
        .fold(0.0, f64::max)
}

/// Component of each column of `v` outside the span of orthonormal `q`,
/// measured as the largest column norm of `(I − QQᵀ)V`.
pub fn span_residual(q: &Array2<f64>, v: &Array2<f64>) -> f64 {
    let resid = v - &q.dot(&q.t().dot(v));
    resid
        .axis_iter(Axis(1))
        .map(|c| c.dot(&c).sqrt())
        .fold(0.0, f64::max)
}
