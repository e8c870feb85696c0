//! Synthetic desk-scale datasets.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{domain, Result};

/// Logistic-regression data: normalized features with an intercept column,
/// ±1 labels, and the coefficient vector the labels were drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRegData {
    /// `n × (d + 1)`; the last column is the intercept.
    pub features: Array2<f64>,
    pub labels: Array1<f64>,
    /// `d` planted coefficients in the raw feature space.
    pub planted: Array1<f64>,
}

/// Scales every column to zero mean and unit variance. Constant columns are
/// only centered.
pub fn normalize_columns(x: &mut Array2<f64>) {
    for mut col in x.axis_iter_mut(Axis(1)) {
        let n = col.len() as f64;
        let mean = col.sum() / n;
        col.mapv_inplace(|v| v - mean);
        let sd = (col.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
        if sd > 0.0 {
            col.mapv_inplace(|v| v / sd);
        }
    }
}

fn append_intercept(x: &Array2<f64>) -> Array2<f64> {
    let (n, d) = x.dim();
    let mut out = Array2::ones((n, d + 1));
    out.slice_mut(ndarray::s![.., ..d]).assign(x);
    out
}

fn permute_rows(x: &Array2<f64>, order: &[usize]) -> Array2<f64> {
    x.select(Axis(0), order)
}

/// Gaussian features, labels `sign(xᵀβ)` with each label flipped with
/// probability `label_noise`, rows shuffled, features normalized and an
/// intercept appended.
pub fn synthetic_logreg(n: usize, d: usize, label_noise: f64, seed: u64) -> Result<LogRegData> {
    if n < 2 || d == 0 {
        return domain(format!("need n ≥ 2 and d ≥ 1, got n={n}, d={d}"));
    }
    if !(0.0..0.5).contains(&label_noise) {
        return domain(format!("label noise must lie in [0, 0.5), got {label_noise}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = Array2::from_shape_fn((n, d), |_| StandardNormal.sample(&mut rng));
    let planted = Array1::from_shape_fn(d, |_| StandardNormal.sample(&mut rng));
    let labels = raw.dot(&planted).mapv(|z| if z >= 0.0 { 1.0 } else { -1.0 });
    let labels = labels.mapv(|b| if rng.random::<f64>() < label_noise { -b } else { b });
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut features = permute_rows(&raw, &order);
    let labels = labels.select(Axis(0), &order);
    normalize_columns(&mut features);
    Ok(LogRegData {
        features: append_intercept(&features),
        labels,
        planted,
    })
}

/// Gaussian data whose `j`-th column has standard deviation `decayʲ`, giving
/// a well-separated principal subspace.
pub fn synthetic_pca(n: usize, d: usize, decay: f64, seed: u64) -> Result<Array2<f64>> {
    if n == 0 || d == 0 {
        return domain(format!("need n ≥ 1 and d ≥ 1, got n={n}, d={d}"));
    }
    if !(decay > 0.0 && decay <= 1.0) {
        return domain(format!("spectrum decay must lie in (0, 1], got {decay}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::from_shape_fn((n, d), |(_, j)| {
        let z: f64 = StandardNormal.sample(&mut rng);
        z * decay.powi(j as i32)
    });
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    Ok(permute_rows(&x, &order))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::methods::{optimum_oracle, ProblemSpec};

    #[test]
    fn features_are_normalized() {
        let data = synthetic_logreg(500, 6, 0.1, 3).unwrap();
        let x = &data.features;
        assert_eq!(x.dim(), (500, 7));
        for j in 0..6 {
            let col = x.column(j);
            let mean = col.sum() / 500.0;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 500.0;
            assert!(mean.abs() <= 1e-10, "column {j} mean {mean}");
            assert!((var - 1.0).abs() <= 1e-10, "column {j} variance {var}");
        }
        assert!(x.column(6).iter().all(|&v| v == 1.0));
        assert!(data.labels.iter().all(|&b| b == 1.0 || b == -1.0));
    }

    #[test]
    fn deterministic_in_seed() {
        assert_eq!(synthetic_logreg(50, 3, 0.1, 9).unwrap(), synthetic_logreg(50, 3, 0.1, 9).unwrap());
        assert_ne!(synthetic_logreg(50, 3, 0.1, 9).unwrap(), synthetic_logreg(50, 3, 0.1, 10).unwrap());
        assert_eq!(synthetic_pca(20, 4, 0.8, 1).unwrap(), synthetic_pca(20, 4, 0.8, 1).unwrap());
    }

    #[test]
    fn planted_model_is_recovered() {
        let data = synthetic_logreg(2000, 8, 0.01, 4).unwrap();
        let spec = ProblemSpec::logreg(data.features, data.labels, 1.0 / 2000.0, 0.25).unwrap();
        let opt = optimum_oracle(&spec).unwrap();
        let v = opt.v.column(0);
        let v = v.slice(ndarray::s![..8]);
        let cos = v.dot(&data.planted) / (v.dot(&v).sqrt() * data.planted.dot(&data.planted).sqrt());
        assert!(cos > 0.9, "cosine {cos}");
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(synthetic_logreg(1, 3, 0.1, 0).is_err());
        assert!(synthetic_logreg(10, 3, 0.5, 0).is_err());
        assert!(synthetic_pca(10, 3, 0.0, 0).is_err());
    }
}
