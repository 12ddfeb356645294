//! Empirical check of the column-sampling error bound for reduced-order
//! spectral filtering.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;
use rand::seq::index::sample;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct ColumnSamplingReport {
    /// `‖AW − P_{A'}(A)W‖_F` for each trial.
    pub lhs: Vec<f64>,
    /// `(1 + ε)‖W‖_F‖A − A_k‖_F`.
    pub rhs: f64,
    pub epsilon: f64,
    pub violation_rate: f64,
}

impl ColumnSamplingReport {
    pub fn mean_lhs(&self) -> f64 {
        self.lhs.iter().sum::<f64>() / self.lhs.len().max(1) as f64
    }

    pub fn max_lhs(&self) -> f64 {
        self.lhs.iter().copied().fold(0.0, f64::max)
    }
}

fn to_na(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

/// `A' (A')^† A` with `A'` the given columns of `A`, computed as the
/// orthogonal projection onto the range of `A'` (eigenvectors of `A' A'ᵀ`
/// with numerically nonzero eigenvalues).
pub fn column_projection(a: &Array2<f64>, columns: &[usize]) -> Array2<f64> {
    let am = to_na(a);
    let sub = DMatrix::from_fn(a.nrows(), columns.len(), |i, j| a[[i, columns[j]]]);
    let eig = SymmetricEigen::new(&sub * sub.transpose());
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let tol = top * 1e-12 * a.nrows() as f64;
    let keep: Vec<usize> = (0..a.nrows()).filter(|&i| eig.eigenvalues[i] > tol).collect();
    let basis = DMatrix::from_fn(a.nrows(), keep.len(), |i, j| eig.eigenvectors[(i, keep[j])]);
    let p = &basis * (basis.transpose() * &am);
    Array2::from_shape_fn(a.dim(), |(i, j)| p[(i, j)])
}

/// `‖A − A_k‖_F` from the singular values beyond the `k` largest.
pub fn rank_k_residual(a: &Array2<f64>, k: usize) -> f64 {
    let sv = to_na(a).singular_values();
    let mut s: Vec<f64> = sv.iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s.iter().skip(k).map(|v| v * v).sum::<f64>().sqrt()
}

/// Runs `trials` random draws of `S` columns and reports how often
/// `‖AW − P_{A'}(A)W‖_F ≤ (1+ε)‖W‖_F‖A − A_k‖_F` fails, with `ε = √(k²/S)`.
pub fn column_sampling_check<R: Rng>(
    a: &Array2<f64>,
    w: &Array2<f64>,
    k: usize,
    s: usize,
    trials: usize,
    rng: &mut R,
) -> Result<ColumnSamplingReport> {
    let (n, t) = a.dim();
    if w.nrows() != t {
        return Err(Error::shape(format!("W has {} rows, A has {t} columns", w.nrows())));
    }
    if s == 0 || s > t {
        return Err(Error::param(format!("sample size {s} must be in 1..={t}")));
    }
    if k > n.min(t) {
        return Err(Error::param(format!("rank {k} exceeds min({n}, {t})")));
    }
    if trials == 0 {
        return Err(Error::param("at least one trial is required"));
    }
    let epsilon = ((k * k) as f64 / s as f64).sqrt();
    let w_norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    let rhs = (1.0 + epsilon) * w_norm * rank_k_residual(a, k);
    let aw = a.dot(w);
    let slack = 1e-10 * (1.0 + a.iter().map(|v| v * v).sum::<f64>().sqrt() * w_norm);

    let mut lhs = Vec::with_capacity(trials);
    let mut violations = 0usize;
    for _ in 0..trials {
        let mut cols = sample(rng, t, s).into_vec();
        cols.sort_unstable();
        let pw = column_projection(a, &cols).dot(w);
        let err = (&aw - &pw).iter().map(|v| v * v).sum::<f64>().sqrt();
        if err > rhs + slack {
            violations += 1;
        }
        lhs.push(err);
    }
    Ok(ColumnSamplingReport { lhs, rhs, epsilon, violation_rate: violations as f64 / trials as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gaussian(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
        let normal = rand_distr::StandardNormal;
        Array2::from_shape_fn((n, m), |_| rng.sample::<f64, _>(normal))
    }

    #[test]
    fn exact_rank_projection_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = gaussian(10, 3, &mut rng).dot(&gaussian(3, 16, &mut rng));
        let w = gaussian(16, 5, &mut rng);
        let rep = column_sampling_check(&a, &w, 3, 8, 20, &mut rng).unwrap();
        assert!(rep.max_lhs() < 1e-8);
        assert_eq!(rep.violation_rate, 0.0);
    }

    #[test]
    fn zero_w_gives_zero_sides() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = gaussian(6, 12, &mut rng);
        let rep = column_sampling_check(&a, &Array2::zeros((12, 4)), 2, 6, 5, &mut rng).unwrap();
        assert_eq!(rep.rhs, 0.0);
        assert!(rep.max_lhs() == 0.0);
    }

    #[test]
    fn rank_deficient_sample_falls_back() {
        let mut a = Array2::<f64>::zeros((4, 6));
        a[[0, 5]] = 1.0;
        let p = column_projection(&a, &[0, 1]);
        assert!(p.iter().all(|v| v.is_finite() && v.abs() < 1e-12));
    }

    #[test]
    fn argument_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = gaussian(4, 6, &mut rng);
        assert!(column_sampling_check(&a, &Array2::zeros((5, 1)), 1, 2, 1, &mut rng).is_err());
        assert!(column_sampling_check(&a, &Array2::zeros((6, 1)), 1, 7, 1, &mut rng).is_err());
        assert!(column_sampling_check(&a, &Array2::zeros((6, 1)), 5, 2, 1, &mut rng).is_err());
    }
}
