//! Gauss-Jacobi quadrature and basis orthogonality checks.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use super::basis::{basis_eval, PolyBasis};
use crate::error::{Error, Result};

/// Off-diagonal Gram residual below which a basis counts as orthogonal.
pub const ORTHOGONALITY_TOL: f64 = 1e-6;

/// Nodes and weights of the `n`-point Gauss rule for `(1-x)^a (1+x)^b` on
/// `[-1, 1]`, exact for polynomials up to degree `2n - 1`. Weights are
/// normalized to sum to one.
pub fn gauss_jacobi(n: usize, a: f64, b: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::param("quadrature needs at least one node"));
    }
    if !(a > -1.0 && b > -1.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::param(format!("Jacobi weight parameters must exceed -1, got ({a}, {b})")));
    }
    let s = a + b;
    let diag = |k: usize| {
        let k = k as f64;
        if k == 0.0 {
            (b - a) / (s + 2.0)
        } else {
            (b * b - a * a) / ((2.0 * k + s) * (2.0 * k + s + 2.0))
        }
    };
    // Monic recurrence coefficient; the k = 1 case is written with the
    // removable (1 + a + b) factor cancelled.
    let beta = |k: usize| {
        let kf = k as f64;
        if k == 1 {
            4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + s).powi(2) * (3.0 + s))
        } else {
            let m = 2.0 * kf + s;
            4.0 * kf * (kf + a) * (kf + b) * (kf + s) / (m * m * (m + 1.0) * (m - 1.0))
        }
    };
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        j[(k, k)] = diag(k);
        if k + 1 < n {
            let off = beta(k + 1).sqrt();
            j[(k, k + 1)] = off;
            j[(k + 1, k)] = off;
        }
    }
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> =
        (0..n).map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2))).collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    Ok((pairs.iter().map(|p| p.0).collect(), pairs.iter().map(|p| p.1 / total).collect()))
}

/// Jacobi parameters of the weight a basis is orthogonal under, if any.
pub fn natural_weight(basis: &PolyBasis) -> Option<(f64, f64)> {
    match *basis {
        PolyBasis::Gegenbauer { alpha } => Some((alpha - 0.5, alpha - 0.5)),
        PolyBasis::Chebyshev2 => Some((0.5, 0.5)),
        PolyBasis::Jacobi { a, b } => Some((a, b)),
        PolyBasis::Monomial | PolyBasis::Bernstein => None,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OrthogonalityReport {
    pub basis: String,
    pub degree: usize,
    /// Jacobi parameters `(a, b)` of the weight used.
    pub weight: (f64, f64),
    /// Largest `|G_ij| / sqrt(G_ii G_jj)` over `i ≠ j` of the weighted Gram matrix.
    pub residual: f64,
    pub orthogonal: bool,
}

/// Weighted Gram matrix of `P_0..=P_K` computed by exact quadrature, reduced
/// to its largest normalized off-diagonal entry. Bases without a natural
/// weight are checked against the uniform weight.
pub fn orthogonality_check(basis: &PolyBasis, degree: usize) -> Result<OrthogonalityReport> {
    let weight = natural_weight(basis).unwrap_or((0.0, 0.0));
    let (nodes, weights) = gauss_jacobi(degree + 2, weight.0, weight.1)?;
    let values = nodes
        .iter()
        .map(|&x| (0..=degree).map(|k| basis_eval(basis, k, degree, x)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let gram = |i: usize, j: usize| -> f64 { values.iter().zip(&weights).map(|(v, w)| w * v[i] * v[j]).sum() };
    let mut residual = 0.0f64;
    for i in 0..=degree {
        for j in 0..i {
            residual = residual.max(gram(i, j).abs() / (gram(i, i) * gram(j, j)).sqrt());
        }
    }
    Ok(OrthogonalityReport {
        basis: basis.name().to_string(),
        degree,
        weight,
        residual,
        orthogonal: residual < ORTHOGONALITY_TOL,
    })
}
