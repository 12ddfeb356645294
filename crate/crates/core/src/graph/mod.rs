//! Graph construction, normalized Laplacian, eigendecomposition, polynomial
//! bases and recurrence-based spectral filtering.

mod basis;
mod density;
mod filter;
mod quadrature;
mod spectrum;

pub use basis::{basis_eval, basis_terms, PolyBasis, TermAlgebra, MAX_DEGREE};
pub use density::{fit_weight_alpha, fit_weight_alpha_on_grid, gegenbauer_weight, weight_fit_residual, SignalDensity, signal_density, DEFAULT_ALPHA_GRID};
pub use filter::{
    filter_response, graph_conv, spectral_oracle_conv, write_response_csv, FilterArgument, FilterBank,
};
pub use quadrature::{gauss_jacobi, natural_weight, orthogonality_check, OrthogonalityReport, ORTHOGONALITY_TOL};
pub use spectrum::{eigendecompose, GraphSpectrum, EIGEN_TOL};

use ndarray::Array2;

use crate::error::{Error, Result};

/// Symmetric tolerance used to validate adjacency input.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Dense, symmetric, nonnegative weighted adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct Adjacency {
    weights: Array2<f64>,
}

impl Adjacency {
    /// Validates and wraps a weight matrix. Self-loops are rejected.
    pub fn new(weights: Array2<f64>) -> Result<Self> {
        Self::with_self_loops(weights, false)
    }

    pub fn with_self_loops(weights: Array2<f64>, allow_self_loops: bool) -> Result<Self> {
        let (r, c) = weights.dim();
        if r != c {
            return Err(Error::shape(format!("adjacency must be square, got {r}x{c}")));
        }
        for i in 0..r {
            for j in 0..c {
                let w = weights[[i, j]];
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::param(format!("adjacency entry ({i},{j}) = {w} is not a finite nonnegative weight")));
                }
                if (w - weights[[j, i]]).abs() > SYMMETRY_TOL {
                    return Err(Error::shape(format!("adjacency is not symmetric at ({i},{j})")));
                }
            }
            if !allow_self_loops && weights[[i, i]] != 0.0 {
                return Err(Error::param(format!("self-loop at node {i} while self-loops are disabled")));
            }
        }
        Ok(Self { weights })
    }

    /// Unweighted adjacency from an undirected edge list.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut w = Array2::zeros((n, n));
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::param(format!("edge ({u},{v}) out of range for {n} nodes")));
            }
            if u == v {
                return Err(Error::param(format!("self-loop edge at node {u}")));
            }
            w[[u, v]] = 1.0;
            w[[v, u]] = 1.0;
        }
        Ok(Self { weights: w })
    }

    pub fn n(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn into_weights(self) -> Array2<f64> {
        self.weights
    }
}

/// `D^{-1/2} (D - A) D^{-1/2}`. Rows and columns of zero-degree nodes are zero.
pub fn normalized_laplacian(adj: &Adjacency) -> Array2<f64> {
    let a = adj.weights();
    let n = a.nrows();
    let inv_sqrt: Vec<f64> = a
        .rows()
        .into_iter()
        .map(|row| {
            let d: f64 = row.sum();
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let mut l = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let deg_term = if i == j && inv_sqrt[i] > 0.0 { 1.0 } else { 0.0 };
            l[[i, j]] = deg_term - inv_sqrt[i] * a[[i, j]] * inv_sqrt[j];
        }
    }
    // exact symmetry, independent of summation order
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (l[[i, j]] + l[[j, i]]);
            l[[i, j]] = m;
            l[[j, i]] = m;
        }
    }
    l
}

/// `I - L`, the normalized adjacency used as the argument of Gegenbauer-type filters.
pub fn normalized_adjacency(laplacian: &Array2<f64>) -> Array2<f64> {
    Array2::eye(laplacian.nrows()) - laplacian
}
