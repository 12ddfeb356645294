use std::io::Write;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::basis::{basis_terms, eval_all, PolyBasis, TermAlgebra, MAX_DEGREE};
use super::spectrum::GraphSpectrum;
use super::normalized_adjacency;
use crate::error::{Error, Result};

/// Matrix the polynomial is evaluated at.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterArgument {
    /// `Â = I - L̂`; scalar variable `x = 1 - λ`.
    #[default]
    NormalizedAdjacency,
    /// `L̂` itself; scalar variable `x = λ`.
    Laplacian,
}

impl FilterArgument {
    pub fn scalar(self, lambda: f64) -> f64 {
        match self {
            FilterArgument::NormalizedAdjacency => 1.0 - lambda,
            FilterArgument::Laplacian => lambda,
        }
    }

    pub fn matrix(self, laplacian: &Array2<f64>) -> Array2<f64> {
        match self {
            FilterArgument::NormalizedAdjacency => normalized_adjacency(laplacian),
            FilterArgument::Laplacian => laplacian.clone(),
        }
    }
}

/// Truncated polynomial filter `g(λ) = Σ_k Θ[k, d] P_k(x(λ))`, one column of
/// coefficients per feature dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    pub basis: PolyBasis,
    pub degree: usize,
    pub coefficients: Array2<f64>,
    pub argument: FilterArgument,
}

impl FilterBank {
    pub fn new(basis: PolyBasis, coefficients: Array2<f64>) -> Result<Self> {
        let degree = coefficients
            .nrows()
            .checked_sub(1)
            .ok_or_else(|| Error::shape("filter needs at least one coefficient row"))?;
        let bank = Self { basis, degree, coefficients, argument: FilterArgument::default() };
        bank.validate()?;
        Ok(bank)
    }

    /// Filter equal to the identity on every dimension.
    pub fn identity(basis: PolyBasis, degree: usize, dims: usize) -> Result<Self> {
        let c = basis.identity_coefficients(degree);
        let coeffs = Array2::from_shape_fn((degree + 1, dims), |(k, _)| c[k]);
        Self::new(basis, coeffs)
    }

    pub fn with_argument(mut self, argument: FilterArgument) -> Self {
        self.argument = argument;
        self
    }

    pub fn dims(&self) -> usize {
        self.coefficients.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        self.basis.validate()?;
        if self.degree > MAX_DEGREE {
            return Err(Error::param(format!("degree {} exceeds cap {MAX_DEGREE}", self.degree)));
        }
        if self.coefficients.nrows() != self.degree + 1 {
            return Err(Error::shape(format!(
                "coefficients have {} rows, expected {}",
                self.coefficients.nrows(),
                self.degree + 1
            )));
        }
        Ok(())
    }
}

struct Dense<'a>(&'a Array2<f64>);

impl TermAlgebra for Dense<'_> {
    type V = Array2<f64>;
    fn apply(&mut self, v: &Array2<f64>) -> Array2<f64> {
        self.0.dot(v)
    }
    fn combine(&mut self, terms: &[(f64, &Array2<f64>)]) -> Array2<f64> {
        let mut out = terms[0].1 * terms[0].0;
        for (c, v) in &terms[1..] {
            out.scaled_add(*c, v);
        }
        out
    }
}

/// Applies the filter to a node signal `x` (N×D) through the basis recurrence,
/// using matrix-vector products only.
pub fn graph_conv(bank: &FilterBank, laplacian: &Array2<f64>, x: &Array2<f64>) -> Result<Array2<f64>> {
    bank.validate()?;
    let n = laplacian.nrows();
    if laplacian.ncols() != n || x.nrows() != n {
        return Err(Error::shape(format!(
            "laplacian {:?} incompatible with signal {:?}",
            laplacian.dim(),
            x.dim()
        )));
    }
    if x.ncols() != bank.dims() {
        return Err(Error::shape(format!("signal has {} dims, filter has {}", x.ncols(), bank.dims())));
    }
    let m = bank.argument.matrix(laplacian);
    let terms = basis_terms(&mut Dense(&m), &bank.basis, bank.degree, x.clone());
    let mut out = Array2::zeros(x.dim());
    for (k, term) in terms.iter().enumerate() {
        let theta = bank.coefficients.row(k);
        out += &(term * &theta.insert_axis(Axis(0)));
    }
    Ok(out)
}

/// `U g(Λ) Uᵀ x`, computed from an explicit eigendecomposition.
pub fn spectral_oracle_conv(spectrum: &GraphSpectrum, bank: &FilterBank, x: &Array2<f64>) -> Result<Array2<f64>> {
    bank.validate()?;
    if x.nrows() != spectrum.n() || x.ncols() != bank.dims() {
        return Err(Error::shape(format!("signal {:?} incompatible with spectrum/filter", x.dim())));
    }
    let response = filter_response(bank, spectrum.eigenvalues.as_slice().unwrap_or(&spectrum.eigenvalues.to_vec()));
    let u = &spectrum.eigenvectors;
    let coeffs = u.t().dot(x) * &response;
    Ok(u.dot(&coeffs))
}

/// `g(λ)` for every λ, as a (len × D) array.
pub fn filter_response(bank: &FilterBank, lambdas: &[f64]) -> Array2<f64> {
    let mut out = Array2::zeros((lambdas.len(), bank.dims()));
    for (i, &lam) in lambdas.iter().enumerate() {
        let p = eval_all(&bank.basis, bank.degree, bank.argument.scalar(lam));
        for d in 0..bank.dims() {
            out[[i, d]] = p.iter().zip(bank.coefficients.column(d)).map(|(a, b)| a * b).sum();
        }
    }
    out
}

/// Writes `lambda,response_dim_0,…` rows.
pub fn write_response_csv<W: Write>(mut w: W, lambdas: &[f64], response: &Array2<f64>) -> Result<()> {
    let header: Vec<String> = std::iter::once("lambda".to_string())
        .chain((0..response.ncols()).map(|d| format!("response_dim_{d}")))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for (i, lam) in lambdas.iter().enumerate() {
        let row: Vec<String> = std::iter::once(lam.to_string())
            .chain(response.row(i).iter().map(|v| v.to_string()))
            .collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{eigendecompose, normalized_laplacian, Adjacency};
    use ndarray::array;

    #[test]
    fn identity_filter_returns_input() {
        let adj = Adjacency::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let l = normalized_laplacian(&adj);
        let x = array![[1.0, 2.0], [3.0, -1.0], [0.5, 0.0], [-2.0, 4.0]];
        for basis in [
            PolyBasis::Monomial,
            PolyBasis::Bernstein,
            PolyBasis::Chebyshev2,
            PolyBasis::Gegenbauer { alpha: 1.3 },
            PolyBasis::Jacobi { a: 0.2, b: 0.7 },
        ] {
            let bank = FilterBank::identity(basis, 3, 2).unwrap();
            let y = graph_conv(&bank, &l, &x).unwrap();
            assert!((&y - &x).iter().all(|v| v.abs() < 1e-12), "{basis:?}");
        }
    }

    #[test]
    fn first_gegenbauer_term_is_twice_adjacency() {
        let adj = Adjacency::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let l = normalized_laplacian(&adj);
        let a_hat = normalized_adjacency(&l);
        let x = array![[1.0], [-2.0], [0.5]];
        let bank = FilterBank::new(PolyBasis::Gegenbauer { alpha: 1.0 }, array![[0.0], [1.0], [0.0]]).unwrap();
        let y = graph_conv(&bank, &l, &x).unwrap();
        let want = a_hat.dot(&x) * 2.0;
        assert!((&y - &want).iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn oracle_on_eigenvector() {
        let l = array![[1.0, -1.0], [-1.0, 1.0]];
        let spec = eigendecompose(&l).unwrap();
        // g(λ) = λ through the Laplacian-argument monomial of degree one.
        let bank = FilterBank::new(PolyBasis::Monomial, array![[0.0], [1.0]])
            .unwrap()
            .with_argument(FilterArgument::Laplacian);
        let y = spectral_oracle_conv(&spec, &bank, &array![[1.0], [-1.0]]).unwrap();
        assert!((y[[0, 0]] - 2.0).abs() < 1e-12 && (y[[1, 0]] + 2.0).abs() < 1e-12);
        let one = FilterBank::identity(PolyBasis::Chebyshev2, 2, 1).unwrap();
        let y = spectral_oracle_conv(&spec, &one, &array![[0.3], [0.9]]).unwrap();
        assert!((y[[0, 0]] - 0.3).abs() < 1e-12 && (y[[1, 0]] - 0.9).abs() < 1e-12);
    }

    #[test]
    fn responses() {
        let cheb = FilterBank::new(PolyBasis::Chebyshev2, array![[0.0], [1.0]]).unwrap();
        let r = filter_response(&cheb, &[0.0, 1.0, 2.0]);
        assert_eq!(r.column(0).to_vec(), vec![2.0, 0.0, -2.0]);
        let flat = FilterBank::identity(PolyBasis::Gegenbauer { alpha: 0.7 }, 4, 1).unwrap();
        assert!(filter_response(&flat, &[0.0, 0.3, 1.9]).iter().all(|&v| v == 1.0));

        let theta = array![[0.3], [-1.2], [0.8], [0.1], [-0.5]];
        let g = FilterBank::new(PolyBasis::Gegenbauer { alpha: 1.0 }, theta.clone()).unwrap();
        let c = FilterBank::new(PolyBasis::Chebyshev2, theta).unwrap();
        let lams: Vec<f64> = (0..=20).map(|i| i as f64 * 0.1).collect();
        let diff = filter_response(&g, &lams) - filter_response(&c, &lams);
        assert!(diff.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn shape_errors() {
        let l = Array2::<f64>::zeros((3, 3));
        let bank = FilterBank::identity(PolyBasis::Monomial, 2, 2).unwrap();
        assert!(matches!(graph_conv(&bank, &l, &Array2::zeros((3, 1))), Err(Error::Shape(_))));
        assert!(matches!(graph_conv(&bank, &l, &Array2::zeros((2, 2))), Err(Error::Shape(_))));
        let mut bad = bank.clone();
        bad.degree = 5;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn response_csv_header() {
        let mut buf = Vec::new();
        let bank = FilterBank::identity(PolyBasis::Chebyshev2, 1, 2).unwrap();
        write_response_csv(&mut buf, &[0.0, 1.0], &filter_response(&bank, &[0.0, 1.0])).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("lambda,response_dim_0,response_dim_1\n0,1,1\n"));
    }
}
