//! Polynomial bases on `[-1, 1]` and their evaluation by recurrence.
//!
//! Every basis is expressed in the variable `x`, which is `1 - λ` when the
//! filter acts on the normalized adjacency. Evaluation is written once against
//! [`TermAlgebra`], so the same recurrence drives scalar evaluation, dense
//! filtering on node signals and the differentiable tape.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest polynomial degree accepted anywhere in the crate.
pub const MAX_DEGREE: usize = 64;

const DOMAIN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PolyBasis {
    /// `x^k`, i.e. `(1 - λ)^k`.
    Monomial,
    /// `C(K,k) ((1+x)/2)^{K-k} ((1-x)/2)^k`, i.e. `C(K,k) (1-λ/2)^{K-k} (λ/2)^k`.
    Bernstein,
    /// Chebyshev polynomials of the second kind.
    Chebyshev2,
    Gegenbauer { alpha: f64 },
    Jacobi { a: f64, b: f64 },
}

impl PolyBasis {
    /// Jacobi basis with both parameters at `alpha - 1/2`, the Gegenbauer specialization.
    pub fn jacobi_from_alpha(alpha: f64) -> Self {
        PolyBasis::Jacobi { a: alpha - 0.5, b: alpha - 0.5 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PolyBasis::Monomial => "monomial",
            PolyBasis::Bernstein => "bernstein",
            PolyBasis::Chebyshev2 => "chebyshev2",
            PolyBasis::Gegenbauer { .. } => "gegenbauer",
            PolyBasis::Jacobi { .. } => "jacobi",
        }
    }

    pub fn is_orthogonal(&self) -> bool {
        !matches!(self, PolyBasis::Monomial | PolyBasis::Bernstein)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            PolyBasis::Gegenbauer { alpha } if !(alpha > -0.5 && alpha.is_finite()) => {
                Err(Error::param(format!("Gegenbauer alpha must exceed -1/2, got {alpha}")))
            }
            PolyBasis::Jacobi { a, b } if !(a > -1.0 && b > -1.0 && a.is_finite() && b.is_finite()) => {
                Err(Error::param(format!("Jacobi parameters must exceed -1, got ({a}, {b})")))
            }
            _ => Ok(()),
        }
    }

    /// Coefficients that make the filter the identity map (`g ≡ 1`).
    pub fn identity_coefficients(&self, degree: usize) -> Vec<f64> {
        let mut c = vec![0.0; degree + 1];
        match self {
            // Bernstein polynomials form a partition of unity.
            PolyBasis::Bernstein => c.iter_mut().for_each(|v| *v = 1.0),
            _ => c[0] = 1.0,
        }
        c
    }
}

/// Vector space in which the recurrence is carried out, with `M` the filter argument.
pub trait TermAlgebra {
    type V: Clone;
    /// `M v`.
    fn apply(&mut self, v: &Self::V) -> Self::V;
    /// `Σ c_i v_i` over a nonempty list.
    fn combine(&mut self, terms: &[(f64, &Self::V)]) -> Self::V;
}

/// `[P_0(M) v, …, P_K(M) v]` for the given basis.
pub fn basis_terms<A: TermAlgebra>(alg: &mut A, basis: &PolyBasis, degree: usize, v: A::V) -> Vec<A::V> {
    let mut out = Vec::with_capacity(degree + 1);
    match *basis {
        PolyBasis::Bernstein => {
            // u_j = ((I - M)/2)^j v, then P_k = C(K,k) ((I + M)/2)^{K-k} u_k.
            let mut lows = Vec::with_capacity(degree + 1);
            lows.push(v);
            for j in 1..=degree {
                let prev = &lows[j - 1];
                let mp = alg.apply(prev);
                let next = alg.combine(&[(0.5, prev), (-0.5, &mp)]);
                lows.push(next);
            }
            for (k, low) in lows.into_iter().enumerate() {
                let mut w = low;
                for _ in 0..(degree - k) {
                    let mw = alg.apply(&w);
                    w = alg.combine(&[(0.5, &w), (0.5, &mw)]);
                }
                let c = binomial(degree, k);
                out.push(if c == 1.0 { w } else { alg.combine(&[(c, &w)]) });
            }
        }
        _ => {
            out.push(v);
            for k in 1..=degree {
                let (a, b, c) = three_term(basis, k);
                let prev = &out[k - 1];
                let mp = alg.apply(prev);
                let next = if k == 1 {
                    if b == 0.0 {
                        alg.combine(&[(a, &mp)])
                    } else {
                        alg.combine(&[(a, &mp), (b, prev)])
                    }
                } else {
                    let prev2 = &out[k - 2];
                    let mut terms: Vec<(f64, &A::V)> = vec![(a, &mp)];
                    if b != 0.0 {
                        terms.push((b, prev));
                    }
                    if c != 0.0 {
                        terms.push((c, prev2));
                    }
                    alg.combine(&terms)
                };
                out.push(next);
            }
        }
    }
    out
}

/// Coefficients `(a, b, c)` with `P_k = a·x·P_{k-1} + b·P_{k-1} + c·P_{k-2}`.
fn three_term(basis: &PolyBasis, k: usize) -> (f64, f64, f64) {
    let kf = k as f64;
    match *basis {
        PolyBasis::Monomial => (1.0, 0.0, 0.0),
        PolyBasis::Chebyshev2 => (2.0, 0.0, -1.0),
        PolyBasis::Gegenbauer { alpha } => {
            if k == 1 {
                (2.0 * alpha, 0.0, 0.0)
            } else {
                (2.0 * (kf + alpha - 1.0) / kf, 0.0, -(kf + 2.0 * alpha - 2.0) / kf)
            }
        }
        PolyBasis::Jacobi { a, b } => {
            if k == 1 {
                (0.5 * (a + b + 2.0), 0.5 * (a - b), 0.0)
            } else {
                let s = 2.0 * kf + a + b;
                let denom = 2.0 * kf * (kf + a + b) * (s - 2.0);
                (
                    (s - 1.0) * s * (s - 2.0) / denom,
                    (s - 1.0) * (a * a - b * b) / denom,
                    -2.0 * (kf + a - 1.0) * (kf + b - 1.0) * s / denom,
                )
            }
        }
        PolyBasis::Bernstein => unreachable!("Bernstein has no three-term recurrence"),
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

struct Scalar(f64);

impl TermAlgebra for Scalar {
    type V = f64;
    fn apply(&mut self, v: &f64) -> f64 {
        self.0 * v
    }
    fn combine(&mut self, terms: &[(f64, &f64)]) -> f64 {
        terms.iter().map(|(c, v)| c * **v).sum()
    }
}

/// `P_k(x)`. `degree` is the expansion degree `K`, which only Bernstein depends on.
pub fn basis_eval(basis: &PolyBasis, k: usize, degree: usize, x: f64) -> Result<f64> {
    basis.validate()?;
    if k > MAX_DEGREE || degree > MAX_DEGREE {
        return Err(Error::param(format!("degree exceeds cap {MAX_DEGREE}")));
    }
    if matches!(basis, PolyBasis::Bernstein) && k > degree {
        return Err(Error::param(format!("Bernstein index {k} exceeds degree {degree}")));
    }
    if !(x >= -1.0 - DOMAIN_TOL && x <= 1.0 + DOMAIN_TOL) {
        return Err(Error::param(format!("x = {x} outside [-1, 1]")));
    }
    let top = if matches!(basis, PolyBasis::Bernstein) { degree } else { k };
    let terms = basis_terms(&mut Scalar(x), basis, top, 1.0);
    Ok(terms[k])
}

/// All `P_0..=P_K` at `x` without domain checks; used by filter responses.
pub(crate) fn eval_all(basis: &PolyBasis, degree: usize, x: f64) -> Vec<f64> {
    basis_terms(&mut Scalar(x), basis, degree, 1.0)
}
