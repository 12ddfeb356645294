use nalgebra::DMatrix;
use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Two eigenvalues closer than this are treated as repeated.
pub const EIGEN_TOL: f64 = 1e-8;

const ASYMMETRY_TOL: f64 = 1e-10;
const SIGN_EPS: f64 = 1e-12;
const POLISH_SWEEPS: usize = 8;

/// Normalized Laplacian together with its eigenpairs, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct GraphSpectrum {
    pub laplacian: Array2<f64>,
    pub eigenvalues: Array1<f64>,
    /// Column `i` is the unit eigenvector for `eigenvalues[i]`.
    pub eigenvectors: Array2<f64>,
}

impl GraphSpectrum {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Whether any pair of eigenvalues lies within `EIGEN_TOL`.
    pub fn has_repeated_eigenvalues(&self) -> bool {
        self.eigenvalues
            .windows(2)
            .into_iter()
            .any(|w| (w[1] - w[0]).abs() < EIGEN_TOL)
    }

    /// Graph Fourier transform `U^T x`.
    pub fn transform(&self, x: &Array2<f64>) -> Array2<f64> {
        self.eigenvectors.t().dot(x)
    }
}

/// Symmetric eigendecomposition with ascending eigenvalues and a deterministic
/// sign convention: the first nonzero entry of every eigenvector is positive.
pub fn eigendecompose(laplacian: &Array2<f64>) -> Result<GraphSpectrum> {
    let (r, c) = laplacian.dim();
    if r != c {
        return Err(Error::shape(format!("matrix must be square, got {r}x{c}")));
    }
    for i in 0..r {
        for j in (i + 1)..r {
            if (laplacian[[i, j]] - laplacian[[j, i]]).abs() > ASYMMETRY_TOL {
                return Err(Error::shape(format!("matrix is not symmetric at ({i},{j})")));
            }
        }
    }
    if r == 0 {
        return Ok(GraphSpectrum {
            laplacian: laplacian.clone(),
            eigenvalues: Array1::zeros(0),
            eigenvectors: Array2::zeros((0, 0)),
        });
    }
    let m = DMatrix::from_fn(r, r, |i, j| laplacian[[i, j]]);
    let eig = m
        .clone()
        .try_symmetric_eigen(f64::EPSILON, 10_000)
        .ok_or_else(|| Error::NonConvergence(format!("symmetric eigensolver failed on {r}x{r} input")))?;

    let (evals, evecs) = jacobi_polish(&m, eig.eigenvectors);

    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| evals[a].total_cmp(&evals[b]).then(a.cmp(&b)));

    let mut values = Array1::zeros(r);
    let mut vectors = Array2::zeros((r, r));
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = evals[src];
        let col = evecs.column(src);
        let sign = col
            .iter()
            .find(|v| v.abs() > SIGN_EPS)
            .map_or(1.0, |v| v.signum());
        for i in 0..r {
            vectors[[i, dst]] = sign * col[i];
        }
    }
    Ok(GraphSpectrum {
        laplacian: laplacian.clone(),
        eigenvalues: values,
        eigenvectors: vectors,
    })
}

/// Cyclic Jacobi sweeps on `Uᵀ M U`, which is already close to diagonal, so
/// the eigenpairs reach full working precision in a sweep or two.
fn jacobi_polish(m: &DMatrix<f64>, mut u: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let mut b = u.transpose() * m * &u;
    let scale = m.norm().max(f64::MIN_POSITIVE);
    for _ in 0..POLISH_SWEEPS {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| b[(i, j)].powi(2)).sum();
        if off.sqrt() <= f64::EPSILON * scale * 1e-2 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let bpq = b[(p, q)];
                if bpq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (b[(q, q)] - b[(p, p)]) / (2.0 * bpq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (bkp, bkq) = (b[(k, p)], b[(k, q)]);
                    b[(k, p)] = c * bkp - s * bkq;
                    b[(k, q)] = s * bkp + c * bkq;
                }
                for k in 0..n {
                    let (bpk, bqk) = (b[(p, k)], b[(q, k)]);
                    b[(p, k)] = c * bpk - s * bqk;
                    b[(q, k)] = s * bpk + c * bqk;
                }
                for k in 0..n {
                    let (ukp, ukq) = (u[(k, p)], u[(k, q)]);
                    u[(k, p)] = c * ukp - s * ukq;
                    u[(k, q)] = s * ukp + c * ukq;
                }
            }
        }
    }
    ((0..n).map(|i| b[(i, i)]).collect(), u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn frob(a: &Array2<f64>) -> f64 {
        a.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    #[test]
    fn two_by_two_closed_form() {
        let s = eigendecompose(&array![[1.0, -1.0], [-1.0, 1.0]]).unwrap();
        assert!(s.eigenvalues[0].abs() < 1e-14);
        assert!((s.eigenvalues[1] - 2.0).abs() < 1e-14);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let want = array![[h, h], [h, -h]];
        assert!(frob(&(&s.eigenvectors - &want)) < 1e-12);
    }

    #[test]
    fn zero_matrix_gives_identity() {
        let s = eigendecompose(&Array2::zeros((3, 3))).unwrap();
        assert_eq!(s.eigenvalues, array![0.0, 0.0, 0.0]);
        assert_eq!(s.eigenvectors, Array2::<f64>::eye(3));
    }

    #[test]
    fn reconstructs_random_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 8;
        let mut m = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in i..n {
                let v: f64 = rng.gen_range(-1.0..1.0);
                m[[i, j]] = v;
                m[[j, i]] = v;
            }
        }
        let s = eigendecompose(&m).unwrap();
        let lam = Array2::from_diag(&s.eigenvalues);
        let rec = s.eigenvectors.dot(&lam).dot(&s.eigenvectors.t());
        assert!(frob(&(&rec - &m)) / frob(&m) < 1e-8);
        let gram = s.eigenvectors.t().dot(&s.eigenvectors);
        assert!(frob(&(&gram - &Array2::<f64>::eye(n))) < 1e-8);
        assert!(s.eigenvalues.windows(2).into_iter().all(|w| w[0] <= w[1]));
        for j in 0..n {
            let first = s.eigenvectors.column(j).iter().copied().find(|v| v.abs() > 1e-12).unwrap();
            assert!(first > 0.0);
        }
    }

    #[test]
    fn rejects_asymmetric() {
        assert!(eigendecompose(&array![[0.0, 1.0], [0.0, 0.0]]).is_err());
    }
}
