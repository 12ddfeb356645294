use ndarray::{Array2, Array3, Axis};

use crate::error::{Error, Result};
use crate::graph::Adjacency;

/// `|ρ(X_i, X_j)|` over each variable's flattened (time × dims) series, with a
/// zero diagonal. A constant series correlates 0 with everything.
pub fn pearson_adjacency(x: &Array3<f64>) -> Result<Adjacency> {
    let (n, t, d) = x.dim();
    if t < 2 {
        return Err(Error::shape(format!("correlation needs at least 2 time steps, got {t}")));
    }
    let len = (t * d) as f64;
    let centered: Vec<Vec<f64>> = x
        .axis_iter(Axis(0))
        .map(|s| {
            let flat: Vec<f64> = s.iter().copied().collect();
            let mean = flat.iter().sum::<f64>() / len;
            flat.into_iter().map(|v| v - mean).collect()
        })
        .collect();
    let norms: Vec<f64> = centered.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    let mut a = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let denom = norms[i] * norms[j];
            if denom <= f64::EPSILON * len {
                continue;
            }
            let dot: f64 = centered[i].iter().zip(&centered[j]).map(|(p, q)| p * q).sum();
            let r = (dot / denom).abs().min(1.0);
            a[[i, j]] = r;
            a[[j, i]] = r;
        }
    }
    Adjacency::new(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn identical_and_negated_series_have_unit_weight() {
        let base: Vec<f64> = (0..20).map(|t| (t as f64 * 0.3).sin() + 0.1 * t as f64).collect();
        let x = Array3::from_shape_fn((3, 20, 1), |(i, t, _)| match i {
            0 => base[t],
            1 => base[t],
            _ => -2.0 * base[t] + 5.0,
        });
        let a = pearson_adjacency(&x).unwrap();
        let w = a.weights();
        assert!((w[[0, 1]] - 1.0).abs() < 1e-12);
        assert!((w[[0, 2]] - 1.0).abs() < 1e-12);
        assert_eq!(w[[1, 1]], 0.0);
    }

    #[test]
    fn independent_noise_is_nearly_uncorrelated() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let x = Array3::from_shape_fn((2, 2000, 1), |_| StandardNormal.sample(&mut rng));
        let a = pearson_adjacency(&x).unwrap();
        assert!(a.weights()[[0, 1]] < 0.1);
    }

    #[test]
    fn constant_series_is_isolated() {
        let x = Array3::from_shape_fn((2, 5, 2), |(i, t, k)| if i == 0 { 3.0 } else { (t + k) as f64 });
        let a = pearson_adjacency(&x).unwrap();
        assert_eq!(a.weights()[[0, 1]], 0.0);
        assert!(pearson_adjacency(&Array3::zeros((2, 1, 1))).is_err());
    }
}
