use ndarray::{Array3, Axis};

use crate::error::{Error, Result};

/// Causal moving-average trend and the seasonal remainder.
///
/// `trend(t)` is the mean of `x(t-w+1..=t)` for `t ≥ w-1` and zero before
/// that; `seasonal = z - trend`.
pub fn decompose(z: &Array3<f64>, window: usize) -> Result<(Array3<f64>, Array3<f64>)> {
    let t = z.len_of(Axis(1));
    if window == 0 {
        return Err(Error::param("decomposition window must be at least 1"));
    }
    if window > t {
        return Err(Error::param(format!("decomposition window {window} exceeds series length {t}")));
    }
    let trend = moving_average(z, window);
    let seasonal = z - &trend;
    Ok((trend, seasonal))
}

fn moving_average(z: &Array3<f64>, window: usize) -> Array3<f64> {
    let (n, t, d) = z.dim();
    let mut trend = Array3::zeros((n, t, d));
    let inv = 1.0 / window as f64;
    for i in 0..n {
        for k in 0..d {
            for s in (window - 1)..t {
                let mut acc = 0.0;
                for u in (s + 1 - window)..=s {
                    acc += z[[i, u, k]];
                }
                trend[[i, s, k]] = acc * inv;
            }
        }
    }
    trend
}

/// Adjoint of [`moving_average`] along time.
#[cfg(test)]
fn moving_average_adjoint(g: &Array3<f64>, window: usize) -> Array3<f64> {
    let (n, t, d) = g.dim();
    let mut out = Array3::zeros((n, t, d));
    let inv = 1.0 / window as f64;
    for i in 0..n {
        for k in 0..d {
            for s in (window - 1)..t {
                let v = g[[i, s, k]] * inv;
                for u in (s + 1 - window)..=s {
                    out[[i, u, k]] += v;
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array;

    fn series(v: &[f64]) -> Array3<f64> {
        Array::from_shape_vec((1, v.len(), 1), v.to_vec()).unwrap()
    }

    #[test]
    fn constant_series_zero_padded_trend() {
        let c = 1.7;
        let (trend, seasonal) = decompose(&series(&[c; 5]), 3).unwrap();
        for (got, want) in trend.iter().zip([0.0, 0.0, c, c, c]) {
            assert!((got - want).abs() < 1e-15);
        }
        let s: Vec<f64> = seasonal.iter().copied().collect();
        assert!((s[0] - c).abs() < 1e-15 && (s[1] - c).abs() < 1e-15);
        assert!(s[2..].iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn unit_window_is_identity() {
        let z = series(&[1.0, -2.0, 0.5]);
        let (trend, seasonal) = decompose(&z, 1).unwrap();
        assert_eq!(trend, z);
        assert!(seasonal.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ramp_window_two() {
        let (trend, _) = decompose(&series(&[0.0, 1.0, 2.0, 3.0]), 2).unwrap();
        assert_eq!(trend.iter().copied().collect::<Vec<_>>(), vec![0.0, 0.5, 1.5, 2.5]);
    }

    #[test]
    fn window_bounds() {
        assert!(decompose(&series(&[1.0, 2.0]), 3).is_err());
        assert!(decompose(&series(&[1.0, 2.0]), 0).is_err());
    }

    #[test]
    fn adjoint_identity() {
        let x = series(&[0.3, -1.0, 2.0, 0.7, 1.1]);
        let g = series(&[1.0, 0.2, -0.4, 0.9, -1.3]);
        let lhs: f64 = (moving_average(&x, 3) * &g).sum();
        let rhs: f64 = (&x * &moving_average_adjoint(&g, 3)).sum();
        assert!((lhs - rhs).abs() < 1e-14);
    }
}
