//! Unnormalized forward DFT and `1/T`-normalized inverse.
//!
//! Power-of-two lengths go through an iterative radix-2 transform; other
//! lengths fall back to the direct O(T²) sum with exactly reduced twiddles.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// `X(k) = Σ_t x(t) e^{-2πikt/T}`.
pub fn dft(x: &[C64]) -> Result<Vec<C64>> {
    if x.is_empty() {
        return Err(Error::shape("dft of an empty sequence"));
    }
    Ok(transform(x, false))
}

/// `x(t) = (1/T) Σ_k X(k) e^{2πikt/T}`.
pub fn idft(f: &[C64]) -> Result<Vec<C64>> {
    if f.is_empty() {
        return Err(Error::shape("idft of an empty sequence"));
    }
    let scale = 1.0 / f.len() as f64;
    Ok(transform(f, true).into_iter().map(|v| v * scale).collect())
}

pub fn dft_real(x: &[f64]) -> Result<Vec<C64>> {
    let c: Vec<C64> = x.iter().map(|&v| C64::new(v, 0.0)).collect();
    dft(&c)
}

/// Unscaled transform; `inverse` flips the exponent sign.
pub(crate) fn transform(x: &[C64], inverse: bool) -> Vec<C64> {
    let plan = DftPlan::new(x.len(), inverse);
    let mut out = vec![C64::default(); x.len()];
    plan.run(x, &mut out);
    out
}

/// Precomputed twiddles for repeated unscaled transforms of one length.
pub(crate) struct DftPlan {
    table: Vec<C64>,
}

impl DftPlan {
    pub(crate) fn new(n: usize, inverse: bool) -> Self {
        let sign = if inverse { 1.0 } else { -1.0 };
        let table = (0..n).map(|j| C64::from_polar(1.0, sign * 2.0 * PI * j as f64 / n as f64)).collect();
        Self { table }
    }

    /// Writes the transform of `x` into `out`; both have the plan's length.
    pub(crate) fn run(&self, x: &[C64], out: &mut [C64]) {
        let n = self.table.len();
        debug_assert!(x.len() == n && out.len() == n);
        if n.is_power_of_two() {
            self.radix2(x, out);
        } else {
            for (k, o) in out.iter_mut().enumerate() {
                let mut acc = C64::default();
                let mut idx = 0;
                for &v in x {
                    acc += v * self.table[idx];
                    idx += k;
                    if idx >= n {
                        idx %= n;
                    }
                }
                *o = acc;
            }
        }
    }

    fn radix2(&self, x: &[C64], a: &mut [C64]) {
        let n = x.len();
        let bits = n.trailing_zeros();
        for (i, &v) in x.iter().enumerate() {
            let j = if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) };
            a[j] = v;
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let step = n / len;
            for start in (0..n).step_by(len) {
                for j in 0..half {
                    let w = self.table[j * step];
                    let u = a[start + j];
                    let v = a[start + j + half] * w;
                    a[start + j] = u + v;
                    a[start + j + half] = u - v;
                }
            }
            len <<= 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive(x: &[C64]) -> Vec<C64> {
        let n = x.len() as f64;
        (0..x.len())
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(t, v)| v * C64::from_polar(1.0, -2.0 * PI * (k * t) as f64 / n))
                    .sum()
            })
            .collect()
    }

    #[test]
    fn constant_and_impulse() {
        let c = 2.5;
        let f = dft_real(&[c; 4]).unwrap();
        assert!((f[0] - C64::new(4.0 * c, 0.0)).norm() < 1e-14);
        assert!(f[1..].iter().all(|v| v.norm() < 1e-14));

        let f = dft_real(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(f.iter().all(|v| (v - C64::new(1.0, 0.0)).norm() < 1e-15));

        let x = idft(&[C64::new(6.0, 0.0), C64::default(), C64::default(), C64::default(), C64::default(), C64::default()]).unwrap();
        assert!(x.iter().all(|v| (v - C64::new(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn matches_direct_sum_all_lengths() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..=33 {
            let x: Vec<C64> = (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let got = dft(&x).unwrap();
            let want = naive(&x);
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).norm() < 1e-10, "n={n}");
            }
            let back = idft(&got).unwrap();
            for (a, b) in back.iter().zip(&x) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn empty_input_errors() {
        assert!(dft(&[]).is_err());
        assert!(idft(&[]).is_err());
    }
}
