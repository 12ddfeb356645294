use std::io::Write;

use ndarray::{Array3, Axis};
use num_complex::Complex64 as C64;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dft::transform;
use crate::error::{Error, Result};

/// Ascending subset of frequency indices `{0..T-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeSet {
    indices: Vec<usize>,
    len: usize,
}

impl ModeSet {
    pub fn new(indices: Vec<usize>, len: usize) -> Result<Self> {
        if indices.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("mode indices must be strictly ascending"));
        }
        if let Some(&last) = indices.last() {
            if last >= len {
                return Err(Error::param(format!("mode index {last} out of range for length {len}")));
            }
        }
        Ok(Self { indices, len })
    }

    /// The `s` lowest frequencies `{0..s-1}`.
    pub fn lowest(s: usize, len: usize) -> Result<Self> {
        Self::new((0..s).collect(), len)
    }

    pub fn full(len: usize) -> Self {
        Self { indices: (0..len).collect(), len }
    }

    /// `s` indices drawn uniformly without replacement, sorted.
    pub fn random<R: Rng>(s: usize, len: usize, rng: &mut R) -> Result<Self> {
        if s > len {
            return Err(Error::param(format!("cannot draw {s} modes from {len}")));
        }
        let mut idx = sample(rng, len, s).into_vec();
        idx.sort_unstable();
        Self::new(idx, len)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Number of selected modes `S`.
    pub fn count(&self) -> usize {
        self.indices.len()
    }

    /// Full spectrum length `T`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// DFT along the time axis of an (N×T×D) tensor.
pub fn dft_time(x: &Array3<C64>) -> Result<Array3<C64>> {
    map_time(x, |s| transform(s, false))
}

/// Inverse DFT along the time axis, `1/T` normalized.
pub fn idft_time(x: &Array3<C64>) -> Result<Array3<C64>> {
    let scale = 1.0 / x.len_of(Axis(1)).max(1) as f64;
    map_time(x, |s| transform(s, true).into_iter().map(|v| v * scale).collect())
}

fn map_time(x: &Array3<C64>, f: impl Fn(&[C64]) -> Vec<C64>) -> Result<Array3<C64>> {
    let (n, t, d) = x.dim();
    if t == 0 {
        return Err(Error::shape("time axis is empty"));
    }
    let mut out = Array3::zeros((n, t, d));
    let mut buf = vec![C64::default(); t];
    for i in 0..n {
        for j in 0..d {
            for k in 0..t {
                buf[k] = x[[i, k, j]];
            }
            for (k, v) in f(&buf).into_iter().enumerate() {
                out[[i, k, j]] = v;
            }
        }
    }
    Ok(out)
}

pub fn to_complex(x: &Array3<f64>) -> Array3<C64> {
    x.mapv(|v| C64::new(v, 0.0))
}

pub fn real_part(x: &Array3<C64>) -> Array3<f64> {
    x.mapv(|v| v.re)
}

/// Keeps the selected frequencies: (N×T×D) → (N×S×D).
pub fn select_modes(f: &Array3<C64>, modes: &ModeSet) -> Result<Array3<C64>> {
    if f.len_of(Axis(1)) != modes.len() {
        return Err(Error::shape(format!(
            "spectrum has {} frequencies, mode set expects {}",
            f.len_of(Axis(1)),
            modes.len()
        )));
    }
    Ok(f.select(Axis(1), modes.indices()))
}

/// Scatters (N×S×D) back to (N×T×D), zero at unselected frequencies.
pub fn pad_modes(f: &Array3<C64>, modes: &ModeSet) -> Result<Array3<C64>> {
    let (n, s, d) = f.dim();
    if s != modes.count() {
        return Err(Error::shape(format!("{s} selected components but {} mode indices", modes.count())));
    }
    let mut out = Array3::zeros((n, modes.len(), d));
    for (j, &idx) in modes.indices().iter().enumerate() {
        out.index_axis_mut(Axis(1), idx).assign(&f.index_axis(Axis(1), j));
    }
    Ok(out)
}

/// Writes `variable,mode,dim,re,im` rows. `modes` labels the middle axis.
pub fn write_spectrum_csv<W: Write>(mut w: W, f: &Array3<C64>, modes: Option<&ModeSet>) -> Result<()> {
    writeln!(w, "variable,mode,dim,re,im")?;
    let (n, s, d) = f.dim();
    for i in 0..n {
        for j in 0..s {
            let mode = modes.map_or(j, |m| m.indices()[j]);
            for k in 0..d {
                let v = f[[i, j, k]];
                writeln!(w, "{i},{mode},{k},{},{}", v.re, v.im)?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_spectrum(n: usize, t: usize, d: usize, seed: u64) -> Array3<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array3::from_shape_fn((n, t, d), |_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    #[test]
    fn full_selection_is_identity() {
        let f = random_spectrum(2, 6, 3, 1);
        let m = ModeSet::full(6);
        assert_eq!(select_modes(&f, &m).unwrap(), f);
        assert_eq!(pad_modes(&select_modes(&f, &m).unwrap(), &m).unwrap(), f);
    }

    #[test]
    fn shapes_and_zero_fill() {
        let f = random_spectrum(3, 4, 2, 2);
        let m = ModeSet::new(vec![0, 2], 4).unwrap();
        let s = select_modes(&f, &m).unwrap();
        assert_eq!(s.dim(), (3, 2, 2));
        let p = pad_modes(&s, &m).unwrap();
        assert!(p.index_axis(Axis(1), 1).iter().all(|v| *v == C64::default()));
        assert!(p.index_axis(Axis(1), 3).iter().all(|v| *v == C64::default()));
        let energy = |a: &Array3<C64>| a.iter().map(|v| v.norm_sqr()).sum::<f64>();
        assert_eq!(energy(&p), energy(&s));
        assert_eq!(select_modes(&p, &m).unwrap(), s);
    }

    #[test]
    fn empty_selection_pads_to_zero() {
        let m = ModeSet::new(vec![], 5).unwrap();
        let p = pad_modes(&Array3::zeros((2, 0, 1)), &m).unwrap();
        assert_eq!(p.dim(), (2, 5, 1));
        assert!(p.iter().all(|v| *v == C64::default()));
    }

    #[test]
    fn rejects_bad_indices() {
        assert!(ModeSet::new(vec![1, 1], 4).is_err());
        assert!(ModeSet::new(vec![2, 1], 4).is_err());
        assert!(ModeSet::new(vec![0, 4], 4).is_err());
        let f = random_spectrum(1, 5, 1, 0);
        assert!(select_modes(&f, &ModeSet::full(4)).is_err());
        assert!(pad_modes(&Array3::zeros((1, 3, 1)), &ModeSet::lowest(2, 4).unwrap()).is_err());
    }

    #[test]
    fn random_modes_are_sorted_and_seeded() {
        let a = ModeSet::random(5, 24, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = ModeSet::random(5, 24, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.count(), 5);
        assert!(a.indices().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn spectrum_csv() {
        let f = Array3::from_elem((1, 1, 1), C64::new(1.5, -2.0));
        let m = ModeSet::new(vec![3], 4).unwrap();
        let mut buf = Vec::new();
        write_spectrum_csv(&mut buf, &f, Some(&m)).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "variable,mode,dim,re,im\n0,3,0,1.5,-2\n");
    }
}
