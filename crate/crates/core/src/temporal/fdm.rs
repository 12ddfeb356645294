//! Frequency-domain temporal models: coarse and fine spectral filtering and
//! spectral attention over selected modes.

use ndarray::{s, Array2, Array3, Array4, ArrayView2, Axis};
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::decomp::decompose;
use super::modes::{dft_time, idft_time, pad_modes, real_part, select_modes, to_complex, ModeSet};
use crate::error::{Error, Result};

/// Which axes share one `S×S` spectral filter.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightSharing {
    /// One filter per (variable, dimension).
    #[default]
    Individual,
    /// One filter per dimension, shared by all variables.
    SharedVariables,
    /// One filter per variable, shared by all dimensions.
    SharedDims,
    SharedAll,
}

impl WeightSharing {
    pub fn extents(self, n: usize, d: usize) -> (usize, usize) {
        match self {
            WeightSharing::Individual => (n, d),
            WeightSharing::SharedVariables => (1, d),
            WeightSharing::SharedDims => (n, 1),
            WeightSharing::SharedAll => (1, 1),
        }
    }
}

/// Reduced-order spectral filter: mode selection plus complex `S×S` weights,
/// stored as (Nw × Dw × S × S).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFilter {
    pub modes: ModeSet,
    pub weights: Array4<C64>,
}

impl SpectralFilter {
    pub fn new(modes: ModeSet, weights: Array4<C64>) -> Result<Self> {
        let (_, _, a, b) = weights.dim();
        if a != b || a != modes.count() {
            return Err(Error::shape(format!(
                "spectral weights are {a}x{b}, expected square in {} modes",
                modes.count()
            )));
        }
        Ok(Self { modes, weights })
    }

    pub fn identity(modes: ModeSet, n: usize, d: usize, sharing: WeightSharing) -> Self {
        let (nw, dw) = sharing.extents(n, d);
        let s = modes.count();
        let weights = Array4::from_shape_fn((nw, dw, s, s), |(_, _, i, j)| {
            if i == j {
                C64::new(1.0, 0.0)
            } else {
                C64::default()
            }
        });
        Self { modes, weights }
    }

    /// Identity plus independent N(0, σ²) noise on real and imaginary parts.
    pub fn noisy_identity<R: Rng>(modes: ModeSet, n: usize, d: usize, sharing: WeightSharing, sigma: f64, rng: &mut R) -> Self {
        let mut f = Self::identity(modes, n, d, sharing);
        if sigma > 0.0 {
            let normal = Normal::new(0.0, sigma).expect("sigma is positive");
            f.weights.mapv_inplace(|w| w + C64::new(normal.sample(rng), normal.sample(rng)));
        }
        f
    }

    /// Weight matrix applied to variable `n`, dimension `d`.
    pub fn weight(&self, n: usize, d: usize) -> ArrayView2<'_, C64> {
        let (nw, dw, _, _) = self.weights.dim();
        self.weights.slice(s![if nw == 1 { 0 } else { n }, if dw == 1 { 0 } else { d }, .., ..])
    }

    fn check(&self, n: usize, t: usize, d: usize) -> Result<()> {
        let (nw, dw, _, _) = self.weights.dim();
        if self.modes.len() != t {
            return Err(Error::shape(format!("filter built for length {}, input has {t}", self.modes.len())));
        }
        if !(nw == 1 || nw == n) || !(dw == 1 || dw == d) {
            return Err(Error::shape(format!("weights ({nw}x{dw}) incompatible with {n} variables x {d} dims")));
        }
        Ok(())
    }

    /// `f' W` on each (variable, dim) row of a mode-selected tensor.
    pub fn mix(&self, f: &Array3<C64>) -> Array3<C64> {
        let (n, s, d) = f.dim();
        let mut out = Array3::zeros((n, s, d));
        for i in 0..n {
            for k in 0..d {
                let w = self.weight(i, k);
                for col in 0..s {
                    let mut acc = C64::default();
                    for row in 0..s {
                        acc += f[[i, row, k]] * w[[row, col]];
                    }
                    out[[i, col, k]] = acc;
                }
            }
        }
        out
    }

    /// `Re IDFT(Pad(select(DFT(z)) W))`.
    pub fn apply(&self, z: &Array3<f64>) -> Result<Array3<f64>> {
        let (n, t, d) = z.dim();
        self.check(n, t, d)?;
        let f = dft_time(&to_complex(z))?;
        let selected = select_modes(&f, &self.modes)?;
        let filtered = pad_modes(&self.mix(&selected), &self.modes)?;
        Ok(real_part(&idft_time(&filtered)?))
    }
}

/// Time-axis projections for the query, key and value of spectral attention.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionWeights {
    pub query: Array2<f64>,
    pub key: Array2<f64>,
    pub value: Array2<f64>,
}

impl AttentionWeights {
    pub fn identity(t: usize) -> Self {
        Self { query: Array2::eye(t), key: Array2::eye(t), value: Array2::eye(t) }
    }
}

/// Per-block temporal parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalFdmParams {
    pub coarse: SpectralFilter,
    pub fine: SpectralFilter,
    pub window: usize,
    pub attention: Option<AttentionWeights>,
}

impl TemporalFdmParams {
    pub fn identity(modes: ModeSet, n: usize, d: usize, window: usize) -> Self {
        Self {
            coarse: SpectralFilter::identity(modes.clone(), n, d, WeightSharing::Individual),
            fine: SpectralFilter::identity(modes, n, d, WeightSharing::Individual),
            window,
            attention: None,
        }
    }
}

/// Coarse-grained filtering: DFT, select, weight, pad, inverse DFT, real part.
pub fn coarse_fdm(z: &Array3<f64>, params: &TemporalFdmParams) -> Result<Array3<f64>> {
    params.coarse.apply(z)
}

/// Fine-grained filtering: trend passes through, the seasonal part is spectrally filtered.
pub fn fine_fdm(z: &Array3<f64>, params: &TemporalFdmParams) -> Result<Array3<f64>> {
    if params.window < 1 {
        return Err(Error::param("decomposition window must be at least 1"));
    }
    let (trend, seasonal) = decompose(z, params.window)?;
    Ok(trend + params.fine.apply(&seasonal)?)
}

fn project_time(p: &Array2<f64>, x: &Array3<f64>, relu: bool) -> Result<Array3<f64>> {
    let (n, t, d) = x.dim();
    if p.dim() != (t, t) {
        return Err(Error::shape(format!("projection is {:?}, expected {t}x{t}", p.dim())));
    }
    let mut out = Array3::zeros((n, t, d));
    for i in 0..n {
        let block = p.dot(&x.index_axis(Axis(0), i));
        out.index_axis_mut(Axis(0), i).assign(&block);
    }
    if relu {
        out.mapv_inplace(|v| v.max(0.0));
    }
    Ok(out)
}

/// Spectral attention on the seasonal part, queried by the trend.
///
/// Returns the output and the per-variable (S×S) attention weights. Scores
/// are the real part of `Q̃ K̃ᵀ` scaled by `1/√(S·D)`.
pub fn spectral_attention_with_weights(
    trend: &Array3<f64>,
    seasonal: &Array3<f64>,
    params: &TemporalFdmParams,
) -> Result<(Array3<f64>, Array3<f64>)> {
    let attn = params
        .attention
        .as_ref()
        .ok_or_else(|| Error::param("spectral attention requires attention weights"))?;
    if trend.dim() != seasonal.dim() {
        return Err(Error::shape("trend and seasonal tensors differ in shape"));
    }
    let (n, t, d) = trend.dim();
    let modes = &params.fine.modes;
    if modes.len() != t {
        return Err(Error::shape(format!("mode set built for length {}, input has {t}", modes.len())));
    }
    let spectral = |x: Array3<f64>| -> Result<Array3<C64>> { select_modes(&dft_time(&to_complex(&x))?, modes) };
    let q = spectral(project_time(&attn.query, trend, true)?)?;
    let k = spectral(project_time(&attn.key, seasonal, true)?)?;
    let v = spectral(project_time(&attn.value, seasonal, true)?)?;
    let s = modes.count();
    let scale = 1.0 / ((s * d) as f64).sqrt();

    let mut weights = Array3::zeros((n, s, s));
    let mut mixed = Array3::zeros((n, s, d));
    for i in 0..n {
        for a in 0..s {
            let mut row: Vec<f64> = (0..s)
                .map(|b| (0..d).map(|c| (q[[i, a, c]] * k[[i, b, c]]).re).sum::<f64>() * scale)
                .collect();
            softmax_in_place(&mut row);
            for b in 0..s {
                weights[[i, a, b]] = row[b];
                for c in 0..d {
                    mixed[[i, a, c]] += v[[i, b, c]] * row[b];
                }
            }
        }
    }
    let out = real_part(&idft_time(&pad_modes(&mixed, modes)?)?);
    Ok((trend + &out, weights))
}

pub fn spectral_attention(trend: &Array3<f64>, seasonal: &Array3<f64>, params: &TemporalFdmParams) -> Result<Array3<f64>> {
    spectral_attention_with_weights(trend, seasonal, params).map(|(z, _)| z)
}

fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        let u = 1.0 / row.len() as f64;
        row.iter_mut().for_each(|v| *v = u);
        return;
    }
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    row.iter_mut().for_each(|v| *v /= sum);
}
