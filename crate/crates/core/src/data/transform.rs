use ndarray::{s, Array2, Array3, Array4, Axis};
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMethod {
    #[default]
    Zscore,
    Minmax,
    None,
}

/// Per-(variable, dim) affine map `x' = (x - shift) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub method: NormMethod,
    pub shift: Array2<f64>,
    pub scale: Array2<f64>,
    /// (variable, dim) pairs with zero spread, left unscaled.
    pub degenerate: Vec<(usize, usize)>,
}

impl Normalization {
    /// Fits statistics on the first `train_len` steps only.
    pub fn fit(values: &Array3<f64>, method: NormMethod, train_len: usize) -> Result<Self> {
        let (n, len, d) = values.dim();
        if train_len == 0 || train_len > len {
            return Err(Error::Data(format!("training length {train_len} invalid for series of length {len}")));
        }
        let train = values.slice(s![.., ..train_len, ..]);
        let mut shift = Array2::zeros((n, d));
        let mut scale = Array2::ones((n, d));
        let mut degenerate = Vec::new();
        for v in 0..n {
            for k in 0..d {
                let series = train.slice(s![v, .., k]);
                let (sh, sc) = match method {
                    NormMethod::None => (0.0, 1.0),
                    NormMethod::Zscore => {
                        let mean = series.sum() / train_len as f64;
                        let var = series.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / train_len as f64;
                        (mean, var.sqrt())
                    }
                    NormMethod::Minmax => {
                        let lo = series.iter().copied().fold(f64::INFINITY, f64::min);
                        let hi = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                        (lo, hi - lo)
                    }
                };
                shift[[v, k]] = sh;
                if sc > 0.0 {
                    scale[[v, k]] = sc;
                } else {
                    degenerate.push((v, k));
                }
            }
        }
        Ok(Self { method, shift, scale, degenerate })
    }

    fn check(&self, x: &Array3<f64>) -> Result<()> {
        let (n, _, d) = x.dim();
        if self.shift.dim() != (n, d) {
            return Err(Error::shape(format!("statistics are {:?}, data has ({n}, {d})", self.shift.dim())));
        }
        Ok(())
    }

    /// Applies the map to any (variables × steps × dims) tensor.
    pub fn apply(&self, x: &Array3<f64>) -> Result<Array3<f64>> {
        self.check(x)?;
        let mut out = x.clone();
        for ((v, _, k), val) in out.indexed_iter_mut() {
            *val = (*val - self.shift[[v, k]]) / self.scale[[v, k]];
        }
        Ok(out)
    }

    pub fn invert(&self, x: &Array3<f64>) -> Result<Array3<f64>> {
        self.check(x)?;
        let mut out = x.clone();
        for ((v, _, k), val) in out.indexed_iter_mut() {
            *val = *val * self.scale[[v, k]] + self.shift[[v, k]];
        }
        Ok(out)
    }
}

/// Normalizes with statistics from the first `train_len` steps.
pub fn normalize(ds: &Dataset, method: NormMethod, train_len: usize) -> Result<(Dataset, Normalization)> {
    let stats = Normalization::fit(&ds.values, method, train_len)?;
    let mut out = ds.clone();
    out.values = stats.apply(&ds.values)?;
    Ok((out, stats))
}

/// Split lengths for `len` steps: the first two are rounded, the third takes the rest.
pub fn split_lengths(len: usize, ratios: [f64; 3]) -> Result<[usize; 3]> {
    if ratios.iter().any(|r| !(*r >= 0.0)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("split ratios {ratios:?} must be nonnegative and sum to 1")));
    }
    let a = ((len as f64 * ratios[0]).round() as usize).min(len);
    let b = ((len as f64 * ratios[1]).round() as usize).min(len - a);
    Ok([a, b, len - a - b])
}

/// Contiguous chronological train/validation/test splits.
pub fn split(ds: &Dataset, ratios: [f64; 3]) -> Result<[Dataset; 3]> {
    let [a, b, c] = split_lengths(ds.len(), ratios)?;
    if a == 0 || (ratios[1] > 0.0 && b == 0) || (ratios[2] > 0.0 && c == 0) {
        return Err(Error::Data(format!("series of length {} too short for splits {ratios:?}", ds.len())));
    }
    let part = |from: usize, to: usize, tag: &str| {
        let mut p = ds.clone();
        p.name = format!("{}:{tag}", ds.name);
        p.values = ds.values.slice(s![.., from..to, ..]).to_owned();
        p
    };
    Ok([part(0, a, "train"), part(a, a + b, "val"), part(a + b, a + b + c, "test")])
}

/// Aligned input/target windows.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    /// B × N × T × D
    pub inputs: Array4<f64>,
    /// B × N × H × D
    pub targets: Array4<f64>,
    /// Start step of each input window within its series.
    pub origins: Vec<usize>,
}

impl WindowSet {
    pub fn len(&self) -> usize {
        self.origins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origins.is_empty()
    }

    pub fn input(&self, b: usize) -> Array3<f64> {
        self.inputs.index_axis(Axis(0), b).to_owned()
    }

    pub fn target(&self, b: usize) -> Array3<f64> {
        self.targets.index_axis(Axis(0), b).to_owned()
    }
}

/// Sliding windows: `floor((L - T - H) / stride) + 1` of them.
pub fn make_windows(values: &Array3<f64>, lookback: usize, horizon: usize, stride: usize) -> Result<WindowSet> {
    let (n, len, d) = values.dim();
    if lookback == 0 || horizon == 0 || stride == 0 {
        return Err(Error::Config("lookback, horizon and stride must be positive".into()));
    }
    if lookback + horizon > len {
        return Err(Error::Data(format!(
            "series of length {len} cannot hold a window of {lookback} + {horizon} steps"
        )));
    }
    let b = (len - lookback - horizon) / stride + 1;
    let origins: Vec<usize> = (0..b).map(|i| i * stride).collect();
    let mut inputs = Array4::zeros((b, n, lookback, d));
    let mut targets = Array4::zeros((b, n, horizon, d));
    for (i, &o) in origins.iter().enumerate() {
        inputs.index_axis_mut(Axis(0), i).assign(&values.slice(s![.., o..o + lookback, ..]));
        targets.index_axis_mut(Axis(0), i).assign(&values.slice(s![.., o + lookback..o + lookback + horizon, ..]));
    }
    Ok(WindowSet { inputs, targets, origins })
}

/// Repeats the last observed step over the horizon; shape (B, N, H, D).
pub fn persistence_baseline(windows: &WindowSet) -> Array4<f64> {
    let (b, n, t, d) = windows.inputs.dim();
    let h = windows.targets.dim().2;
    Array4::from_shape_fn((b, n, h, d), |(i, v, _, k)| windows.inputs[[i, v, t - 1, k]])
}
