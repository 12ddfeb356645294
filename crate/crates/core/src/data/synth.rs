use std::f64::consts::PI;

use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

/// Full oscillation periods spanned by the signed-group series.
pub const SYNTH_PERIODS: usize = 20;

fn noise(sigma: f64) -> Result<Option<Normal<f64>>> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::param(format!("noise sigma must be finite and nonnegative, got {sigma}")));
    }
    Ok((sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("positive sigma")))
}

/// Two groups of `n_per_group` series: `a_i sin(2πft) + ε` (label 0) followed
/// by `b_i cos(2πft) + ε` (label 1), with amplitudes uniform on [0.5, 2] and
/// `f` giving [`SYNTH_PERIODS`] periods over `length` steps.
pub fn synth_signed_groups(n_per_group: usize, length: usize, noise_sigma: f64, seed: u64) -> Result<Dataset> {
    if n_per_group == 0 {
        return Err(Error::param("each group needs at least one series"));
    }
    if length < 2 * SYNTH_PERIODS {
        return Err(Error::param(format!("length {length} cannot resolve {SYNTH_PERIODS} periods")));
    }
    let eps = noise(noise_sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let freq = SYNTH_PERIODS as f64 / length as f64;
    let n = 2 * n_per_group;
    let amplitudes: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..=2.0)).collect();
    let mut values = Array3::zeros((n, length, 1));
    for i in 0..n {
        for t in 0..length {
            let phase = 2.0 * PI * freq * t as f64;
            let clean = if i < n_per_group { phase.sin() } else { phase.cos() };
            let e = eps.as_ref().map_or(0.0, |d| d.sample(&mut rng));
            values[[i, t, 0]] = amplitudes[i] * clean + e;
        }
    }
    let mut ds = Dataset::new("signed_groups", values);
    ds.labels = Some((0..n).map(|i| usize::from(i >= n_per_group)).collect());
    Ok(ds)
}

/// Settings of the multi-node seasonal forecasting task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeasonalOptions {
    pub nodes: usize,
    pub groups: usize,
    pub period: usize,
    pub periods: usize,
    pub noise: f64,
}

impl Default for SeasonalOptions {
    fn default() -> Self {
        Self { nodes: 8, groups: 2, period: 24, periods: 20, noise: 0.3 }
    }
}

/// Seasonal series whose fundamental and second harmonic share a phase within
/// each group, with per-node amplitudes and independent Gaussian noise. Labels
/// hold the group of each node.
pub fn synth_seasonal(opts: &SeasonalOptions, seed: u64) -> Result<Dataset> {
    if opts.nodes == 0 || opts.groups == 0 || opts.groups > opts.nodes {
        return Err(Error::param("need 1 ≤ groups ≤ nodes"));
    }
    if opts.period < 4 || opts.periods == 0 {
        return Err(Error::param("period must be at least 4 steps and periods positive"));
    }
    let eps = noise(opts.noise)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = opts.period * opts.periods;
    let phases: Vec<(f64, f64)> = (0..opts.groups).map(|_| (rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..2.0 * PI))).collect();
    let labels: Vec<usize> = (0..opts.nodes).map(|i| i * opts.groups / opts.nodes).collect();
    let amps: Vec<(f64, f64)> = (0..opts.nodes).map(|_| (rng.gen_range(0.5..=2.0), rng.gen_range(0.2..=1.0))).collect();
    let w = 2.0 * PI / opts.period as f64;
    let mut values = Array3::zeros((opts.nodes, len, 1));
    for i in 0..opts.nodes {
        let (p1, p2) = phases[labels[i]];
        let (a1, a2) = amps[i];
        for t in 0..len {
            let tt = t as f64;
            let e = eps.as_ref().map_or(0.0, |d| d.sample(&mut rng));
            values[[i, t, 0]] = a1 * (w * tt + p1).sin() + a2 * (2.0 * w * tt + p2).sin() + e;
        }
    }
    let mut ds = Dataset::new("seasonal", values);
    ds.labels = Some(labels);
    Ok(ds)
}
