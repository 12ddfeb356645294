use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{ablation_bases, convergence_race, ForecastTask, RaceCurve};
use crate::error::Result;
use crate::graph::{
    eigendecompose, fit_weight_alpha, normalized_laplacian, orthogonality_check, signal_density, weight_fit_residual,
    Adjacency, OrthogonalityReport, PolyBasis,
};
use crate::model::ModelConfig;
use crate::temporal::column_sampling_check;
use crate::train::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TheoryOptions {
    pub sampling_rows: usize,
    pub sampling_cols: usize,
    pub sampling_rank: usize,
    pub sampled: usize,
    pub trials: usize,
    /// Columns of the random weight matrix multiplying the data.
    pub weight_cols: usize,
    pub quadrature_degree: usize,
}

impl Default for TheoryOptions {
    fn default() -> Self {
        Self {
            sampling_rows: 32,
            sampling_cols: 64,
            sampling_rank: 4,
            sampled: 32,
            trials: 500,
            weight_cols: 8,
            quadrature_degree: 6,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SamplingSummary {
    pub violation_rate: f64,
    pub epsilon: f64,
    pub rhs: f64,
    pub mean_lhs: f64,
    pub max_lhs: f64,
    /// Largest error when the data matrix has exactly the target rank.
    pub exact_rank_max_lhs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DensityFit {
    pub alpha: f64,
    pub residual: f64,
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TheoryReport {
    pub seed: u64,
    pub column_sampling: SamplingSummary,
    pub orthogonality: Vec<OrthogonalityReport>,
    pub density: Option<DensityFit>,
    pub race: Vec<RaceCurve>,
}

fn gaussian<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.sample(StandardNormal))
}

/// Column-sampling bound on a random Gaussian matrix and on an exactly
/// low-rank one.
pub fn sampling_summary<R: Rng>(opts: &TheoryOptions, rng: &mut R) -> Result<SamplingSummary> {
    let (n, t, k) = (opts.sampling_rows, opts.sampling_cols, opts.sampling_rank);
    let a = gaussian(n, t, rng);
    let w = gaussian(t, opts.weight_cols, rng);
    let rep = column_sampling_check(&a, &w, k, opts.sampled, opts.trials, rng)?;
    let low = gaussian(n, k, rng).dot(&gaussian(k, t, rng));
    let exact = column_sampling_check(&low, &w, k, opts.sampled, opts.trials.min(50), rng)?;
    Ok(SamplingSummary {
        violation_rate: rep.violation_rate,
        epsilon: rep.epsilon,
        rhs: rep.rhs,
        mean_lhs: rep.mean_lhs(),
        max_lhs: rep.max_lhs(),
        exact_rank_max_lhs: exact.max_lhs(),
    })
}

/// Orthogonality of every ablation basis, plus Gegenbauer at α ∈ {0.5, 1, 2}.
pub fn orthogonality_suite(degree: usize) -> Result<Vec<OrthogonalityReport>> {
    let mut bases = ablation_bases().to_vec();
    bases.extend([0.5, 1.0, 2.0].map(|alpha| PolyBasis::Gegenbauer { alpha }));
    bases.iter().map(|b| orthogonality_check(b, degree)).collect()
}

/// Best-fitting Gegenbauer weight for the spectral energy of `signal`
/// (N×C, one column per time step or dimension) on `adjacency`.
pub fn density_fit(adjacency: &Adjacency, signal: &Array2<f64>) -> Result<DensityFit> {
    let spectrum = eigendecompose(&normalized_laplacian(adjacency))?;
    let density = signal_density(&spectrum, signal)?;
    let alpha = fit_weight_alpha(&density)?;
    Ok(DensityFit { alpha, residual: weight_fit_residual(&density, alpha), grid: density.grid, density: density.density })
}

/// Runs every theory check. The density fit uses the task's graph and its
/// training inputs; the race trains `model` once per ablation basis.
pub fn theory_report(
    opts: &TheoryOptions,
    task: Option<(&ModelConfig, &ForecastTask, &TrainConfig)>,
    seed: u64,
) -> Result<TheoryReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let column_sampling = sampling_summary(opts, &mut rng)?;
    let orthogonality = orthogonality_suite(opts.quadrature_degree)?;
    let (density, race) = match task {
        Some((model, task, train_cfg)) => {
            // First window of the training split, one column per time step.
            let x = task.train.input(0);
            let (n, t, d) = x.dim();
            let signal = x.to_shape((n, t * d)).expect("contiguous").to_owned();
            let fit = density_fit(&task.adjacency, &signal)?;
            let race = convergence_race(model, task, &ablation_bases(), train_cfg, rng.gen())?;
            (Some(fit), race)
        }
        None => (None, Vec::new()),
    };
    Ok(TheoryReport { seed, column_sampling, orthogonality, density, race })
}
