//! Experiment drivers shared by the command line and the acceptance suite:
//! basis convergence races, ablation matrices, the signed-relation
//! embedding experiment, forecasting sanity checks and theory reports.

mod ablation;
mod signed;
mod theory;

pub use ablation::{ablation_variants, run_ablation, write_ablation_csv, AblationAxis, AblationRow, AblationVariant};
pub use signed::{low_pass_control, random_connectivity, signed_relation, write_embedding_csv, SignedOptions, SignedReport};
pub use theory::{density_fit, orthogonality_suite, sampling_summary, theory_report, DensityFit, SamplingSummary, TheoryOptions, TheoryReport};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{make_windows, normalize, persistence_baseline, split_lengths, Dataset, NormMethod, Normalization, WindowSet};
use crate::error::{Error, Result};
use crate::graph::{Adjacency, PolyBasis};
use crate::model::{pearson_adjacency, AdjacencyMode, ModelConfig, ModelState};
use crate::train::{score, train, Metrics, TrainConfig, TrainRun};

/// Windowing and split settings for turning a dataset into a forecasting task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskOptions {
    pub lookback: usize,
    pub horizon: usize,
    pub split: [f64; 3],
    pub normalization: NormMethod,
    pub stride: usize,
}

impl Default for TaskOptions {
    fn default() -> Self {
        Self { lookback: 24, horizon: 3, split: [0.6, 0.2, 0.2], normalization: NormMethod::Zscore, stride: 1 }
    }
}

/// A dataset normalized with training-split statistics and cut into
/// chronological train/validation/test windows.
#[derive(Debug, Clone)]
pub struct ForecastTask {
    pub name: String,
    pub nodes: usize,
    pub train: WindowSet,
    pub val: WindowSet,
    pub test: WindowSet,
    pub norm: Normalization,
    /// Absolute Pearson correlation of the normalized training split, or the
    /// dataset's own adjacency when it carries one.
    pub adjacency: Adjacency,
    pub labels: Option<Vec<usize>>,
}

pub fn prepare_task(ds: &Dataset, opts: &TaskOptions) -> Result<ForecastTask> {
    let lens = split_lengths(ds.len(), opts.split)?;
    let need = opts.lookback + opts.horizon;
    if lens.iter().any(|&l| l < need) {
        return Err(Error::Data(format!(
            "split lengths {lens:?} cannot hold one window of {} + {} steps",
            opts.lookback, opts.horizon
        )));
    }
    let (normed, norm) = normalize(ds, opts.normalization, lens[0])?;
    let values = &normed.values;
    let cut = |start: usize, len: usize| values.slice(ndarray::s![.., start..start + len, ..]).to_owned();
    let train_vals = cut(0, lens[0]);
    let windows = |v: &ndarray::Array3<f64>| make_windows(v, opts.lookback, opts.horizon, opts.stride);
    let adjacency = match &ds.adjacency {
        Some(a) => a.clone(),
        None => pearson_adjacency(&train_vals)?,
    };
    Ok(ForecastTask {
        name: ds.name.clone(),
        nodes: ds.variables(),
        train: windows(&train_vals)?,
        val: windows(&cut(lens[0], lens[1]))?,
        test: windows(&cut(lens[0] + lens[1], lens[2]))?,
        norm,
        adjacency,
        labels: ds.labels.clone(),
    })
}

/// Desk-scale model and training budget shared by the synthetic experiments:
/// the short-term defaults (K = 4, S = 5, two blocks) on a 24-step lookback
/// and 30 epochs of batch-32 Adam.
pub fn desk_preset() -> (ModelConfig, TrainConfig) {
    let task = TaskOptions::default();
    let model = ModelConfig { lookback: task.lookback, horizon: task.horizon, ..ModelConfig::default() };
    (model, TrainConfig { epochs: 30, ..TrainConfig::default() })
}

/// Initializes a model from `seed` and trains it; the same seed drives the
/// initialization and, through a derived stream, the batch order.
pub fn fit(config: &ModelConfig, task: &ForecastTask, train_cfg: &TrainConfig, seed: u64) -> Result<(ModelState, TrainRun)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let adj = (config.adjacency != AdjacencyMode::Learned).then_some(&task.adjacency);
    let mut state = ModelState::init(config, task.nodes, adj, &mut rng)?;
    let run = train(&mut state, &task.train, Some((&task.val, Some(&task.norm))), train_cfg, rng.gen())?;
    Ok((state, run))
}

/// Test-split metrics of the persistence forecast, on the original scale.
pub fn persistence_metrics(task: &ForecastTask) -> Result<Metrics> {
    score(&persistence_baseline(&task.test), &task.test, Some(&task.norm))
}

/// The five graph bases compared in the basis ablation, in table order.
pub fn ablation_bases() -> [PolyBasis; 5] {
    [
        PolyBasis::Monomial,
        PolyBasis::Bernstein,
        PolyBasis::Chebyshev2,
        PolyBasis::Gegenbauer { alpha: 1.2 },
        PolyBasis::Jacobi { a: 0.5, b: 1.0 },
    ]
}

/// Per-epoch training loss of one basis in a convergence race.
#[derive(Debug, Clone, Serialize)]
pub struct RaceCurve {
    pub basis: PolyBasis,
    pub losses: Vec<f64>,
}

/// Trains the same model with each basis from the same seed for a fixed
/// number of epochs (no early stopping) and returns the training-loss curves.
pub fn convergence_race(
    config: &ModelConfig,
    task: &ForecastTask,
    bases: &[PolyBasis],
    train_cfg: &TrainConfig,
    seed: u64,
) -> Result<Vec<RaceCurve>> {
    let cfg = TrainConfig { patience: None, ..*train_cfg };
    bases
        .iter()
        .map(|&basis| {
            let model = ModelConfig { basis, ..config.clone() };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let adj = (model.adjacency != AdjacencyMode::Learned).then_some(&task.adjacency);
            let mut state = ModelState::init(&model, task.nodes, adj, &mut rng)?;
            let run = train(&mut state, &task.train, None, &cfg, rng.gen())?;
            Ok(RaceCurve { basis, losses: run.train_losses() })
        })
        .collect()
}

/// Long-format CSV `basis,epoch,train_loss`.
pub fn write_race_csv<W: std::io::Write>(w: W, curves: &[RaceCurve]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["basis", "epoch", "train_loss"])?;
    for c in curves {
        for (e, l) in c.losses.iter().enumerate() {
            out.serialize((c.basis.name(), e + 1, l))?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Trained model against persistence on the test split.
#[derive(Debug, Clone, Serialize)]
pub struct ForecastReport {
    pub model: Metrics,
    pub persistence: Metrics,
    /// `1 - model_mae / persistence_mae`.
    pub mae_improvement: f64,
    pub run: TrainRun,
}

pub fn forecast_vs_persistence(
    config: &ModelConfig,
    task: &ForecastTask,
    train_cfg: &TrainConfig,
    seed: u64,
) -> Result<(ModelState, ForecastReport)> {
    let (state, run) = fit(config, task, train_cfg, seed)?;
    let model = crate::train::evaluate(&state, &task.test, Some(&task.norm))?;
    let persistence = persistence_metrics(task)?;
    let mae_improvement = 1.0 - model.mae / persistence.mae;
    Ok((state, ForecastReport { model, persistence, mae_improvement, run }))
}
