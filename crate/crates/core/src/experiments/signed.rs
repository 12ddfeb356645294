use std::io::Write;

use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{fit, prepare_task, TaskOptions};
use crate::data::synth_signed_groups;
use crate::error::{Error, Result};
use crate::graph::{Adjacency, PolyBasis};
use crate::metrics::silhouette;
use crate::model::{embed, AdjacencyMode, ModelConfig, ModelState};
use crate::train::{evaluate, Metrics, TrainConfig};

/// Settings of the sin/cos group experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SignedOptions {
    pub n_per_group: usize,
    pub length: usize,
    pub noise: f64,
    /// Edge probability of the random connectivity graph, which ignores the
    /// group labels.
    pub edge_prob: f64,
    pub task: TaskOptions,
}

impl Default for SignedOptions {
    fn default() -> Self {
        Self { n_per_group: 10, length: 480, noise: 0.1, edge_prob: 0.5, task: TaskOptions::default() }
    }
}

/// Random undirected graph where every node has at least one neighbour.
pub fn random_connectivity<R: Rng>(n: usize, p: f64, rng: &mut R) -> Result<Adjacency> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param(format!("edge probability must lie in [0, 1], got {p}")));
    }
    let mut w = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen_bool(p) {
                w[[i, j]] = 1.0;
                w[[j, i]] = 1.0;
            }
        }
    }
    if n > 1 {
        for i in 0..n {
            if w.row(i).sum() == 0.0 {
                let j = (i + rng.gen_range(1..n)) % n;
                w[[i, j]] = 1.0;
                w[[j, i]] = 1.0;
            }
        }
    }
    Adjacency::new(w)
}

/// The low-pass-only control for `model`: degree one, Gegenbauer, with the
/// fixed response `1 + Â` (that is `2 - λ`).
pub fn low_pass_control(model: &ModelConfig) -> ModelConfig {
    let alpha = match model.basis {
        PolyBasis::Gegenbauer { alpha } if alpha > 0.0 => alpha,
        _ => 1.0,
    };
    ModelConfig {
        basis: PolyBasis::Gegenbauer { alpha },
        degree: 1,
        fixed_graph_filter: Some(vec![1.0, 1.0 / (2.0 * alpha)]),
        ..model.clone()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SignedReport {
    pub seed: u64,
    pub labels: Vec<usize>,
    /// Mean silhouette over test windows of the raw (normalized) inputs.
    pub input_silhouette: f64,
    pub tggc_silhouette: f64,
    pub control_silhouette: f64,
    pub tggc_metrics: Metrics,
    pub control_metrics: Metrics,
    /// Embeddings of the first test window, N×T×D.
    #[serde(skip)]
    pub tggc_embedding: Array3<f64>,
    #[serde(skip)]
    pub control_embedding: Array3<f64>,
}

fn flatten(z: &Array3<f64>) -> Array2<f64> {
    let (n, t, d) = z.dim();
    z.to_shape((n, t * d)).expect("contiguous").to_owned()
}

fn mean_silhouette(state: Option<&ModelState>, windows: &crate::data::WindowSet, labels: &[usize]) -> Result<(f64, Array3<f64>)> {
    let mut total = 0.0;
    let mut first = None;
    for b in 0..windows.len() {
        let x = windows.input(b);
        let z = match state {
            Some(s) => embed(s, &x)?,
            None => x,
        };
        total += silhouette(flatten(&z).view(), labels)?;
        first.get_or_insert(z);
    }
    Ok((total / windows.len() as f64, first.expect("nonempty test split")))
}

/// Trains the model and its low-pass control on sin/cos groups joined by a
/// label-blind random graph, and scores how well each model's embeddings
/// separate the two groups.
pub fn signed_relation(opts: &SignedOptions, model: &ModelConfig, train_cfg: &TrainConfig, seed: u64) -> Result<SignedReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ds = synth_signed_groups(opts.n_per_group, opts.length, opts.noise, rng.gen())?;
    ds.adjacency = Some(random_connectivity(ds.variables(), opts.edge_prob, &mut rng)?);
    let task = prepare_task(&ds, &opts.task)?;
    let labels = task.labels.clone().expect("generator attaches labels");
    let tggc_cfg = ModelConfig {
        adjacency: AdjacencyMode::Provided,
        lookback: opts.task.lookback,
        horizon: opts.task.horizon,
        dims: 1,
        ..model.clone()
    };
    let control_cfg = low_pass_control(&tggc_cfg);
    let train_seed: u64 = rng.gen();
    let (tggc, _) = fit(&tggc_cfg, &task, train_cfg, train_seed)?;
    let (control, _) = fit(&control_cfg, &task, train_cfg, train_seed)?;
    let (input_silhouette, _) = mean_silhouette(None, &task.test, &labels)?;
    let (tggc_silhouette, tggc_embedding) = mean_silhouette(Some(&tggc), &task.test, &labels)?;
    let (control_silhouette, control_embedding) = mean_silhouette(Some(&control), &task.test, &labels)?;
    Ok(SignedReport {
        seed,
        labels,
        input_silhouette,
        tggc_silhouette,
        control_silhouette,
        tggc_metrics: evaluate(&tggc, &task.test, Some(&task.norm))?,
        control_metrics: evaluate(&control, &task.test, Some(&task.norm))?,
        tggc_embedding,
        control_embedding,
    })
}

/// Long-format CSV `node_id,t,dim,value` of an N×T×D embedding.
pub fn write_embedding_csv<W: Write>(w: W, z: &Array3<f64>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["node_id", "t", "dim", "value"])?;
    for ((i, t, d), v) in z.indexed_iter() {
        out.serialize((i, t, d, v))?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_graph_has_no_isolated_nodes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = random_connectivity(12, 0.05, &mut rng).unwrap();
        assert!(a.weights().rows().into_iter().all(|r| r.sum() > 0.0));
    }

    #[test]
    fn control_is_a_fixed_low_pass() {
        let c = low_pass_control(&ModelConfig::default());
        c.validate().unwrap();
        assert_eq!(c.degree, 1);
        let coeffs = c.fixed_graph_filter.unwrap();
        // g(λ) = θ0 + θ1·2α(1-λ) must vanish at λ = 2 and be positive below.
        let g = |lambda: f64| coeffs[0] + coeffs[1] * 2.0 * (1.0 - lambda);
        assert!(g(2.0).abs() < 1e-15 && g(0.0) > 0.0 && g(1.0) > 0.0);
    }

    #[test]
    fn embedding_csv_rows() {
        let z = Array3::<f64>::zeros((3, 4, 2));
        let mut buf = Vec::new();
        write_embedding_csv(&mut buf, &z).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + 3 * 4 * 2);
    }
}
