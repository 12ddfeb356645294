//! Gradients of the forecasting loss, minibatch training with Adam, and evaluation.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use ndarray::{Array3, Array4, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Adam, AdamConfig, CTensor, Tape};
use crate::data::{Normalization, WindowSet};
use crate::error::{Error, Result};
use crate::metrics::{mae, rmse};
use crate::model::{forward, forward_on_tape, BoundParams, ModelState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: AdamConfig,
    /// Stop after this many epochs without a better validation MAE; `None` disables.
    pub patience: Option<usize>,
    /// Reshuffle windows every epoch.
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 50, batch_size: 32, optimizer: AdamConfig::default(), patience: Some(15), shuffle: true }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        self.optimizer.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-window loss over the epoch's minibatches.
    pub train_loss: f64,
    pub val_mae: Option<f64>,
    pub val_rmse: Option<f64>,
    pub seconds: f64,
}

/// History of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRun {
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept (best validation MAE, else the last).
    pub best_epoch: usize,
    pub config: serde_json::Value,
}

impl TrainRun {
    pub fn train_losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.train_loss).collect()
    }

    /// CSV with columns `epoch,train_loss,val_mae,val_rmse,seconds`; missing validation is empty.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["epoch", "train_loss", "val_mae", "val_rmse", "seconds"])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for e in &self.epochs {
            out.write_record([
                e.epoch.to_string(),
                e.train_loss.to_string(),
                opt(e.val_mae),
                opt(e.val_rmse),
                format!("{:.6}", e.seconds),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Loss and parameter gradients for one window. Real parameters get real
/// gradients; complex ones get `∂L/∂Re + i ∂L/∂Im`.
pub fn gradients(state: &ModelState, x: &Array3<f64>, y: &Array3<f64>) -> Result<(f64, BTreeMap<String, CTensor>)> {
    let mut tape = Tape::new();
    let params = BoundParams::bind(&mut tape, state);
    let vars = forward_on_tape(&mut tape, state, &params, x)?;
    let loss = tape.mse(vars.prediction, &y.clone().into_dyn())?;
    let value = tape.value(loss).first().map(|z| z.re).unwrap_or(f64::NAN);
    if !value.is_finite() {
        return Err(Error::Numerical("loss is not finite".into()));
    }
    let grads = tape.backward(loss)?;
    let mut out = BTreeMap::new();
    for (name, var) in params.iter() {
        let p = &state.params[name];
        let mut g = grads.get_or_zeros(*var, &p.value);
        if !p.complex {
            g.mapv_inplace(|z| num_complex::Complex64::new(z.re, 0.0));
        }
        if g.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numerical(format!("non-finite gradient for parameter {name}")));
        }
        out.insert(name.clone(), g);
    }
    Ok((value, out))
}

/// Mean loss and mean gradients over the windows `batch`, reduced in order.
pub fn batch_gradients(state: &ModelState, windows: &WindowSet, batch: &[usize]) -> Result<(f64, BTreeMap<String, CTensor>)> {
    if batch.is_empty() {
        return Err(Error::Data("empty minibatch".into()));
    }
    let mut total = 0.0;
    let mut acc: BTreeMap<String, CTensor> = BTreeMap::new();
    for &b in batch {
        let (l, g) = gradients(state, &windows.input(b), &windows.target(b))?;
        total += l;
        for (k, v) in g {
            match acc.get_mut(&k) {
                Some(a) => *a += &v,
                None => {
                    acc.insert(k, v);
                }
            }
        }
    }
    let scale = 1.0 / batch.len() as f64;
    acc.values_mut().for_each(|g| g.mapv_inplace(|z| z * scale));
    Ok((total * scale, acc))
}

/// Forecasts for every window, shape (B, N, H, D).
pub fn predict(state: &ModelState, windows: &WindowSet) -> Result<Array4<f64>> {
    let (b, n, _, d) = windows.inputs.dim();
    let h = state.config.horizon;
    let mut out = Array4::zeros((b, n, h, d));
    for i in 0..b {
        out.index_axis_mut(Axis(0), i).assign(&forward(state, &windows.input(i))?);
    }
    Ok(out)
}

fn denormalize(x: &Array4<f64>, norm: Option<&Normalization>) -> Result<Array4<f64>> {
    let Some(norm) = norm else { return Ok(x.clone()) };
    let mut out = x.clone();
    for mut w in out.axis_iter_mut(Axis(0)) {
        let restored = norm.invert(&w.to_owned())?;
        w.assign(&restored);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mae: f64,
    pub rmse: f64,
}

/// MAE and RMSE over all windows, nodes, steps and dims, in original units when `norm` is given.
pub fn evaluate(state: &ModelState, windows: &WindowSet, norm: Option<&Normalization>) -> Result<Metrics> {
    if windows.is_empty() {
        return Err(Error::Data("cannot evaluate on an empty window set".into()));
    }
    let pred = denormalize(&predict(state, windows)?, norm)?;
    let target = denormalize(&windows.targets, norm)?;
    Ok(Metrics { mae: mae(&pred, &target)?, rmse: rmse(&pred, &target)? })
}

/// Error of a fixed forecast tensor, in original units when `norm` is given.
pub fn score(pred: &Array4<f64>, windows: &WindowSet, norm: Option<&Normalization>) -> Result<Metrics> {
    let pred = denormalize(pred, norm)?;
    let target = denormalize(&windows.targets, norm)?;
    Ok(Metrics { mae: mae(&pred, &target)?, rmse: rmse(&pred, &target)? })
}

/// Minibatch Adam training with seeded shuffling. With a validation set the
/// parameters of the best-validation epoch are restored at the end.
pub fn train(
    state: &mut ModelState,
    train_windows: &WindowSet,
    val: Option<(&WindowSet, Option<&Normalization>)>,
    config: &TrainConfig,
    seed: u64,
) -> Result<TrainRun> {
    config.validate()?;
    if train_windows.is_empty() {
        return Err(Error::Data("training set has no windows".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut adam = Adam::new(config.optimizer)?;
    let mut order: Vec<usize> = (0..train_windows.len()).collect();
    let mut records = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, ModelState)> = None;

    for epoch in 1..=config.epochs {
        let start = Instant::now();
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let (loss, mut grads) = batch_gradients(state, train_windows, batch)?;
            grads.retain(|name, _| state.is_trainable(name));
            loss_sum += loss * batch.len() as f64;
            adam.step(&mut state.params, &grads)?;
        }
        let train_loss = loss_sum / order.len() as f64;
        let (val_mae, val_rmse) = match val {
            Some((w, norm)) => {
                let m = evaluate(state, w, norm)?;
                (Some(m.mae), Some(m.rmse))
            }
            None => (None, None),
        };
        records.push(EpochRecord { epoch, train_loss, val_mae, val_rmse, seconds: start.elapsed().as_secs_f64() });

        if let Some(v) = val_mae {
            if best.as_ref().map_or(true, |(b, _, _)| v < *b) {
                best = Some((v, epoch, state.clone()));
            }
            let best_epoch = best.as_ref().map(|b| b.1).unwrap_or(epoch);
            if config.patience.is_some_and(|p| epoch - best_epoch >= p) {
                break;
            }
        }
    }
    let best_epoch = match best {
        Some((_, e, s)) => {
            *state = s;
            e
        }
        None => records.len(),
    };
    Ok(TrainRun { seed, epochs: records, best_epoch, config: serde_json::to_value(config)? })
}
