use std::collections::BTreeMap;

use ndarray::{Array2, Array3, ArrayD, Ix3};
use num_complex::Complex64 as C64;

use super::config::{AdjacencyMode, ModelConfig};
use super::state::{block_key, ModelState, Prepared, ADJ_EMBED, HEAD};
use crate::autodiff::{Tape, TapeAlgebra, Var};
use crate::error::{Error, Result};
use crate::graph::{basis_terms, Adjacency, FilterArgument};

/// Parameters registered as leaves on a tape.
#[derive(Debug, Clone)]
pub struct BoundParams {
    vars: BTreeMap<String, Var>,
}

impl BoundParams {
    pub fn bind(tape: &mut Tape, state: &ModelState) -> Self {
        let vars = state.params.iter().map(|(k, p)| (k.clone(), tape.leaf(p.value.clone()))).collect();
        Self { vars }
    }

    pub fn get(&self, name: &str) -> Result<Var> {
        self.vars.get(name).copied().ok_or_else(|| Error::Config(format!("missing parameter {name}")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Var)> {
        self.vars.iter()
    }
}

/// Tape nodes of one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct ForwardVars {
    pub input: Var,
    /// Final block output before the head.
    pub embedding: Var,
    pub prediction: Var,
    /// Filter matrix the graph polynomial is evaluated at.
    pub graph_matrix: Var,
}

struct Ctx<'a> {
    config: &'a ModelConfig,
    prepared: &'a Prepared,
    params: &'a BoundParams,
}

impl Ctx<'_> {
    /// Kept spectral components of `x`, N×S×D.
    fn to_spectrum(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        tape.project(x, self.prepared.analysis.clone())
    }

    /// Time-domain signal from kept components, N×T×D.
    fn from_spectrum(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        tape.project(x, self.prepared.synthesis.clone())
    }

    /// `Re T⁻¹(Pad(select(T z) W))` with `T` the configured projector.
    fn spectral_filter(&self, tape: &mut Tape, z: Var, weights: Var) -> Result<Var> {
        let sel = self.to_spectrum(tape, z)?;
        let mixed = tape.mode_mix(sel, weights)?;
        let back = self.from_spectrum(tape, mixed)?;
        Ok(tape.real_part(back))
    }

    fn graph_conv(&self, tape: &mut Tape, m: Var, x: Var, theta: Var) -> Result<Var> {
        let mut alg = TapeAlgebra::new(tape, m);
        let terms = basis_terms(&mut alg, &self.config.basis, self.config.degree, x);
        if let Some(e) = alg.error {
            return Err(e);
        }
        let mut scaled = Vec::with_capacity(terms.len());
        for (k, p) in terms.into_iter().enumerate() {
            scaled.push((1.0, tape.dim_scale(p, theta, k)?));
        }
        tape.combine(&scaled)
    }

    fn project_time(&self, tape: &mut Tape, x: Var, p: Var) -> Result<Var> {
        let y = tape.time_mix(x, p)?;
        Ok(if self.config.uses_relu() { tape.relu(y) } else { y })
    }

    fn attention(&self, tape: &mut Tape, block: usize, z: Var) -> Result<Var> {
        let trend = tape.moving_avg(z, self.config.decomp_window)?;
        let seasonal = tape.sub(z, trend)?;
        let q = self.project_time(tape, trend, self.params.get(&block_key(block, "attn_query"))?)?;
        let k = self.project_time(tape, seasonal, self.params.get(&block_key(block, "attn_key"))?)?;
        let v = self.project_time(tape, seasonal, self.params.get(&block_key(block, "attn_value"))?)?;
        let (q, k, v) = (self.to_spectrum(tape, q)?, self.to_spectrum(tape, k)?, self.to_spectrum(tape, v)?);
        let scores = tape.pair_scores(q, k)?;
        let scale = 1.0 / ((self.prepared.modes.len() * self.config.dims) as f64).sqrt();
        let scores = tape.scale(scores, scale)?;
        let weights = tape.softmax_rows(scores, false)?;
        let mixed = tape.batch_apply(weights, v)?;
        let back = self.from_spectrum(tape, mixed)?;
        let out = tape.real_part(back);
        tape.add(trend, out)
    }

    fn block(&self, tape: &mut Tape, block: usize, m: Var, x: Var) -> Result<Var> {
        let theta = self.params.get(&block_key(block, "theta"))?;
        let mut z = self.graph_conv(tape, m, x, theta)?;
        if self.config.uses_relu() {
            z = tape.relu(z);
        }
        if self.config.coarse_fdm {
            z = self.spectral_filter(tape, z, self.params.get(&block_key(block, "coarse"))?)?;
        }
        if self.config.uses_attention() {
            z = self.attention(tape, block, z)?;
        } else if self.config.fine_fdm {
            let trend = tape.moving_avg(z, self.config.decomp_window)?;
            let seasonal = tape.sub(z, trend)?;
            let filtered = self.spectral_filter(tape, seasonal, self.params.get(&block_key(block, "fine"))?)?;
            z = tape.add(trend, filtered)?;
        }
        Ok(z)
    }

    fn learned_matrix(&self, tape: &mut Tape, x: Var, n: usize) -> Result<Var> {
        let e = self.config.embed_dim;
        let emb = tape.node_linear(x, self.params.get(ADJ_EMBED)?, &[e])?;
        let emb = tape.reshape(emb, &[1, n, e])?;
        let scores = tape.pair_scores(emb, emb)?;
        let scores = tape.scale(scores, 1.0 / (e as f64).sqrt())?;
        let w = tape.softmax_rows(scores, true)?;
        let w = tape.reshape(w, &[n, n])?;
        let wt = tape.transpose(w)?;
        let sym = tape.combine(&[(0.5, w), (0.5, wt)])?;
        let a_hat = tape.normalize_adjacency(sym)?;
        match self.config.filter_argument {
            FilterArgument::NormalizedAdjacency => Ok(a_hat),
            FilterArgument::Laplacian => {
                let eye = tape.leaf(Array2::<C64>::eye(n).into_dyn());
                tape.sub(eye, a_hat)
            }
        }
    }
}

fn check_input(state: &ModelState, x: &Array3<f64>) -> Result<()> {
    let c = &state.config;
    let expected = (state.nodes, c.lookback, c.dims);
    if x.dim() != expected {
        return Err(Error::shape(format!("input is {:?}, model expects {expected:?}", x.dim())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("input contains non-finite values".into()));
    }
    Ok(())
}

/// Records one forward pass of `x` (N×T×D) on `tape`.
pub fn forward_on_tape(tape: &mut Tape, state: &ModelState, params: &BoundParams, x: &Array3<f64>) -> Result<ForwardVars> {
    check_input(state, x)?;
    let prepared = state.prepare()?;
    let config = &state.config;
    let ctx = Ctx { config, prepared: &prepared, params };
    let input = tape.leaf_real(&x.clone().into_dyn());
    let graph_matrix = match &prepared.graph_matrix {
        Some(m) => tape.leaf(m.clone()),
        None => ctx.learned_matrix(tape, input, state.nodes)?,
    };
    let mut z = input;
    for b in 0..config.blocks {
        let out = ctx.block(tape, b, graph_matrix, z)?;
        z = if config.residual { tape.add(out, z)? } else { out };
    }
    let prediction = tape.node_linear(z, params.get(HEAD)?, &[config.horizon, config.dims])?;
    Ok(ForwardVars { input, embedding: z, prediction, graph_matrix })
}

fn to_array3(a: ArrayD<f64>) -> Array3<f64> {
    a.into_dimensionality::<Ix3>().expect("rank-3 by construction")
}

/// Forecast `Ŷ` (N×H×D) for one input window.
pub fn forward(state: &ModelState, x: &Array3<f64>) -> Result<Array3<f64>> {
    let mut tape = Tape::new();
    let params = BoundParams::bind(&mut tape, state);
    let v = forward_on_tape(&mut tape, state, &params, x)?;
    Ok(to_array3(tape.real_value(v.prediction)))
}

/// Final-block representation (N×T×D) before the head.
pub fn embed(state: &ModelState, x: &Array3<f64>) -> Result<Array3<f64>> {
    let mut tape = Tape::new();
    let params = BoundParams::bind(&mut tape, state);
    let v = forward_on_tape(&mut tape, state, &params, x)?;
    Ok(to_array3(tape.real_value(v.embedding)))
}

/// Output of a single block without the residual connection.
pub fn tggc_block(state: &ModelState, block: usize, x: &Array3<f64>) -> Result<Array3<f64>> {
    check_input(state, x)?;
    if block >= state.config.blocks {
        return Err(Error::Config(format!("block {block} out of range")));
    }
    let prepared = state.prepare()?;
    let mut tape = Tape::new();
    let params = BoundParams::bind(&mut tape, state);
    let ctx = Ctx { config: &state.config, prepared: &prepared, params: &params };
    let input = tape.leaf_real(&x.clone().into_dyn());
    let m = match &prepared.graph_matrix {
        Some(m) => tape.leaf(m.clone()),
        None => ctx.learned_matrix(&mut tape, input, state.nodes)?,
    };
    let z = ctx.block(&mut tape, block, m, input)?;
    Ok(to_array3(tape.real_value(z)))
}

/// Adjacency the model uses for `x`: the stored graph for fixed modes, or the
/// symmetrized learned correlation.
pub fn latent_correlation(state: &ModelState, x: &Array3<f64>) -> Result<Adjacency> {
    match state.config.adjacency {
        AdjacencyMode::Learned => {
            check_input(state, x)?;
            let prepared = state.prepare()?;
            let mut tape = Tape::new();
            let params = BoundParams::bind(&mut tape, state);
            let ctx = Ctx { config: &state.config, prepared: &prepared, params: &params };
            let input = tape.leaf_real(&x.clone().into_dyn());
            let e = ctx.config.embed_dim;
            let n = state.nodes;
            let emb = tape.node_linear(input, params.get(ADJ_EMBED)?, &[e])?;
            let emb = tape.reshape(emb, &[1, n, e])?;
            let scores = tape.pair_scores(emb, emb)?;
            let scores = tape.scale(scores, 1.0 / (e as f64).sqrt())?;
            let w = tape.softmax_rows(scores, true)?;
            let w = tape.real_value(w).into_shape_with_order((n, n)).map_err(|e| Error::shape(e.to_string()))?;
            let sym = (&w + &w.t()) * 0.5;
            Adjacency::new(sym)
        }
        _ => Err(Error::Config(
            "fixed adjacency modes use the graph supplied at initialization; see pearson_adjacency".into(),
        )),
    }
}

/// `(1/H) Σ_h ‖Ŷ_h − Y_h‖²_F` with `H` the extent of axis 1.
pub fn loss(pred: &Array3<f64>, target: &Array3<f64>) -> Result<f64> {
    if pred.dim() != target.dim() {
        return Err(Error::shape(format!("prediction {:?} vs target {:?}", pred.dim(), target.dim())));
    }
    let h = pred.dim().1 as f64;
    Ok(pred.iter().zip(target).map(|(p, y)| (p - y) * (p - y)).sum::<f64>() / h)
}
