use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayD, IxDyn};
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::config::{AdjacencyMode, ModeSelection, ModelConfig, Projector};
use crate::autodiff::{Param, ParamSet};
use crate::error::{Error, Result};
use crate::graph::{normalized_adjacency, normalized_laplacian, Adjacency, FilterArgument};
use crate::temporal::{ModeSet, SpectralFilter};

pub(crate) const GRAPH_MATRIX: &str = "graph.matrix";
pub(crate) const MODES: &str = "modes";
pub(crate) const PROJECTOR_FORWARD: &str = "projector.forward";
pub(crate) const PROJECTOR_INVERSE: &str = "projector.inverse";
pub(crate) const ADJ_EMBED: &str = "adjacency.embed";
pub(crate) const HEAD: &str = "head.weight";

pub(crate) fn block_key(block: usize, name: &str) -> String {
    format!("block{block}.{name}")
}

/// Trainable parameters plus fixed buffers (graph filter matrix, mode indices,
/// random projector).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub config: ModelConfig,
    pub nodes: usize,
    pub params: ParamSet,
    pub buffers: BTreeMap<String, ArrayD<f64>>,
}

/// Values derived from buffers that every forward pass needs.
#[derive(Debug, Clone)]
pub(crate) struct Prepared {
    pub modes: Vec<usize>,
    pub graph_matrix: Option<ArrayD<C64>>,
    /// Rows of the orthogonal (or random) projection at the kept modes, S×T.
    pub analysis: Arc<Array2<C64>>,
    /// Inverse projection restricted to the kept modes, T×S.
    pub synthesis: Arc<Array2<C64>>,
}

impl ModelState {
    /// Whether the optimizer may update parameter `name`.
    pub fn is_trainable(&self, name: &str) -> bool {
        !(self.config.fixed_graph_filter.is_some() && name.ends_with(".theta"))
    }

    /// Fresh state. `adjacency` is required unless the adjacency is learned.
    pub fn init<R: Rng>(config: &ModelConfig, nodes: usize, adjacency: Option<&Adjacency>, rng: &mut R) -> Result<Self> {
        config.validate()?;
        if nodes == 0 {
            return Err(Error::Config("model needs at least one variable".into()));
        }
        let (t, d, s, k) = (config.lookback, config.dims, config.modes, config.degree);
        let mut params = ParamSet::new();
        let mut buffers = BTreeMap::new();

        let modes = match config.mode_selection {
            ModeSelection::Lowest => ModeSet::lowest(s, t)?,
            ModeSelection::Random => ModeSet::random(s, t, rng)?,
        };
        buffers.insert(MODES.to_string(), Array1::from_iter(modes.indices().iter().map(|&m| m as f64)).into_dyn());

        match config.adjacency {
            AdjacencyMode::Learned => {
                let std = 1.0 / ((t * d) as f64).sqrt();
                let normal = Normal::new(0.0, std).expect("positive std");
                let w = ArrayD::from_shape_fn(IxDyn(&[t * d, config.embed_dim]), |_| normal.sample(rng));
                params.insert(ADJ_EMBED.into(), Param::real(w));
            }
            AdjacencyMode::Pearson | AdjacencyMode::Provided => {
                let adj = adjacency.ok_or_else(|| Error::Config("an adjacency matrix is required for this mode".into()))?;
                if adj.n() != nodes {
                    return Err(Error::shape(format!("adjacency has {} nodes, data has {nodes}", adj.n())));
                }
                buffers.insert(GRAPH_MATRIX.into(), filter_matrix(adj, config.filter_argument).into_dyn());
            }
        }

        if config.projector == Projector::Random {
            let (p, inv) = random_projector(t, rng)?;
            buffers.insert(PROJECTOR_FORWARD.into(), p.into_dyn());
            buffers.insert(PROJECTOR_INVERSE.into(), inv.into_dyn());
        }

        let dtheta = if config.shared_coefficients { 1 } else { d };
        let ident = config.fixed_graph_filter.clone().unwrap_or_else(|| config.basis.identity_coefficients(k));
        // Each output mode sums S noisy products, so per-entry noise shrinks with √S.
        let noise = config.init_noise / (s as f64).sqrt();
        for b in 0..config.blocks {
            let theta = Array2::from_shape_fn((k + 1, dtheta), |(row, _)| ident[row]);
            params.insert(block_key(b, "theta"), Param::real(theta.into_dyn()));
            if config.coarse_fdm {
                let f = SpectralFilter::noisy_identity(modes.clone(), nodes, d, config.coarse_sharing, noise, rng);
                params.insert(block_key(b, "coarse"), Param::complex(f.weights.into_dyn()));
            }
            if config.uses_fine_filter() {
                let f = SpectralFilter::noisy_identity(modes.clone(), nodes, d, config.fine_sharing, noise, rng);
                params.insert(block_key(b, "fine"), Param::complex(f.weights.into_dyn()));
            }
            if config.uses_attention() {
                for name in ["attn_query", "attn_key", "attn_value"] {
                    params.insert(block_key(b, name), Param::real(Array2::<f64>::eye(t).into_dyn()));
                }
            }
        }

        // Persistence read-out: every horizon step copies the last input step,
        // scaled down by the growth of stacked identity blocks with residuals.
        let gain = if config.residual { 2f64.powi(config.blocks as i32) } else { 1.0 };
        let h = config.horizon;
        let head = Array2::from_shape_fn((t * d, h * d), |(r, c)| {
            let (step, dim) = (r / d, r % d);
            if step == t - 1 && c % d == dim {
                1.0 / gain
            } else {
                0.0
            }
        });
        params.insert(HEAD.into(), Param::real(head.into_dyn()));

        let state = Self { config: config.clone(), nodes, params, buffers };
        state.validate()?;
        Ok(state)
    }

    /// Checks parameter presence, shapes and finiteness against the config.
    pub fn validate(&self) -> Result<()> {
        let c = &self.config;
        c.validate()?;
        let (n, t, d, s, k) = (self.nodes, c.lookback, c.dims, c.modes, c.degree);
        let mut expected: BTreeMap<String, (Vec<usize>, bool)> = BTreeMap::new();
        let dtheta = if c.shared_coefficients { 1 } else { d };
        for b in 0..c.blocks {
            expected.insert(block_key(b, "theta"), (vec![k + 1, dtheta], false));
            if c.coarse_fdm {
                let (nw, dw) = c.coarse_sharing.extents(n, d);
                expected.insert(block_key(b, "coarse"), (vec![nw, dw, s, s], true));
            }
            if c.uses_fine_filter() {
                let (nw, dw) = c.fine_sharing.extents(n, d);
                expected.insert(block_key(b, "fine"), (vec![nw, dw, s, s], true));
            }
            if c.uses_attention() {
                for name in ["attn_query", "attn_key", "attn_value"] {
                    expected.insert(block_key(b, name), (vec![t, t], false));
                }
            }
        }
        if c.adjacency == AdjacencyMode::Learned {
            expected.insert(ADJ_EMBED.into(), (vec![t * d, c.embed_dim], false));
        }
        expected.insert(HEAD.into(), (vec![t * d, c.horizon * d], false));

        for (name, (shape, complex)) in &expected {
            let p = self.params.get(name).ok_or_else(|| Error::Config(format!("missing parameter {name}")))?;
            if p.value.shape() != shape.as_slice() || p.complex != *complex {
                return Err(Error::shape(format!("parameter {name} has shape {:?}, expected {shape:?}", p.value.shape())));
            }
            if p.value.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::Numerical(format!("parameter {name} is not finite")));
            }
        }
        if let Some(extra) = self.params.keys().find(|k| !expected.contains_key(*k)) {
            return Err(Error::Config(format!("unexpected parameter {extra}")));
        }

        let modes = self.buffer(MODES)?;
        if modes.shape() != [s] {
            return Err(Error::shape("mode buffer does not match the configured mode count"));
        }
        ModeSet::new(modes.iter().map(|&m| m as usize).collect(), t)?;
        if c.adjacency != AdjacencyMode::Learned && self.buffer(GRAPH_MATRIX)?.shape() != [n, n] {
            return Err(Error::shape("graph matrix does not match the node count"));
        }
        if c.projector == Projector::Random {
            for key in [PROJECTOR_FORWARD, PROJECTOR_INVERSE] {
                if self.buffer(key)?.shape() != [t, t] {
                    return Err(Error::shape(format!("{key} must be {t}x{t}")));
                }
            }
        }
        Ok(())
    }

    pub fn buffer(&self, key: &str) -> Result<&ArrayD<f64>> {
        self.buffers.get(key).ok_or_else(|| Error::Config(format!("missing buffer {key}")))
    }

    pub fn modes(&self) -> Result<ModeSet> {
        ModeSet::new(self.buffer(MODES)?.iter().map(|&m| m as usize).collect(), self.config.lookback)
    }

    /// Total number of trainable real scalars.
    pub fn parameter_count(&self) -> usize {
        self.params.values().map(Param::scalar_count).sum()
    }

    pub(crate) fn prepare(&self) -> Result<Prepared> {
        let modes = self.modes()?.indices().to_vec();
        let graph_matrix = match self.config.adjacency {
            AdjacencyMode::Learned => None,
            _ => Some(self.buffer(GRAPH_MATRIX)?.mapv(|v| C64::new(v, 0.0))),
        };
        let t = self.config.lookback;
        let (analysis, synthesis) = match self.config.projector {
            Projector::Dft => {
                let w = |k: usize, j: usize| 2.0 * std::f64::consts::PI * ((k * j) % t) as f64 / t as f64;
                let a = Array2::from_shape_fn((modes.len(), t), |(r, j)| C64::from_polar(1.0, -w(modes[r], j)));
                let s = Array2::from_shape_fn((t, modes.len()), |(j, r)| C64::from_polar(1.0 / t as f64, w(modes[r], j)));
                (a, s)
            }
            Projector::Random => {
                let load = |key: &str| -> Result<Array2<f64>> {
                    self.buffer(key)?.clone().into_shape_with_order((t, t)).map_err(|e| Error::shape(e.to_string()))
                };
                let (p, inv) = (load(PROJECTOR_FORWARD)?, load(PROJECTOR_INVERSE)?);
                let a = Array2::from_shape_fn((modes.len(), t), |(r, j)| C64::new(p[[modes[r], j]], 0.0));
                let s = Array2::from_shape_fn((t, modes.len()), |(j, r)| C64::new(inv[[j, modes[r]]], 0.0));
                (a, s)
            }
        };
        Ok(Prepared { modes, graph_matrix, analysis: Arc::new(analysis), synthesis: Arc::new(synthesis) })
    }
}

/// Matrix the graph polynomial is evaluated at.
pub fn filter_matrix(adj: &Adjacency, argument: FilterArgument) -> Array2<f64> {
    let l = normalized_laplacian(adj);
    match argument {
        FilterArgument::NormalizedAdjacency => normalized_adjacency(&l),
        FilterArgument::Laplacian => l,
    }
}

/// Gaussian `T×T` matrix with entries of variance `1/T`, and its inverse.
fn random_projector<R: Rng>(t: usize, rng: &mut R) -> Result<(Array2<f64>, Array2<f64>)> {
    let normal = Normal::new(0.0, 1.0 / (t as f64).sqrt()).expect("positive std");
    for _ in 0..16 {
        let p = Array2::from_shape_fn((t, t), |_| normal.sample(rng));
        let m = DMatrix::from_row_slice(t, t, p.as_slice().unwrap());
        if let Some(inv) = m.clone().try_inverse() {
            let residual = (&m * &inv - DMatrix::identity(t, t)).amax();
            if residual < 1e-8 {
                let inv = Array2::from_shape_fn((t, t), |(i, j)| inv[(i, j)]);
                return Ok((p, inv));
            }
        }
    }
    Err(Error::Numerical("could not draw a well-conditioned random projector".into()))
}
