use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{FilterArgument, PolyBasis, MAX_DEGREE};
use crate::temporal::WeightSharing;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Graph convolution followed by coarse and fine frequency-domain filtering.
    #[default]
    Linear,
    /// Adds rectified-linear activations and replaces fine filtering with spectral attention.
    Nonlinear,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdjacencyMode {
    /// `|ρ|` between flattened training-split series.
    #[default]
    Pearson,
    /// Embedding, scaled dot product, row softmax, symmetrization.
    Learned,
    /// Supplied with the dataset.
    Provided,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeSelection {
    #[default]
    Lowest,
    /// Seeded uniform sample without replacement.
    Random,
}

/// Orthogonal transform used by the frequency-domain stages.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Projector {
    #[default]
    Dft,
    /// A fixed random Gaussian matrix and its inverse.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub blocks: usize,
    pub degree: usize,
    pub basis: PolyBasis,
    pub filter_argument: FilterArgument,
    pub modes: usize,
    pub mode_selection: ModeSelection,
    pub decomp_window: usize,
    pub variant: Variant,
    pub lookback: usize,
    pub horizon: usize,
    pub dims: usize,
    pub adjacency: AdjacencyMode,
    /// Embedding width of the learned adjacency.
    pub embed_dim: usize,
    /// Add each block's input to its output.
    pub residual: bool,
    /// One coefficient column for all dimensions instead of one per dimension.
    pub shared_coefficients: bool,
    pub coarse_sharing: WeightSharing,
    pub fine_sharing: WeightSharing,
    pub projector: Projector,
    pub coarse_fdm: bool,
    pub fine_fdm: bool,
    /// Nonlinear variant only: activations after graph convolution and in attention projections.
    pub relu: bool,
    /// Nonlinear variant only: spectral attention; otherwise the fine filter is used.
    pub attention: bool,
    /// Noise added to identity-initialized spectral weights; the per-entry
    /// standard deviation is `init_noise / √modes`.
    pub init_noise: f64,
    /// Graph polynomial coefficients, one per degree and shared by all
    /// dimensions, held fixed instead of trained.
    pub fixed_graph_filter: Option<Vec<f64>>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            blocks: 2,
            degree: 4,
            basis: PolyBasis::Gegenbauer { alpha: 1.0 },
            filter_argument: FilterArgument::NormalizedAdjacency,
            modes: 5,
            mode_selection: ModeSelection::Lowest,
            decomp_window: 5,
            variant: Variant::Linear,
            lookback: 12,
            horizon: 3,
            dims: 1,
            adjacency: AdjacencyMode::Pearson,
            embed_dim: 8,
            residual: true,
            shared_coefficients: false,
            coarse_sharing: WeightSharing::Individual,
            fine_sharing: WeightSharing::Individual,
            projector: Projector::Dft,
            coarse_fdm: true,
            fine_fdm: true,
            relu: true,
            attention: true,
            init_noise: 0.01,
            fixed_graph_filter: None,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.blocks == 0 {
            return fail("at least one block is required".into());
        }
        if self.degree > MAX_DEGREE {
            return fail(format!("degree {} exceeds {MAX_DEGREE}", self.degree));
        }
        self.basis.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.lookback < 2 {
            return fail("lookback must be at least 2".into());
        }
        if self.modes == 0 || self.modes > self.lookback {
            return fail(format!("modes must lie in 1..={}, got {}", self.lookback, self.modes));
        }
        if let Some(c) = &self.fixed_graph_filter {
            if c.len() != self.degree + 1 || c.iter().any(|v| !v.is_finite()) {
                return fail(format!("fixed graph filter needs {} finite coefficients", self.degree + 1));
            }
        }
        if self.horizon == 0 {
            return fail("horizon must be at least 1".into());
        }
        if self.dims == 0 {
            return fail("dims must be at least 1".into());
        }
        if self.decomp_window == 0 || self.decomp_window > self.lookback {
            return fail(format!("decomposition window must lie in 1..={}", self.lookback));
        }
        if self.adjacency == AdjacencyMode::Learned && self.embed_dim == 0 {
            return fail("learned adjacency needs a positive embedding width".into());
        }
        if !(self.init_noise >= 0.0 && self.init_noise.is_finite()) {
            return fail("init_noise must be finite and nonnegative".into());
        }
        Ok(())
    }

    /// Whether the block's final temporal stage is spectral attention.
    pub fn uses_attention(&self) -> bool {
        self.variant == Variant::Nonlinear && self.attention
    }

    pub fn uses_relu(&self) -> bool {
        self.variant == Variant::Nonlinear && self.relu
    }

    /// Whether the block contains a fine (decomposed) spectral filter.
    pub fn uses_fine_filter(&self) -> bool {
        self.fine_fdm && !self.uses_attention()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_roundtrip() {
        let c = ModelConfig::default();
        c.validate().unwrap();
        let text = serde_json::to_string(&c).unwrap();
        let back: ModelConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn partial_json_fills_defaults_and_rejects_unknown_keys() {
        let c: ModelConfig = serde_json::from_str(r#"{"blocks": 1, "basis": {"kind": "monomial"}}"#).unwrap();
        assert_eq!(c.blocks, 1);
        assert_eq!(c.degree, ModelConfig::default().degree);
        assert!(serde_json::from_str::<ModelConfig>(r#"{"blockz": 1}"#).is_err());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for c in [
            ModelConfig { blocks: 0, ..Default::default() },
            ModelConfig { modes: 13, ..Default::default() },
            ModelConfig { modes: 0, ..Default::default() },
            ModelConfig { horizon: 0, ..Default::default() },
            ModelConfig { decomp_window: 0, ..Default::default() },
            ModelConfig { basis: PolyBasis::Gegenbauer { alpha: -0.7 }, ..Default::default() },
        ] {
            assert!(matches!(c.validate(), Err(Error::Config(_))), "{c:?}");
        }
    }
}
