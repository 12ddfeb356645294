use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::Serialize;

use super::{ablation_bases, fit, ForecastTask};
use crate::error::{Error, Result};
use crate::model::{ModelConfig, Projector, Variant};
use crate::temporal::WeightSharing;
use crate::train::{evaluate, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AblationAxis {
    /// Graph polynomial basis (A.1 to A.5).
    Basis,
    /// Weight sharing, projection and temporal-filter removal (B.1 to B.6).
    Structure,
    /// Nonlinear add-ons (C.1, C.2).
    Nonlinear,
}

impl AblationAxis {
    pub const ALL: [AblationAxis; 3] = [AblationAxis::Basis, AblationAxis::Structure, AblationAxis::Nonlinear];

    pub fn name(self) -> &'static str {
        match self {
            AblationAxis::Basis => "basis",
            AblationAxis::Structure => "structure",
            AblationAxis::Nonlinear => "nonlinear",
        }
    }
}

impl fmt::Display for AblationAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AblationAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|a| a.name() == s).ok_or_else(|| {
            let valid: Vec<&str> = Self::ALL.iter().map(|a| a.name()).collect();
            Error::Config(format!("unknown ablation axis '{s}'; valid axes: {}", valid.join(", ")))
        })
    }
}

/// One model variant of an ablation table.
#[derive(Debug, Clone)]
pub struct AblationVariant {
    pub id: String,
    pub label: String,
    pub config: ModelConfig,
}

fn variant(id: &str, label: &str, config: ModelConfig) -> AblationVariant {
    AblationVariant { id: id.into(), label: label.into(), config }
}

/// Variants of one axis derived from `base`. The structure and nonlinear
/// axes start with their reference model (`ref`); the basis axis has none
/// since the reference coincides with one of its rows.
pub fn ablation_variants(axis: AblationAxis, base: &ModelConfig) -> Vec<AblationVariant> {
    let with = |f: &dyn Fn(&mut ModelConfig)| {
        let mut c = base.clone();
        f(&mut c);
        c
    };
    match axis {
        AblationAxis::Basis => ablation_bases()
            .into_iter()
            .zip(["Monomial", "Bernstein", "Chebyshev", "Gegenbauer", "Jacobi"])
            .enumerate()
            .map(|(i, (basis, label))| variant(&format!("A.{}", i + 1), label, with(&|c| c.basis = basis)))
            .collect(),
        AblationAxis::Structure => {
            let linear = with(&|c| c.variant = Variant::Linear);
            let tweak = |f: &dyn Fn(&mut ModelConfig)| {
                let mut c = linear.clone();
                f(&mut c);
                c
            };
            vec![
                variant("ref", "TGGC", linear.clone()),
                variant("B.1", "shared graph coefficients across dimensions", tweak(&|c| c.shared_coefficients = true)),
                variant(
                    "B.2",
                    "shared temporal filters across dimensions",
                    tweak(&|c| {
                        c.coarse_sharing = WeightSharing::SharedDims;
                        c.fine_sharing = WeightSharing::SharedDims;
                    }),
                ),
                variant(
                    "B.3",
                    "shared temporal filters across variables",
                    tweak(&|c| {
                        c.coarse_sharing = WeightSharing::SharedVariables;
                        c.fine_sharing = WeightSharing::SharedVariables;
                    }),
                ),
                variant("B.4", "random projection instead of DFT", tweak(&|c| c.projector = Projector::Random)),
                variant("B.5", "without coarse temporal filter", tweak(&|c| c.coarse_fdm = false)),
                variant("B.6", "without fine temporal filter", tweak(&|c| c.fine_fdm = false)),
            ]
        }
        AblationAxis::Nonlinear => {
            let full = with(&|c| {
                c.variant = Variant::Nonlinear;
                c.relu = true;
                c.attention = true;
            });
            let mut no_relu = full.clone();
            no_relu.relu = false;
            let mut no_attn = full.clone();
            no_attn.attention = false;
            vec![
                variant("ref", "TGGC nonlinear", full),
                variant("C.1", "without nonlinearity", no_relu),
                variant("C.2", "without spectral attention", no_attn),
            ]
        }
    }
}

/// Test-split scores of one variant under one seed.
#[derive(Debug, Clone, Serialize)]
pub struct AblationRow {
    pub variant: String,
    pub label: String,
    pub seed: u64,
    pub mae: f64,
    pub rmse: f64,
    pub epochs: usize,
}

/// Trains every variant of `axis` under every seed and scores it on the test
/// split (original scale).
pub fn run_ablation(
    axis: AblationAxis,
    base: &ModelConfig,
    task: &ForecastTask,
    train_cfg: &TrainConfig,
    seeds: &[u64],
) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::new();
    for v in ablation_variants(axis, base) {
        for &seed in seeds {
            let (state, run) = fit(&v.config, task, train_cfg, seed)?;
            let m = evaluate(&state, &task.test, Some(&task.norm))?;
            rows.push(AblationRow {
                variant: v.id.clone(),
                label: v.label.clone(),
                seed,
                mae: m.mae,
                rmse: m.rmse,
                epochs: run.epochs.len(),
            });
        }
    }
    Ok(rows)
}

/// CSV `variant,label,seed,mae,rmse,epochs`.
pub fn write_ablation_csv<W: Write>(w: W, rows: &[AblationRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axes_parse_and_enumerate() {
        let base = ModelConfig::default();
        assert_eq!(ablation_variants("basis".parse().unwrap(), &base).len(), 5);
        assert_eq!(ablation_variants(AblationAxis::Structure, &base).len(), 7);
        assert_eq!(ablation_variants(AblationAxis::Nonlinear, &base).len(), 3);
        let err = "depth".parse::<AblationAxis>().unwrap_err().to_string();
        assert!(err.contains("basis, structure, nonlinear"), "{err}");
    }

    #[test]
    fn variants_validate() {
        let base = ModelConfig::default();
        for axis in AblationAxis::ALL {
            for v in ablation_variants(axis, &base) {
                v.config.validate().unwrap();
            }
        }
    }
}
