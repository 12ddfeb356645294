//! Effective run configuration: built-in defaults, deep-merged with the
//! config file, then with `--set` overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use spectemp::data::{CsvOptions, SeasonalOptions};
use spectemp::experiments::{desk_preset, AblationAxis, SignedOptions, TaskOptions, TheoryOptions};
use spectemp::model::ModelConfig;
use spectemp::train::TrainConfig;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    /// Grouped seasonal series generated from the run seed.
    Seasonal(SeasonalOptions),
    /// Plain numeric CSV.
    Csv {
        path: PathBuf,
        #[serde(default)]
        options: CsvOptions,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblationSettings {
    pub axis: String,
    /// Number of seeds, counted up from the run seed.
    pub repeats: usize,
}

impl Default for AblationSettings {
    fn default() -> Self {
        Self { axis: "basis".into(), repeats: 5 }
    }
}

impl AblationSettings {
    pub fn axis(&self) -> Result<AblationAxis, CliError> {
        self.axis.parse().map_err(CliError::from)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TwlSettings {
    /// DTDG files; when both are absent the two shipped fixtures are used.
    pub left: Option<PathBuf>,
    pub right: Option<PathBuf>,
    /// Refinement cap; defaults to nodes × snapshots.
    pub steps: Option<usize>,
    /// Eigenvalue tolerance of the spectral-condition check.
    pub tolerance: f64,
}

impl Default for TwlSettings {
    fn default() -> Self {
        Self { left: None, right: None, steps: None, tolerance: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetSpec,
    pub task: TaskOptions,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub ablation: AblationSettings,
    pub theory: TheoryOptions,
    pub signed: SignedOptions,
    pub twl: TwlSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        let (model, train) = desk_preset();
        Self {
            dataset: DatasetSpec::Seasonal(SeasonalOptions::default()),
            task: TaskOptions::default(),
            model,
            train,
            ablation: AblationSettings::default(),
            theory: TheoryOptions::default(),
            signed: SignedOptions::default(),
            twl: TwlSettings::default(),
        }
    }
}

/// Recursive merge; objects whose `kind` tags differ are replaced whole.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            let retagged = matches!((b.get("kind"), p.get("kind")), (Some(x), Some(y)) if x != y);
            if retagged {
                *b = p;
                return;
            }
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, p) => *b = p,
    }
}

/// Applies `a.b.c=value`. The value is read as JSON when it parses, else
/// as a bare string. Changing a `kind` tag drops the sibling fields.
fn apply_override(root: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::usage(format!("override '{assignment}' is not of the form key=value")))?;
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::usage(format!("override key '{path}' has an empty segment")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let (last, parents) = keys.split_last().expect("nonempty");
    let mut node = root;
    for k in parents {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| CliError::usage(format!("override '{path}': '{k}' is not inside an object")))?;
        node = obj.entry(k.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    let obj = node
        .as_object_mut()
        .ok_or_else(|| CliError::usage(format!("override '{path}' does not address an object field")))?;
    if *last == "kind" && obj.get("kind").is_some_and(|old| *old != value) {
        obj.clear();
    }
    obj.insert(last.to_string(), value);
    Ok(())
}

/// Defaults, then the file, then overrides, validated into a [`RunConfig`].
pub fn resolve(file: &Path, overrides: &[String]) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(file)
        .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", file.display())))?;
    let patch: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("config {} is not valid JSON: {e}", file.display())))?;
    if !patch.is_object() {
        return Err(CliError::usage(format!("config {} must hold a JSON object", file.display())));
    }
    let mut root = serde_json::to_value(RunConfig::default()).expect("defaults serialize");
    merge(&mut root, patch);
    for o in overrides {
        apply_override(&mut root, o)?;
    }
    let cfg: RunConfig = serde_json::from_value(root).map_err(|e| CliError::usage(format!("invalid config: {e}")))?;
    cfg.train.validate()?;
    cfg.ablation.axis()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_and_retagging() {
        let mut v = serde_json::to_value(RunConfig::default()).unwrap();
        apply_override(&mut v, "model.degree=3").unwrap();
        apply_override(&mut v, "model.basis.kind=monomial").unwrap();
        apply_override(&mut v, "ablation.axis=structure").unwrap();
        let cfg: RunConfig = serde_json::from_value(v).unwrap();
        assert_eq!(cfg.model.degree, 3);
        assert_eq!(cfg.model.basis, spectemp::graph::PolyBasis::Monomial);
        assert_eq!(cfg.ablation.axis, "structure");
    }

    #[test]
    fn file_patch_replaces_dataset_of_other_kind() {
        let mut v = serde_json::to_value(RunConfig::default()).unwrap();
        merge(&mut v, serde_json::json!({"dataset": {"kind": "csv", "path": "x.csv"}}));
        let cfg: RunConfig = serde_json::from_value(v).unwrap();
        assert!(matches!(cfg.dataset, DatasetSpec::Csv { .. }));
    }

    #[test]
    fn malformed_override_is_a_usage_error() {
        let mut v = serde_json::to_value(RunConfig::default()).unwrap();
        assert_eq!(apply_override(&mut v, "model.degree").unwrap_err().code, 2);
        assert_eq!(apply_override(&mut v, "model..degree=1").unwrap_err().code, 2);
    }
}
