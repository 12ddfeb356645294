//! Datasets: CSV ingestion, normalization, chronological splits, sliding
//! windows, synthetic generators and the persistence baseline.

mod io;
mod synth;
mod transform;

pub use io::{load_csv, write_csv, CsvOptions, Layout, NanPolicy};
pub use synth::{synth_seasonal, synth_signed_groups, SeasonalOptions, SYNTH_PERIODS};
pub use transform::{
    make_windows, normalize, persistence_baseline, split, split_lengths, NormMethod, Normalization, WindowSet,
};

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::graph::Adjacency;

/// Multivariate series of shape (variables × length × dims).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub values: Array3<f64>,
    /// Graph shipped with the data, if any.
    pub adjacency: Option<Adjacency>,
    /// Per-variable group labels, if any.
    pub labels: Option<Vec<usize>>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, values: Array3<f64>) -> Self {
        Self { name: name.into(), values, adjacency: None, labels: None }
    }

    pub fn variables(&self) -> usize {
        self.values.dim().0
    }

    pub fn len(&self) -> usize {
        self.values.dim().1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dims(&self) -> usize {
        self.values.dim().2
    }
}

/// Provenance record written next to every derived dataset artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    /// (variables, length, dims)
    pub shape: [usize; 3],
    pub normalization: NormMethod,
    pub split_ratios: [f64; 3],
    pub seed: Option<u64>,
    pub labels: Option<Vec<usize>>,
}
