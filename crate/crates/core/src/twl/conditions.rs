use ndarray::Array2;
use serde::Serialize;

use super::Dtdg;
use crate::error::{Error, Result};
use crate::graph::{eigendecompose, normalized_laplacian, Adjacency};

/// Outcome of checking the spectral preconditions on a fixed-topology DTDG.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralReport {
    pub eigenvalues: Vec<f64>,
    /// Some pair of Laplacian eigenvalues lies within the eigen tolerance.
    pub repeated_eigenvalues: bool,
    /// For each snapshot, the eigen-indices whose spectral component of the
    /// features has norm below `tol`.
    pub missing_components: Vec<Vec<usize>>,
}

impl SpectralReport {
    /// Both preconditions hold: simple spectrum and no missing components.
    pub fn satisfied(&self) -> bool {
        !self.repeated_eigenvalues && self.missing_components.iter().all(Vec::is_empty)
    }
}

/// Checks the normalized Laplacian for repeated eigenvalues and every
/// snapshot's features for missing frequency components. Featureless
/// snapshots are treated as a single all-ones feature column.
pub fn check_spectral_conditions(g: &Dtdg, tol: f64) -> Result<SpectralReport> {
    if !g.topology_fixed() {
        return Err(Error::param("spectral conditions require a fixed topology across snapshots"));
    }
    if !(tol >= 0.0) {
        return Err(Error::param(format!("tolerance must be nonnegative, got {tol}")));
    }
    let n = g.nodes();
    let adj = Adjacency::from_edges(n, g.snapshots()[0].edges())?;
    let spectrum = eigendecompose(&normalized_laplacian(&adj))?;
    let missing_components = g
        .snapshots()
        .iter()
        .map(|s| {
            let x = if s.features().ncols() == 0 { Array2::ones((n, 1)) } else { s.features().clone() };
            let coeffs = spectrum.transform(&x);
            coeffs
                .rows()
                .into_iter()
                .enumerate()
                .filter(|(_, r)| r.dot(r).sqrt() < tol)
                .map(|(i, _)| i)
                .collect()
        })
        .collect();
    Ok(SpectralReport {
        eigenvalues: spectrum.eigenvalues.to_vec(),
        repeated_eigenvalues: spectrum.has_repeated_eigenvalues(),
        missing_components,
    })
}
