use ndarray::Array2;

use super::spectrum::{GraphSpectrum, EIGEN_TOL};
use crate::error::{Error, Result};

/// Distribution of squared spectral energy over the Laplacian eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalDensity {
    /// Distinct eigenvalues, ascending.
    pub grid: Vec<f64>,
    /// Energy per unit λ around each grid point.
    pub density: Vec<f64>,
    /// `F(λ_i)`: energy at eigenvalues `≤ λ_i`.
    pub cumulative: Vec<f64>,
}

impl SignalDensity {
    /// Builds a density from per-point energies on an ascending grid in `[0, 2]`.
    ///
    /// Each point owns the cell between the midpoints to its neighbours,
    /// clipped to `[0, 2]`; density is energy divided by cell width.
    pub fn from_energies(grid: Vec<f64>, energies: &[f64]) -> Result<Self> {
        if grid.len() != energies.len() || grid.is_empty() {
            return Err(Error::shape("grid and energies must be nonempty and of equal length"));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("density grid must be strictly ascending"));
        }
        if energies.iter().any(|&e| e < 0.0 || !e.is_finite()) {
            return Err(Error::param("energies must be finite and nonnegative"));
        }
        let n = grid.len();
        let mut density = Vec::with_capacity(n);
        let mut cumulative = Vec::with_capacity(n);
        let mut acc = 0.0;
        for i in 0..n {
            let lo = if i == 0 { 0.0f64.min(grid[0]) } else { 0.5 * (grid[i - 1] + grid[i]) };
            let hi = if i + 1 == n { 2.0f64.max(grid[i]) } else { 0.5 * (grid[i] + grid[i + 1]) };
            let width = hi - lo;
            density.push(if width > 0.0 { energies[i] / width } else { 0.0 });
            acc += energies[i];
            cumulative.push(acc);
        }
        Ok(Self { grid, density, cumulative })
    }

    pub fn total_energy(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }
}

/// Cumulative squared energy of `Uᵀ x` over the eigenvalues, summed over dimensions.
/// Eigenvalues closer than `EIGEN_TOL` are merged into one grid point.
pub fn signal_density(spectrum: &GraphSpectrum, x: &Array2<f64>) -> Result<SignalDensity> {
    if x.nrows() != spectrum.n() {
        return Err(Error::shape(format!("signal has {} rows, spectrum has {}", x.nrows(), spectrum.n())));
    }
    let coeffs = spectrum.transform(x);
    let mut grid: Vec<f64> = Vec::new();
    let mut energies: Vec<f64> = Vec::new();
    for (i, &lam) in spectrum.eigenvalues.iter().enumerate() {
        let e: f64 = coeffs.row(i).iter().map(|v| v * v).sum();
        match grid.last() {
            Some(&last) if (lam - last).abs() < EIGEN_TOL => *energies.last_mut().unwrap() += e,
            _ => {
                grid.push(lam);
                energies.push(e);
            }
        }
    }
    SignalDensity::from_energies(grid, &energies)
}

/// Gegenbauer weight `(1 - x²)^{α - 1/2}`, with `x` pulled inside the open
/// interval so that endpoint singularities stay finite.
pub fn gegenbauer_weight(alpha: f64, x: f64) -> f64 {
    let x = x.clamp(-1.0 + 1e-9, 1.0 - 1e-9);
    (1.0 - x * x).powf(alpha - 0.5)
}

/// α values searched by [`fit_weight_alpha`].
pub const DEFAULT_ALPHA_GRID: (f64, f64, f64) = (-0.45, 5.0, 0.01);

/// Squared distance between the unit-sum density on `x = 1 - λ` and the
/// unit-sum Gegenbauer weight at the same points.
pub fn weight_fit_residual(density: &SignalDensity, alpha: f64) -> f64 {
    let total: f64 = density.density.iter().sum();
    let weights: Vec<f64> = density.grid.iter().map(|&l| gegenbauer_weight(alpha, 1.0 - l)).collect();
    let wsum: f64 = weights.iter().sum();
    density
        .density
        .iter()
        .zip(&weights)
        .map(|(d, w)| {
            let r = d / total - w / wsum;
            r * r
        })
        .sum()
}

pub fn fit_weight_alpha(density: &SignalDensity) -> Result<f64> {
    let (lo, hi, step) = DEFAULT_ALPHA_GRID;
    let n = ((hi - lo) / step).round() as usize;
    let grid: Vec<f64> = (0..=n).map(|i| lo + i as f64 * step).collect();
    fit_weight_alpha_on_grid(density, &grid)
}

/// Grid minimizer of [`weight_fit_residual`]; ties go to the smaller α.
pub fn fit_weight_alpha_on_grid(density: &SignalDensity, alphas: &[f64]) -> Result<f64> {
    let total: f64 = density.density.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Data("signal density is identically zero".into()));
    }
    let mut sorted = alphas.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best: Option<(f64, f64)> = None;
    for a in sorted {
        if a <= -0.5 {
            continue;
        }
        let r = weight_fit_residual(density, a);
        if best.map_or(true, |(_, br)| r < br) {
            best = Some((a, r));
        }
    }
    best.map(|(a, _)| a).ok_or_else(|| Error::param("no admissible alpha in grid"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{eigendecompose, normalized_laplacian, Adjacency};
    use ndarray::array;

    fn interior_grid(n: usize) -> Vec<f64> {
        (0..n).map(|i| 2.0 * (i as f64 + 0.5) / n as f64).collect()
    }

    #[test]
    fn k2_constant_signal_only_at_zero() {
        let adj = Adjacency::from_edges(2, &[(0, 1)]).unwrap();
        let spec = eigendecompose(&normalized_laplacian(&adj)).unwrap();
        let d = signal_density(&spec, &array![[1.0], [1.0]]).unwrap();
        assert_eq!(d.grid.len(), 2);
        assert!((d.cumulative[0] - 2.0).abs() < 1e-12);
        assert!((d.cumulative[1] - d.cumulative[0]).abs() < 1e-12);
    }

    #[test]
    fn first_eigenvector_energy_at_bottom() {
        let adj = Adjacency::from_edges(4, &[(0, 1), (1, 2), (2, 3), (0, 3), (0, 2)]).unwrap();
        let spec = eigendecompose(&normalized_laplacian(&adj)).unwrap();
        let x = spec.eigenvectors.column(0).to_owned().insert_axis(ndarray::Axis(1));
        let d = signal_density(&spec, &x).unwrap();
        assert!(d.density[0] > 0.0);
        assert!(d.density[1..].iter().all(|v| v.abs() < 1e-20));
        assert!((d.total_energy() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cumulative_endpoint_is_parseval() {
        let adj = Adjacency::from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (1, 4)]).unwrap();
        let spec = eigendecompose(&normalized_laplacian(&adj)).unwrap();
        let x = array![[0.3, -1.0], [2.0, 0.5], [-0.7, 0.2], [1.1, 1.1], [0.0, -0.4]];
        let d = signal_density(&spec, &x).unwrap();
        let want: f64 = x.iter().map(|v| v * v).sum();
        assert!((d.total_energy() - want).abs() < 1e-8);
        assert!(d.cumulative.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn self_fit_recovers_alpha() {
        let grid = interior_grid(200);
        let semicircle: Vec<f64> = grid.iter().map(|&l| gegenbauer_weight(1.0, 1.0 - l) * 0.01).collect();
        let d = SignalDensity::from_energies(grid.clone(), &semicircle).unwrap();
        assert!((fit_weight_alpha(&d).unwrap() - 1.0).abs() <= 0.011);

        let uniform = vec![0.01; grid.len()];
        let d = SignalDensity::from_energies(grid, &uniform).unwrap();
        assert!((fit_weight_alpha(&d).unwrap() - 0.5).abs() <= 0.011);
    }

    #[test]
    fn zero_density_is_an_error() {
        let d = SignalDensity::from_energies(vec![0.0, 1.0], &[0.0, 0.0]).unwrap();
        assert!(fit_weight_alpha(&d).is_err());
    }
}
