//! Forecast error metrics and cluster separation.

use ndarray::{ArrayBase, Data, Dimension, ArrayView2};

use crate::error::{Error, Result};

fn paired<S1, S2, D>(pred: &ArrayBase<S1, D>, target: &ArrayBase<S2, D>) -> Result<()>
where
    S1: Data<Elem = f64>,
    S2: Data<Elem = f64>,
    D: Dimension,
{
    if pred.shape() != target.shape() {
        return Err(Error::shape(format!("prediction {:?} vs target {:?}", pred.shape(), target.shape())));
    }
    if pred.is_empty() {
        return Err(Error::Data("cannot score an empty prediction".into()));
    }
    Ok(())
}

/// Mean absolute error over all entries.
pub fn mae<S1, S2, D>(pred: &ArrayBase<S1, D>, target: &ArrayBase<S2, D>) -> Result<f64>
where
    S1: Data<Elem = f64>,
    S2: Data<Elem = f64>,
    D: Dimension,
{
    paired(pred, target)?;
    Ok(pred.iter().zip(target.iter()).map(|(p, y)| (p - y).abs()).sum::<f64>() / pred.len() as f64)
}

/// Root mean squared error over all entries.
pub fn rmse<S1, S2, D>(pred: &ArrayBase<S1, D>, target: &ArrayBase<S2, D>) -> Result<f64>
where
    S1: Data<Elem = f64>,
    S2: Data<Elem = f64>,
    D: Dimension,
{
    paired(pred, target)?;
    Ok((pred.iter().zip(target.iter()).map(|(p, y)| (p - y) * (p - y)).sum::<f64>() / pred.len() as f64).sqrt())
}

/// Mean silhouette coefficient of `points` (one row per sample) under
/// Euclidean distance. Samples in singleton clusters score 0.
pub fn silhouette(points: ArrayView2<'_, f64>, labels: &[usize]) -> Result<f64> {
    let n = points.nrows();
    if labels.len() != n {
        return Err(Error::shape(format!("{} labels for {n} points", labels.len())));
    }
    let clusters = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; clusters];
    labels.iter().for_each(|&l| sizes[l] += 1);
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(Error::Data("silhouette needs at least two non-empty clusters".into()));
    }
    let dist = |i: usize, j: usize| {
        points.row(i).iter().zip(points.row(j).iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    };
    let mut total = 0.0;
    for i in 0..n {
        let mut sums = vec![0.0; clusters];
        for j in 0..n {
            if j != i {
                sums[labels[j]] += dist(i, j);
            }
        }
        let own = labels[i];
        if sizes[own] <= 1 {
            continue;
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..clusters)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    Ok(total / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr1, arr2};

    #[test]
    fn hand_evaluated_errors() {
        let p = arr1(&[1.0, 3.0]);
        let y = arr1(&[2.0, 5.0]);
        assert!((mae(&p, &y).unwrap() - 1.5).abs() < 1e-15);
        assert!((rmse(&p, &y).unwrap() - 2.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(mae(&y, &y).unwrap(), 0.0);
        assert!(mae(&arr1(&[1.0]), &y).is_err());
    }

    #[test]
    fn silhouette_of_separated_and_mixed_clusters() {
        // Two points per cluster on a line: a = 1, b = 10 for the outer points.
        let pts = arr2(&[[0.0], [1.0], [10.0], [11.0]]);
        let s = silhouette(pts.view(), &[0, 0, 1, 1]).unwrap();
        // Point 0: a = 1, b = 10.5; point 1: a = 1, b = 9.5 (and symmetric).
        let expected = ((9.5 / 10.5) + (8.5 / 9.5)) / 2.0;
        assert!((s - expected).abs() < 1e-12, "{s} vs {expected}");
        let swapped = silhouette(pts.view(), &[0, 1, 0, 1]).unwrap();
        assert!(swapped < 0.0);
        assert!(silhouette(pts.view(), &[0, 0, 0, 0]).is_err());
    }
}
