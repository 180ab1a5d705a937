//! Principal component scores via SVD of the column-centered data matrix.

use nalgebra::DMatrix;
use ndarray::Array2;

use crate::error::{Error, Result};

pub struct Pca {
    /// m x q component scores.
    pub scores: Array2<f64>,
    /// Explained variance fraction of each retained component.
    pub explained: Vec<f64>,
}

/// Keeps the smallest number of leading components whose cumulative explained
/// variance reaches `variance_fraction`. Component signs follow the
/// largest-magnitude-loading-positive convention.
pub fn pca_reduce(matrix: &Array2<f64>, variance_fraction: f64) -> Result<Pca> {
    if !(variance_fraction > 0.0 && variance_fraction <= 1.0) {
        return Err(Error::invalid("variance_fraction must be in (0, 1]"));
    }
    let (m, p) = matrix.dim();
    if m < 2 {
        return Err(Error::TooFewPoints {
            method: "PCA",
            m,
            min: 2,
        });
    }
    let mut centered = matrix.clone();
    for mut col in centered.columns_mut() {
        let mean = col.sum() / m as f64;
        col.mapv_inplace(|v| v - mean);
    }
    let a = DMatrix::from_fn(m, p, |r, c| centered[[r, c]]);
    let svd = a.svd(true, true);
    let u = svd
        .u
        .ok_or_else(|| Error::invalid("svd did not produce U"))?;
    let vt = svd
        .v_t
        .ok_or_else(|| Error::invalid("svd did not produce V^T"))?;
    let s = svd.singular_values;

    let variances: Vec<f64> = s.iter().map(|&x| x * x).collect();
    let total: f64 = variances.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    let target = variance_fraction * total;
    let mut cum = 0.0;
    let mut q = 0;
    for &v in &variances {
        cum += v;
        q += 1;
        // the slack absorbs float dust when the remaining components carry
        // (numerically) zero variance
        if cum >= target - 1e-9 * total {
            break;
        }
    }

    let mut scores = Array2::zeros((m, q));
    for j in 0..q {
        let mut best = 0;
        for c in 1..p {
            if vt[(j, c)].abs() > vt[(j, best)].abs() {
                best = c;
            }
        }
        let flip = if vt[(j, best)] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..m {
            scores[[r, j]] = flip * u[(r, j)] * s[j];
        }
    }
    let explained = variances[..q].iter().map(|&v| v / total).collect();
    Ok(Pca { scores, explained })
}
