//! Latent semantic indexing: truncated SVD of the document-term matrix.

use nalgebra::DMatrix;
use ndarray::Array2;

use crate::error::{Error, Result};

/// Returns (document coordinates U_K * Sigma_K, topic-term rows V_K^T).
///
/// Components are ordered by descending singular value. Each component's sign
/// is fixed so that its largest-magnitude term loading is positive (lowest
/// index wins ties), which makes the factorization reproducible across
/// backends.
pub fn factorize(dense: &Array2<f64>, k: usize) -> Result<(Array2<f64>, Array2<f64>)> {
    let (m, n) = dense.dim();
    let a = DMatrix::from_fn(m, n, |r, c| dense[[r, c]]);
    let svd = a.svd(true, true);
    let u = svd
        .u
        .ok_or_else(|| Error::invalid("svd did not produce U"))?;
    let vt = svd
        .v_t
        .ok_or_else(|| Error::invalid("svd did not produce V^T"))?;
    let s = svd.singular_values;
    if k > s.len() {
        return Err(Error::TopicCountOutOfRange { k, m, n });
    }

    let mut docs = Array2::zeros((m, k));
    let mut topics = Array2::zeros((k, n));
    for j in 0..k {
        let mut best = 0;
        for c in 1..n {
            if vt[(j, c)].abs() > vt[(j, best)].abs() {
                best = c;
            }
        }
        let flip = if vt[(j, best)] < 0.0 { -1.0 } else { 1.0 };
        for c in 0..n {
            topics[[j, c]] = flip * vt[(j, c)];
        }
        for r in 0..m {
            docs[[r, j]] = flip * u[(r, j)] * s[j];
        }
    }
    Ok((docs, topics))
}
