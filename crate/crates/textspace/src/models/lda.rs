//! Latent Dirichlet allocation via collapsed Gibbs sampling.

use ndarray::Array2;
use rand::Rng;

use crate::error::{Error, Result};
use crate::seeding;
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy)]
pub struct LdaParams {
    pub k: usize,
    /// Symmetric document-topic prior; defaults to 50/K when None.
    pub alpha: Option<f64>,
    /// Symmetric topic-term prior.
    pub beta: f64,
    pub gibbs_iters: usize,
}

impl Default for LdaParams {
    fn default() -> Self {
        LdaParams {
            k: 2,
            alpha: None,
            beta: 0.01,
            gibbs_iters: 500,
        }
    }
}

pub struct LdaFit {
    /// m x K document-topic distributions (rows sum to 1).
    pub theta: Array2<f64>,
    /// K x n topic-term distributions (rows sum to 1).
    pub phi: Array2<f64>,
}

/// Collapsed Gibbs sampler over token-level topic assignments. Counts must be
/// non-negative integers; the smoothed estimates are read off the counters of
/// the final sweep.
pub fn gibbs(counts: &SparseMatrix, params: &LdaParams, seed: u64) -> Result<LdaFit> {
    let m = counts.n_rows();
    let n = counts.n_cols();
    let k = params.k;
    if k < 1 {
        return Err(Error::TopicCountOutOfRange { k, m, n });
    }
    if params.gibbs_iters < 1 {
        return Err(Error::invalid("gibbs_iters must be at least 1"));
    }
    let alpha = params.alpha.unwrap_or(50.0 / k as f64);
    let beta = params.beta;
    if alpha <= 0.0 || beta <= 0.0 {
        return Err(Error::invalid("priors must be positive"));
    }

    // expand counts into individual tokens, document-major
    let mut tokens: Vec<(usize, usize)> = Vec::new();
    for (r, c, v) in counts.iter() {
        if v < 0.0 || v.fract() != 0.0 {
            return Err(Error::NonIntegerCounts { row: r, col: c });
        }
        for _ in 0..v as usize {
            tokens.push((r, c));
        }
    }

    let mut rng = seeding::rng_from(seed);
    let mut z: Vec<usize> = (0..tokens.len()).map(|_| rng.random_range(0..k)).collect();
    let mut n_dk = vec![0f64; m * k];
    let mut n_kw = vec![0f64; k * n];
    let mut n_k = vec![0f64; k];
    let mut n_d = vec![0f64; m];
    for (t, &(d, w)) in tokens.iter().enumerate() {
        let topic = z[t];
        n_dk[d * k + topic] += 1.0;
        n_kw[topic * n + w] += 1.0;
        n_k[topic] += 1.0;
        n_d[d] += 1.0;
    }

    let n_beta = n as f64 * beta;
    let mut probs = vec![0.0; k];
    for _ in 0..params.gibbs_iters {
        for (t, &(d, w)) in tokens.iter().enumerate() {
            let old = z[t];
            n_dk[d * k + old] -= 1.0;
            n_kw[old * n + w] -= 1.0;
            n_k[old] -= 1.0;

            let mut total = 0.0;
            for topic in 0..k {
                let p = (n_dk[d * k + topic] + alpha) * (n_kw[topic * n + w] + beta)
                    / (n_k[topic] + n_beta);
                total += p;
                probs[topic] = total;
            }
            let draw = rng.random::<f64>() * total;
            let new = probs.iter().position(|&c| draw < c).unwrap_or(k - 1);

            z[t] = new;
            n_dk[d * k + new] += 1.0;
            n_kw[new * n + w] += 1.0;
            n_k[new] += 1.0;
        }
    }

    let k_alpha = k as f64 * alpha;
    let theta = Array2::from_shape_fn((m, k), |(d, topic)| {
        (n_dk[d * k + topic] + alpha) / (n_d[d] + k_alpha)
    });
    let phi = Array2::from_shape_fn((k, n), |(topic, w)| {
        (n_kw[topic * n + w] + beta) / (n_k[topic] + n_beta)
    });
    Ok(LdaFit { theta, phi })
}
