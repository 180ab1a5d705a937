//! Exact t-SNE on a precomputed distance matrix.
//!
//! Gaussian affinities are calibrated per point by binary search on the
//! precision until 2^entropy matches the requested perplexity; the embedding
//! minimizes KL(P || Q) under the Student-t kernel by momentum gradient
//! descent with early exaggeration.

use ndarray::Array2;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::seeding;

const PERPLEXITY_TOL: f64 = 1e-5;
const CALIBRATION_STEPS: usize = 200;
const EXAGGERATION: f64 = 12.0;
const MOMENTUM_SWITCH: usize = 250;
const P_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
pub struct TsneParams {
    pub perplexity: f64,
    pub n_iter: usize,
    pub learning_rate: f64,
}

impl Default for TsneParams {
    fn default() -> Self {
        TsneParams {
            perplexity: 30.0,
            n_iter: 1000,
            learning_rate: 200.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TsneDiagnostics {
    /// Largest |2^entropy - perplexity| over all points after calibration.
    pub max_perplexity_error: f64,
    /// KL(P || Q) right after the first iteration that used plain (not
    /// exaggerated) affinities.
    pub kl_first_plain: f64,
    /// KL(P || Q) after the last iteration.
    pub kl_final: f64,
}

pub fn run(
    distances: &Array2<f64>,
    params: &TsneParams,
    seed: u64,
) -> Result<(Array2<f64>, TsneDiagnostics)> {
    let m = distances.nrows();
    if m < 4 {
        return Err(Error::TooFewPoints {
            method: "t-SNE",
            m,
            min: 4,
        });
    }
    if params.n_iter < 1 {
        return Err(Error::invalid("n_iter must be at least 1"));
    }
    if params.learning_rate <= 0.0 {
        return Err(Error::invalid("learning_rate must be positive"));
    }
    let u = params.perplexity;
    if !(2.0..=(m - 1) as f64).contains(&u) {
        return Err(Error::PerplexityInfeasible { perplexity: u, m });
    }

    // conditional affinities from squared input distances
    let mut p = vec![0.0; m * m];
    let mut max_err = 0.0f64;
    let mut sq = vec![0.0; m];
    for i in 0..m {
        for j in 0..m {
            let d = distances[[i, j]];
            sq[j] = d * d;
        }
        if (0..m).all(|j| j == i || sq[j] == 0.0) {
            return Err(Error::ZeroVarianceRow { row: i });
        }
        let err = calibrate_row(&sq, i, u, &mut p[i * m..(i + 1) * m]);
        max_err = max_err.max(err);
    }

    // symmetrize: p_ij = (p_{j|i} + p_{i|j}) / 2m, floored for stability
    let mut pj = Array2::zeros((m, m));
    for i in 0..m {
        for j in 0..m {
            if i != j {
                pj[[i, j]] = ((p[i * m + j] + p[j * m + i]) / (2.0 * m as f64)).max(P_FLOOR);
            }
        }
    }

    let mut rng = seeding::rng_from(seed);
    let mut y = vec![0.0; m * 2];
    for v in y.iter_mut() {
        *v = 1e-4 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
    }
    let mut vel = vec![0.0; m * 2];
    let mut w = vec![0.0; m * m];

    let exagg_iters = MOMENTUM_SWITCH.min(params.n_iter / 4);
    let mut kl_first_plain = f64::NAN;
    let mut kl_final = f64::NAN;

    for it in 0..params.n_iter {
        // Student-t kernel weights and their total
        let mut w_sum = 0.0;
        for i in 0..m {
            for j in (i + 1)..m {
                let dx = y[2 * i] - y[2 * j];
                let dy = y[2 * i + 1] - y[2 * j + 1];
                let wij = 1.0 / (1.0 + dx * dx + dy * dy);
                w[i * m + j] = wij;
                w[j * m + i] = wij;
                w_sum += 2.0 * wij;
            }
        }

        let exagg = if it < exagg_iters { EXAGGERATION } else { 1.0 };
        let momentum = if it < MOMENTUM_SWITCH { 0.5 } else { 0.8 };

        for i in 0..m {
            let mut gx = 0.0;
            let mut gy = 0.0;
            for j in 0..m {
                if i == j {
                    continue;
                }
                let wij = w[i * m + j];
                let q = (wij / w_sum).max(P_FLOOR);
                let coeff = 4.0 * (exagg * pj[[i, j]] - q) * wij;
                gx += coeff * (y[2 * i] - y[2 * j]);
                gy += coeff * (y[2 * i + 1] - y[2 * j + 1]);
            }
            vel[2 * i] = momentum * vel[2 * i] - params.learning_rate * gx;
            vel[2 * i + 1] = momentum * vel[2 * i + 1] - params.learning_rate * gy;
        }
        let mut mean = [0.0, 0.0];
        for i in 0..m {
            y[2 * i] += vel[2 * i];
            y[2 * i + 1] += vel[2 * i + 1];
            mean[0] += y[2 * i];
            mean[1] += y[2 * i + 1];
        }
        mean[0] /= m as f64;
        mean[1] /= m as f64;
        for i in 0..m {
            y[2 * i] -= mean[0];
            y[2 * i + 1] -= mean[1];
        }

        if it == exagg_iters || it + 1 == params.n_iter {
            let kl = kl_divergence(&pj, &y, m);
            if it == exagg_iters {
                kl_first_plain = kl;
            }
            if it + 1 == params.n_iter {
                kl_final = kl;
            }
        }
    }

    let positions = Array2::from_shape_fn((m, 2), |(r, c)| y[2 * r + c]);
    Ok((
        positions,
        TsneDiagnostics {
            max_perplexity_error: max_err,
            kl_first_plain,
            kl_final,
        },
    ))
}

/// Binary search on the Gaussian precision for one row; writes normalized
/// conditional affinities into `out` and returns |2^entropy - target|.
fn calibrate_row(sq: &[f64], i: usize, target: f64, out: &mut [f64]) -> f64 {
    let mut beta = 1.0;
    let mut lo = 0.0f64;
    let mut hi = f64::INFINITY;
    let mut err = f64::INFINITY;
    for _ in 0..CALIBRATION_STEPS {
        let mut sum = 0.0;
        let mut weighted = 0.0;
        for (j, &d2) in sq.iter().enumerate() {
            if j == i {
                out[j] = 0.0;
                continue;
            }
            let e = (-beta * d2).exp();
            out[j] = e;
            sum += e;
            weighted += e * d2;
        }
        // entropy in nats: ln(sum) + beta * E[d^2]; perplexity = e^entropy
        let perp = if sum > 0.0 {
            (sum.ln() + beta * weighted / sum).exp()
        } else {
            1.0
        };
        err = (perp - target).abs();
        if err <= PERPLEXITY_TOL {
            for v in out.iter_mut() {
                *v /= sum;
            }
            return err;
        }
        if perp > target {
            lo = beta;
            beta = if hi.is_finite() {
                0.5 * (beta + hi)
            } else {
                beta * 2.0
            };
        } else {
            hi = beta;
            beta = 0.5 * (lo + beta);
        }
    }
    let sum: f64 = out.iter().sum();
    if sum > 0.0 {
        for v in out.iter_mut() {
            *v /= sum;
        }
    }
    err
}

fn kl_divergence(p: &Array2<f64>, y: &[f64], m: usize) -> f64 {
    let mut w_sum = 0.0;
    for i in 0..m {
        for j in (i + 1)..m {
            let dx = y[2 * i] - y[2 * j];
            let dy = y[2 * i + 1] - y[2 * j + 1];
            w_sum += 2.0 / (1.0 + dx * dx + dy * dy);
        }
    }
    let mut kl = 0.0;
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            let pij = p[[i, j]];
            if pij > 0.0 {
                let dx = y[2 * i] - y[2 * j];
                let dy = y[2 * i + 1] - y[2 * j + 1];
                let q = (1.0 / (1.0 + dx * dx + dy * dy) / w_sum).max(P_FLOOR);
                kl += pij * (pij / q).ln();
            }
        }
    }
    kl
}
