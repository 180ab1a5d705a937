//! UMAP-style embedding from a precomputed distance matrix: fuzzy k-NN graph
//! construction, a low-dimensional kernel fitted to min_dist, and negative
//! sampling SGD.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::seeding;

const SIGMA_TOL: f64 = 1e-5;
const SIGMA_STEPS: usize = 100;
const NEGATIVE_SAMPLE_RATE: f64 = 5.0;
const INITIAL_ALPHA: f64 = 1.0;
const CLIP: f64 = 4.0;

#[derive(Debug, Clone, Copy)]
pub struct UmapParams {
    pub n_neighbors: usize,
    pub min_dist: f64,
    pub n_epochs: usize,
}

impl Default for UmapParams {
    fn default() -> Self {
        UmapParams {
            n_neighbors: 15,
            min_dist: 0.1,
            n_epochs: 200,
        }
    }
}

pub fn run(distances: &Array2<f64>, params: &UmapParams, seed: u64) -> Result<Array2<f64>> {
    let m = distances.nrows();
    let k = params.n_neighbors;
    if k < 2 || k >= m {
        return Err(Error::NeighborsInfeasible { k, m });
    }
    if params.n_epochs < 1 {
        return Err(Error::invalid("n_epochs must be at least 1"));
    }
    if params.min_dist < 0.0 {
        return Err(Error::invalid("min_dist must be non-negative"));
    }

    // k nearest neighbors per point, ties broken by index
    let mut knn: Vec<Vec<(usize, f64)>> = Vec::with_capacity(m);
    for i in 0..m {
        let mut order: Vec<usize> = (0..m).filter(|&j| j != i).collect();
        order.sort_by(|&a, &b| {
            distances[[i, a]]
                .partial_cmp(&distances[[i, b]])
                .unwrap()
                .then(a.cmp(&b))
        });
        knn.push(order[..k].iter().map(|&j| (j, distances[[i, j]])).collect());
    }

    // per-point smooth calibration: sum_j exp(-max(0, d - rho)/sigma) = log2(k)
    let target = (k as f64).log2();
    let mut memberships = vec![0.0; m * m];
    for i in 0..m {
        let rho = knn[i][0].1;
        let sigma = calibrate_sigma(&knn[i], rho, target);
        for &(j, d) in &knn[i] {
            memberships[i * m + j] = (-((d - rho).max(0.0)) / sigma).exp();
        }
    }

    // fuzzy union: w = a + b - ab
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            let a = memberships[i * m + j];
            let b = memberships[j * m + i];
            let w = a + b - a * b;
            if w > 0.0 {
                edges.push((i, j, w));
            }
        }
    }

    let (a, b) = fit_curve(params.min_dist);

    let mut rng = seeding::rng_from(seed);
    let mut y = vec![0.0; m * 2];
    for v in y.iter_mut() {
        *v = rng.random_range(-10.0..10.0);
    }

    optimize(&mut y, m, &edges, a, b, params.n_epochs, &mut rng);

    Ok(Array2::from_shape_fn((m, 2), |(r, c)| y[2 * r + c]))
}

fn calibrate_sigma(neighbors: &[(usize, f64)], rho: f64, target: f64) -> f64 {
    let mut sigma = 1.0;
    let mut lo = 0.0f64;
    let mut hi = f64::INFINITY;
    for _ in 0..SIGMA_STEPS {
        let sum: f64 = neighbors
            .iter()
            .map(|&(_, d)| (-((d - rho).max(0.0)) / sigma).exp())
            .sum();
        if (sum - target).abs() <= SIGMA_TOL {
            break;
        }
        if sum > target {
            hi = sigma;
            sigma = 0.5 * (lo + sigma);
        } else {
            lo = sigma;
            sigma = if hi.is_finite() {
                0.5 * (sigma + hi)
            } else {
                sigma * 2.0
            };
        }
    }
    sigma.max(1e-12)
}

/// Least-squares fit of 1/(1 + a x^(2b)) to the min_dist membership curve over
/// 300 evenly spaced distances in [0, 3]: coarse grid search, then three
/// rounds of local grid refinement.
pub fn fit_curve(min_dist: f64) -> (f64, f64) {
    let xs: Vec<f64> = (0..300).map(|i| 3.0 * i as f64 / 299.0).collect();
    let target: Vec<f64> = xs
        .iter()
        .map(|&x| {
            if x <= min_dist {
                1.0
            } else {
                (-(x - min_dist)).exp()
            }
        })
        .collect();
    let sse = |a: f64, b: f64| -> f64 {
        xs.iter()
            .zip(&target)
            .map(|(&x, &t)| {
                let f = 1.0 / (1.0 + a * x.powf(2.0 * b));
                (f - t) * (f - t)
            })
            .sum()
    };

    let mut best = (1.0, 1.0);
    let mut best_sse = f64::INFINITY;
    for ai in 0..60 {
        let a = 0.05 * 1.1f64.powi(ai);
        for bi in 0..45 {
            let b = 0.3 + 0.05 * bi as f64;
            let s = sse(a, b);
            if s < best_sse {
                best_sse = s;
                best = (a, b);
            }
        }
    }
    let mut span_a = best.0 * 0.5;
    let mut span_b = 0.1;
    for _ in 0..3 {
        let center = best;
        for ai in -10i32..=10 {
            let a = (center.0 + span_a * ai as f64 / 10.0).max(1e-3);
            for bi in -10i32..=10 {
                let b = (center.1 + span_b * bi as f64 / 10.0).max(1e-3);
                let s = sse(a, b);
                if s < best_sse {
                    best_sse = s;
                    best = (a, b);
                }
            }
        }
        span_a *= 0.2;
        span_b *= 0.2;
    }
    best
}

fn optimize(
    y: &mut [f64],
    m: usize,
    edges: &[(usize, usize, f64)],
    a: f64,
    b: f64,
    n_epochs: usize,
    rng: &mut ChaCha8Rng,
) {
    let max_w = edges.iter().map(|&(_, _, w)| w).fold(0.0f64, f64::max);
    if max_w <= 0.0 {
        return;
    }
    // an edge of weight w fires every max_w / w epochs
    let epochs_per_sample: Vec<f64> = edges.iter().map(|&(_, _, w)| max_w / w).collect();
    let mut next_sample: Vec<f64> = epochs_per_sample.clone();
    let mut next_negative: Vec<f64> = epochs_per_sample
        .iter()
        .map(|&e| e / NEGATIVE_SAMPLE_RATE)
        .collect();

    for epoch in 1..=n_epochs {
        let alpha = INITIAL_ALPHA * (1.0 - (epoch - 1) as f64 / n_epochs as f64);
        let en = epoch as f64;
        for (e, &(i, j, _)) in edges.iter().enumerate() {
            if next_sample[e] > en {
                continue;
            }
            // attraction along the edge; both endpoints move
            let (dx, dy) = (y[2 * i] - y[2 * j], y[2 * i + 1] - y[2 * j + 1]);
            let d2 = dx * dx + dy * dy;
            if d2 > 0.0 {
                let coeff = (-2.0 * a * b * d2.powf(b - 1.0)) / (1.0 + a * d2.powf(b));
                let gx = (coeff * dx).clamp(-CLIP, CLIP);
                let gy = (coeff * dy).clamp(-CLIP, CLIP);
                y[2 * i] += alpha * gx;
                y[2 * i + 1] += alpha * gy;
                y[2 * j] -= alpha * gx;
                y[2 * j + 1] -= alpha * gy;
            }
            next_sample[e] += epochs_per_sample[e];

            // negative samples push the head away from random points
            let eps_neg = epochs_per_sample[e] / NEGATIVE_SAMPLE_RATE;
            let n_neg = ((en - next_negative[e]) / eps_neg).max(0.0) as usize;
            for _ in 0..n_neg {
                let other = rng.random_range(0..m);
                if other == i {
                    continue;
                }
                let (dx, dy) = (y[2 * i] - y[2 * other], y[2 * i + 1] - y[2 * other + 1]);
                let d2 = dx * dx + dy * dy;
                let coeff = (2.0 * b) / ((0.001 + d2) * (1.0 + a * d2.powf(b)));
                let gx = if d2 > 0.0 {
                    (coeff * dx).clamp(-CLIP, CLIP)
                } else {
                    CLIP
                };
                let gy = if d2 > 0.0 {
                    (coeff * dy).clamp(-CLIP, CLIP)
                } else {
                    0.0
                };
                y[2 * i] += alpha * gx;
                y[2 * i + 1] += alpha * gy;
            }
            next_negative[e] += n_neg as f64 * eps_neg;
        }
    }
}
