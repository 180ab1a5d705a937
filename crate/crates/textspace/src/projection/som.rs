//! Self-organizing map on a rectangular grid. Output positions are the
//! integer grid coordinates of each point's best matching unit.

use ndarray::Array2;
use rand::Rng;

use crate::error::{Error, Result};
use crate::seeding;

const LR_START: f64 = 0.5;
const LR_END: f64 = 0.01;
const RADIUS_END: f64 = 1.0;

/// Trains grid_m x grid_n units on the rows of `points` and returns m x 2
/// positions (x = grid column, y = grid row). Unit weights start uniform
/// within the per-dimension data range; the learning rate decays linearly
/// 0.5 -> 0.01 and the Gaussian neighborhood radius max(grid_m, grid_n)/2 -> 1
/// over the epochs. BMU ties go to the lowest unit index.
pub fn train(
    points: &Array2<f64>,
    grid_m: usize,
    grid_n: usize,
    epochs: usize,
    seed: u64,
) -> Result<Array2<f64>> {
    let (m, dim) = points.dim();
    if m < 2 {
        return Err(Error::TooFewPoints {
            method: "SOM",
            m,
            min: 2,
        });
    }
    if grid_m < 1 || grid_n < 1 || epochs < 1 {
        return Err(Error::invalid(
            "grid dimensions and epochs must be positive",
        ));
    }
    let units = grid_m * grid_n;

    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for row in points.rows() {
        for (c, &v) in row.iter().enumerate() {
            lo[c] = lo[c].min(v);
            hi[c] = hi[c].max(v);
        }
    }
    let mut rng = seeding::rng_from(seed);
    let mut weights = Array2::zeros((units, dim));
    for u in 0..units {
        for c in 0..dim {
            weights[[u, c]] = if hi[c] > lo[c] {
                rng.random_range(lo[c]..hi[c])
            } else {
                lo[c]
            };
        }
    }

    let radius_start = (grid_m.max(grid_n) as f64) / 2.0;
    for epoch in 0..epochs {
        let frac = if epochs > 1 {
            epoch as f64 / (epochs - 1) as f64
        } else {
            0.0
        };
        let lr = LR_START + (LR_END - LR_START) * frac;
        let radius = (radius_start + (RADIUS_END - radius_start) * frac).max(RADIUS_END);
        let two_r2 = 2.0 * radius * radius;

        for row in points.rows() {
            let bmu = best_matching_unit(&weights, row.as_slice().unwrap());
            let (bi, bj) = (bmu / grid_n, bmu % grid_n);
            for u in 0..units {
                let (ui, uj) = (u / grid_n, u % grid_n);
                let di = ui as f64 - bi as f64;
                let dj = uj as f64 - bj as f64;
                let h = (-(di * di + dj * dj) / two_r2).exp();
                let step = lr * h;
                for c in 0..dim {
                    weights[[u, c]] += step * (row[c] - weights[[u, c]]);
                }
            }
        }
    }

    let mut positions = Array2::zeros((m, 2));
    for (r, row) in points.rows().into_iter().enumerate() {
        let bmu = best_matching_unit(&weights, row.as_slice().unwrap());
        positions[[r, 0]] = (bmu % grid_n) as f64;
        positions[[r, 1]] = (bmu / grid_n) as f64;
    }
    Ok(positions)
}

fn best_matching_unit(weights: &Array2<f64>, x: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (u, w) in weights.rows().into_iter().enumerate() {
        let mut d = 0.0;
        for (a, b) in w.iter().zip(x) {
            let diff = a - b;
            d += diff * diff;
        }
        if d < best_d {
            best_d = d;
            best = u;
        }
    }
    best
}
