//! Metric MDS by stress majorization (SMACOF).

use ndarray::Array2;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::seeding;

/// Relative stress improvement below which iteration stops.
const REL_TOL: f64 = 1e-9;

pub struct MdsResult {
    pub positions: Array2<f64>,
    /// Raw stress after init and after every Guttman transform. Majorization
    /// guarantees this never increases.
    pub stress_trace: Vec<f64>,
}

/// Minimizes raw stress sum_{i<j} (delta_ij - d_ij)^2 from a seeded standard
/// normal start.
pub fn smacof(delta: &Array2<f64>, max_iter: usize, seed: u64) -> Result<MdsResult> {
    let m = delta.nrows();
    if m < 2 {
        return Err(Error::TooFewPoints {
            method: "MDS",
            m,
            min: 2,
        });
    }
    if max_iter < 1 {
        return Err(Error::invalid("max_iter must be at least 1"));
    }
    let mut rng = seeding::rng_from(seed);
    let mut x = Array2::from_shape_fn((m, 2), |_| {
        <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
    });

    let stress_of = |x: &Array2<f64>| {
        let mut s = 0.0;
        for i in 0..m {
            for j in (i + 1)..m {
                let d = point_dist(x, i, j);
                let diff = delta[[i, j]] - d;
                s += diff * diff;
            }
        }
        s
    };

    let mut trace = vec![stress_of(&x)];
    for _ in 0..max_iter {
        // Guttman transform: X' = (1/m) B(X) X
        let mut bx = Array2::zeros((m, 2));
        let mut b_diag = vec![0.0; m];
        for i in 0..m {
            for j in (i + 1)..m {
                let d = point_dist(&x, i, j);
                if d > 0.0 {
                    let b = delta[[i, j]] / d;
                    b_diag[i] += b;
                    b_diag[j] += b;
                    for c in 0..2 {
                        bx[[i, c]] -= b * x[[j, c]];
                        bx[[j, c]] -= b * x[[i, c]];
                    }
                }
            }
        }
        for i in 0..m {
            for c in 0..2 {
                bx[[i, c]] = (bx[[i, c]] + b_diag[i] * x[[i, c]]) / m as f64;
            }
        }
        x = bx;

        let s = stress_of(&x);
        let prev = *trace.last().unwrap();
        trace.push(s);
        if prev <= 0.0 || (prev - s) / prev < REL_TOL {
            break;
        }
    }
    Ok(MdsResult {
        positions: x,
        stress_trace: trace,
    })
}

fn point_dist(x: &Array2<f64>, i: usize, j: usize) -> f64 {
    let dx = x[[i, 0]] - x[[j, 0]];
    let dy = x[[i, 1]] - x[[j, 1]];
    (dx * dx + dy * dy).sqrt()
}
