//! Non-negative matrix factorization with Frobenius-norm multiplicative
//! updates.

use ndarray::Array2;
use rand::Rng;

use crate::error::{Error, Result};
use crate::seeding;

const DIV_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
pub struct NmfParams {
    pub k: usize,
    pub max_iter: usize,
    /// Stop once the relative change of the objective falls below this.
    pub tol: f64,
}

impl Default for NmfParams {
    fn default() -> Self {
        NmfParams {
            k: 2,
            max_iter: 300,
            tol: 1e-9,
        }
    }
}

pub struct NmfFit {
    pub w: Array2<f64>,
    pub h: Array2<f64>,
    /// Frobenius norm of A - WH after init and after every update sweep.
    pub objective_trace: Vec<f64>,
}

/// Both factors start uniform in (0, 1] scaled by sqrt(mean(A)/k), the usual
/// scaling that puts the initial product on the data's magnitude.
pub fn factorize(a: &Array2<f64>, params: &NmfParams, seed: u64) -> Result<NmfFit> {
    let (m, n) = a.dim();
    let k = params.k;
    if a.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::invalid(
            "matrix entries must be finite and non-negative",
        ));
    }
    let mean = a.sum() / (m * n) as f64;
    let scale = (mean / k as f64).sqrt().max(DIV_EPS);
    let mut rng = seeding::rng_from(seed);
    // 1 - random() lies in (0, 1]
    let mut w = Array2::from_shape_fn((m, k), |_| (1.0 - rng.random::<f64>()) * scale);
    let mut h = Array2::from_shape_fn((k, n), |_| (1.0 - rng.random::<f64>()) * scale);

    let objective = |w: &Array2<f64>, h: &Array2<f64>| -> f64 {
        let diff = a - &w.dot(h);
        diff.iter().map(|v| v * v).sum::<f64>().sqrt()
    };

    let mut trace = vec![objective(&w, &h)];
    for _ in 0..params.max_iter {
        // H <- H .* (W^T A) ./ (W^T W H)
        let wt = w.t();
        let numer = wt.dot(a);
        let denom = wt.dot(&w).dot(&h);
        ndarray::Zip::from(&mut h)
            .and(&numer)
            .and(&denom)
            .for_each(|h, &n, &d| {
                *h *= n / (d + DIV_EPS);
            });
        // W <- W .* (A H^T) ./ (W H H^T)
        let ht = h.t();
        let numer = a.dot(&ht);
        let denom = w.dot(&h).dot(&ht);
        ndarray::Zip::from(&mut w)
            .and(&numer)
            .and(&denom)
            .for_each(|w, &n, &d| {
                *w *= n / (d + DIV_EPS);
            });

        let obj = objective(&w, &h);
        let prev = *trace.last().unwrap();
        trace.push(obj);
        if (prev - obj).abs() <= params.tol * prev.max(DIV_EPS) {
            break;
        }
    }
    Ok(NmfFit {
        w,
        h,
        objective_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn recovers_a_clean_block_structure() {
        // two disjoint rank-1 blocks -> near-perfect rank-2 reconstruction
        let a = array![
            [4.0, 2.0, 0.0, 0.0],
            [2.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 6.0, 2.0],
            [0.0, 0.0, 3.0, 1.0],
        ];
        let fit = factorize(
            &a,
            &NmfParams {
                k: 2,
                max_iter: 500,
                tol: 1e-12,
            },
            1,
        )
        .unwrap();
        let final_obj = *fit.objective_trace.last().unwrap();
        let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(
            final_obj / norm < 0.02,
            "relative residual {}",
            final_obj / norm
        );
    }

    #[test]
    fn tolerance_stops_early() {
        let a = array![[1.0, 2.0], [2.0, 4.0]];
        let fit = factorize(
            &a,
            &NmfParams {
                k: 1,
                max_iter: 1000,
                tol: 1e-4,
            },
            3,
        )
        .unwrap();
        assert!(fit.objective_trace.len() < 1000);
    }

    #[test]
    fn rejects_negative_entries() {
        let a = array![[1.0, -0.5]];
        assert!(factorize(&a, &NmfParams::default(), 0).is_err());
    }
}
