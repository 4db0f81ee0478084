//! Projected gradient descent on the Euclidean consensus potential
//! `phi(x) = (1/2) <x, ((I - W) (x) I) x>`, the baseline the manifold
//! iteration is compared against.

use crate::error::{Error, Result};
use crate::manifold::{mean_of, Mat};
use crate::network::MixingMatrix;

use super::gradient::mix;

/// Blockwise constraint set `C`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Projection {
    Identity,
    /// Frobenius ball of the given radius around the origin.
    Ball(f64),
}

impl Projection {
    pub fn apply(self, m: Mat) -> Mat {
        match self {
            Projection::Identity => m,
            Projection::Ball(radius) => {
                let n = m.norm();
                if n > radius {
                    m * (radius / n)
                } else {
                    m
                }
            }
        }
    }
}

/// `x+ = P_C(x - alpha (I - W) x)`, written as `(1 - alpha) x + alpha W x` so
/// that `alpha = 1` is exactly one mixing multiply.
pub fn euclidean_pgd_step(
    blocks: &[Mat],
    w: &MixingMatrix,
    alpha: f64,
    projection: Projection,
) -> Result<Vec<Mat>> {
    if blocks.len() != w.n() {
        return Err(Error::ShapeMismatch {
            expected: (w.n(), w.n()),
            got: (blocks.len(), 0),
        });
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::config(
            "alpha",
            format!("stepsize must be positive, got {alpha}"),
        ));
    }
    if let Projection::Ball(radius) = projection {
        if !(radius > 0.0) {
            return Err(Error::config(
                "radius",
                format!("must be positive, got {radius}"),
            ));
        }
    }
    let mixed = mix(w, blocks);
    Ok(blocks
        .iter()
        .zip(mixed)
        .map(|(x, m)| {
            let y = if alpha == 1.0 {
                m
            } else {
                x * (1.0 - alpha) + m * alpha
            };
            projection.apply(y)
        })
        .collect())
}

/// `||x - x_hat||_F` with `x_hat` the Euclidean mean.
pub fn euclidean_deviation(blocks: &[Mat]) -> f64 {
    let mean = mean_of(blocks.iter());
    blocks
        .iter()
        .map(|b| (b - &mean).norm_squared())
        .sum::<f64>()
        .sqrt()
}

/// Result of [`run_euclidean_pgd`].
#[derive(Clone, Debug, PartialEq)]
pub struct PgdTrace {
    /// `||x_k - x_hat_k||_F` for `k = 0..=iters`.
    pub deviations: Vec<f64>,
    pub final_blocks: Vec<Mat>,
}

impl PgdTrace {
    /// Per-step ratios `dev_{k+1} / dev_k`, skipping steps that start at zero.
    pub fn contractions(&self) -> Vec<f64> {
        self.deviations
            .windows(2)
            .filter(|p| p[0] > 0.0)
            .map(|p| p[1] / p[0])
            .collect()
    }

    /// `(1/N) ||x_k - x_hat_k||^2`, the scale used by the rate estimator.
    pub fn consensus_series(&self) -> Vec<f64> {
        let n = self.final_blocks.len() as f64;
        self.deviations.iter().map(|d| d * d / n).collect()
    }
}

pub fn run_euclidean_pgd(
    x0: Vec<Mat>,
    w: &MixingMatrix,
    alpha: f64,
    projection: Projection,
    iters: usize,
) -> Result<PgdTrace> {
    let mut x = x0;
    let mut deviations = vec![euclidean_deviation(&x)];
    for _ in 0..iters {
        x = euclidean_pgd_step(&x, w, alpha, projection)?;
        deviations.push(euclidean_deviation(&x));
    }
    Ok(PgdTrace {
        deviations,
        final_blocks: x,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::gaussian_matrix;
    use crate::network::ring_matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_blocks(n: usize, seed: u64) -> Vec<Mat> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| gaussian_matrix(&mut rng, 3, 2)).collect()
    }

    #[test]
    fn unit_step_is_one_mixing_multiply() {
        let w = ring_matrix(6).unwrap();
        let x = random_blocks(6, 1);
        let y = euclidean_pgd_step(&x, &w, 1.0, Projection::Identity).unwrap();
        assert_eq!(y, mix(&w, &x));
    }

    #[test]
    fn ball_projection_clips_radially() {
        let m = Mat::from_column_slice(2, 1, &[3.0, 4.0]);
        let clipped = Projection::Ball(1.0).apply(m.clone());
        assert!((clipped - Mat::from_column_slice(2, 1, &[0.6, 0.8])).amax() < 1e-15);
        assert_eq!(Projection::Ball(10.0).apply(m.clone()), m);
        let w = ring_matrix(4).unwrap();
        let y = euclidean_pgd_step(&random_blocks(4, 3), &w, 0.5, Projection::Ball(0.1)).unwrap();
        assert!(y.iter().all(|b| b.norm() <= 0.1 + 1e-15));
        assert!(euclidean_pgd_step(&random_blocks(4, 3), &w, 0.5, Projection::Ball(0.0)).is_err());
    }

    #[test]
    fn unit_step_contracts_by_sigma2() {
        let w = ring_matrix(10).unwrap();
        let s2 = w.spectral_profile(1).unwrap().sigma2;
        let trace =
            run_euclidean_pgd(random_blocks(10, 4), &w, 1.0, Projection::Identity, 100).unwrap();
        assert!(trace.contractions().iter().all(|&c| c <= s2 + 1e-12));
    }

    #[test]
    fn optimal_step_meets_condition_number_bound() {
        let w = ring_matrix(10).unwrap();
        let p = w.spectral_profile(1).unwrap();
        let rho = p.condition_rate();
        let alpha = 2.0 / (p.mu + p.l);
        let trace =
            run_euclidean_pgd(random_blocks(10, 5), &w, alpha, Projection::Identity, 200).unwrap();
        let d0 = trace.deviations[0];
        for (k, d) in trace.deviations.iter().enumerate() {
            assert!(
                *d <= rho.powi(k as i32) * d0 * (1.0 + 1e-9) + 1e-14,
                "k={k}"
            );
        }
    }
}
