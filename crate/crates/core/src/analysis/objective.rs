//! The consensus potential, its dual form, and a finite-difference gradient oracle.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::consensus::{check_network, drcs_gradient};
use crate::error::Result;
use crate::manifold::{inner, random_tangent, Mat, Retraction};
use crate::network::MixingMatrix;
use crate::state::NetworkState;

/// `phi^t(x) = (1/4) sum_ij W^t_ij ||x_i - x_j||^2`.
pub fn phi_value(state: &NetworkState, w: &MixingMatrix, t: u32) -> Result<f64> {
    phi_with_power(state, &w.power(t)?)
}

/// [`phi_value`] with a precomputed `wt = W^t`. Pairwise differences keep the
/// value accurate near consensus.
pub fn phi_with_power(state: &NetworkState, wt: &MixingMatrix) -> Result<f64> {
    check_network(state, wt)?;
    let x: Vec<&Mat> = state.matrices().collect();
    let mut total = 0.0;
    for i in 0..x.len() {
        for (j, wij) in wt.row_support(i) {
            if j > i {
                total += wij * (x[i] - x[j]).norm_squared();
            }
        }
    }
    // Each unordered pair appears twice in the double sum.
    Ok(0.5 * total)
}

/// `h^t(x) = (1/2) sum_ij W^t_ij <x_i, x_j>`; `phi^t + h^t = N r / 2` on the manifold.
pub fn h_value(state: &NetworkState, w: &MixingMatrix, t: u32) -> Result<f64> {
    let wt = w.power(t)?;
    check_network(state, &wt)?;
    let x: Vec<&Mat> = state.matrices().collect();
    let mut total = 0.0;
    for i in 0..x.len() {
        for (j, wij) in wt.row_support(i) {
            total += wij * inner(x[i], x[j]);
        }
    }
    Ok(0.5 * total)
}

/// Outcome of [`fd_gradient_check`].
#[derive(Clone, Debug, PartialEq)]
pub struct FdCheck {
    pub directions: usize,
    /// Worst `|fd - an| / max(|fd|, |an|)` among directions where the
    /// derivative is resolvable; otherwise the absolute error scaled by `||grad|| ||xi||`.
    pub max_rel_error: f64,
    pub max_abs_error: f64,
}

/// Central differences of `phi^t` along retraction curves in random tangent
/// directions, against `<grad phi^t(x), xi>`.
pub fn fd_gradient_check(
    state: &NetworkState,
    w: &MixingMatrix,
    t: u32,
    directions: usize,
    h: f64,
    seed: u64,
) -> Result<FdCheck> {
    let wt = w.power(t)?;
    let grad = drcs_gradient(state, w, t)?;
    let gnorm = grad.norm_sq().sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_rel: f64 = 0.0;
    let mut max_abs: f64 = 0.0;
    for _ in 0..directions {
        let xi: Vec<Mat> = state
            .blocks()
            .iter()
            .map(|x| random_tangent(&mut rng, x).into_matrix())
            .collect();
        let xi_norm = xi.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt();
        let moved = |s: f64| -> Result<f64> {
            let blocks = state
                .blocks()
                .iter()
                .zip(&xi)
                .map(|(x, v)| Retraction::Polar.apply(&crate::consensus::tangent_step(x, v, s)))
                .collect::<Result<Vec<_>>>()?;
            phi_with_power(&NetworkState::new(blocks)?, &wt)
        };
        let fd = (moved(h)? - moved(-h)?) / (2.0 * h);
        let an = grad.inner_with(&xi);
        let abs = (fd - an).abs();
        max_abs = max_abs.max(abs);
        let scale = fd.abs().max(an.abs());
        // Below this scale the derivative is at round-off level.
        let floor = 1e-8 * (gnorm * xi_norm).max(f64::MIN_POSITIVE);
        let rel = if scale > floor {
            abs / scale
        } else if gnorm * xi_norm > 0.0 {
            abs / (gnorm * xi_norm)
        } else {
            abs
        };
        max_rel = max_rel.max(rel);
    }
    Ok(FdCheck {
        directions,
        max_rel_error: max_rel,
        max_abs_error: max_abs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{random_stiefel, StiefelPoint};
    use crate::network::{complete_matrix, ring_matrix};

    #[test]
    fn hand_values() {
        let j = complete_matrix(2).unwrap();
        let a = StiefelPoint::new(Mat::from_column_slice(2, 1, &[1.0, 0.0])).unwrap();
        let b = StiefelPoint::new(Mat::from_column_slice(2, 1, &[0.0, 1.0])).unwrap();
        let x = NetworkState::new(vec![a, b]).unwrap();
        // ||x_1 - x_2||^2 = c = 2 and phi = (1/4)(2 * (1/2) * c) = c / 4.
        assert!((phi_value(&x, &j, 1).unwrap() - 0.5).abs() < 1e-15);
        let c = NetworkState::consensus(&random_stiefel(4, 2, 3).unwrap(), 5).unwrap();
        assert_eq!(phi_value(&c, &ring_matrix(5).unwrap(), 3).unwrap(), 0.0);
    }

    #[test]
    fn phi_and_h_sum_to_constant() {
        let w = ring_matrix(9).unwrap();
        for seed in 0..1000 {
            let x = NetworkState::random(9, 4, 2, seed).unwrap();
            let t = 1 + (seed % 4) as u32;
            let s = phi_value(&x, &w, t).unwrap() + h_value(&x, &w, t).unwrap();
            assert!((s - 9.0 * 2.0 / 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn finite_differences_match() {
        let w = ring_matrix(6).unwrap();
        let x = NetworkState::random(6, 5, 2, 21).unwrap();
        for t in [1, 10] {
            let fd = fd_gradient_check(&x, &w, t, 20, 1e-6, 5).unwrap();
            assert!(fd.max_rel_error <= 1e-5, "t={t}: {fd:?}");
        }
        let c = NetworkState::consensus(&random_stiefel(5, 2, 1).unwrap(), 6).unwrap();
        let fd = fd_gradient_check(&c, &w, 1, 20, 1e-6, 5).unwrap();
        assert!(fd.max_abs_error <= 1e-10);
    }
}
