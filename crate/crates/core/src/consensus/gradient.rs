use crate::error::{Error, Result};
use crate::manifold::{
    inner, project_tangent, skew_residual, Mat, Retraction, StiefelPoint, TangentVector,
    TANGENT_TOL,
};
use crate::network::MixingMatrix;
use crate::state::NetworkState;

/// Which gradient a [`GradientField`] holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradientKind {
    /// Ambient `grad_i = x_i - sum_j W^t_ij x_j`.
    Euclidean,
    /// Tangent projection of the Euclidean field at each block.
    Riemannian,
}

/// One `d x r` block per agent.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientField {
    kind: GradientKind,
    blocks: Vec<Mat>,
}

impl GradientField {
    pub fn new(kind: GradientKind, blocks: Vec<Mat>) -> Self {
        GradientField { kind, blocks }
    }

    pub fn kind(&self) -> GradientKind {
        self.kind
    }

    pub fn blocks(&self) -> &[Mat] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &Mat {
        &self.blocks[i]
    }

    pub fn into_blocks(self) -> Vec<Mat> {
        self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// `||g||_F^2` over all blocks.
    pub fn norm_sq(&self) -> f64 {
        self.blocks.iter().map(|b| b.norm_squared()).sum()
    }

    pub fn max_block_norm(&self) -> f64 {
        self.blocks.iter().map(|b| b.norm()).fold(0.0, f64::max)
    }

    /// `sum_i g_i`.
    pub fn sum(&self) -> Mat {
        let (d, r) = self.blocks[0].shape();
        self.blocks.iter().fold(Mat::zeros(d, r), |acc, b| acc + b)
    }

    /// `sum_i <g_i, v_i>`.
    pub fn inner_with<'a>(&self, other: impl IntoIterator<Item = &'a Mat>) -> f64 {
        self.blocks
            .iter()
            .zip(other)
            .map(|(g, v)| inner(g, v))
            .sum()
    }

    /// Residual of the kind-specific invariant: `||sum_i g_i||_F` for the
    /// Euclidean kind, the largest tangency residual for the Riemannian kind.
    pub fn invariant_residual(&self, state: &NetworkState) -> f64 {
        match self.kind {
            GradientKind::Euclidean => self.sum().norm(),
            GradientKind::Riemannian => state
                .matrices()
                .zip(&self.blocks)
                .map(|(x, g)| skew_residual(x, g))
                .fold(0.0, f64::max),
        }
    }

    pub fn satisfies_invariant(&self, state: &NetworkState) -> bool {
        self.invariant_residual(state) <= TANGENT_TOL
    }
}

pub(crate) fn check_network(state: &NetworkState, w: &MixingMatrix) -> Result<()> {
    if w.n() != state.n() {
        return Err(Error::ShapeMismatch {
            expected: (state.n(), state.n()),
            got: (w.n(), w.n()),
        });
    }
    Ok(())
}

/// `sum_j W_ij b_j`, summed over the nonzero entries of row `i` in ascending
/// column order. Agents in the message-passing simulation use the same order.
pub(crate) fn mix_row<'a>(w: &MixingMatrix, i: usize, block: impl Fn(usize) -> &'a Mat) -> Mat {
    let mut support = w.row_support(i).into_iter();
    let (j0, w0) = support.next().expect("every row has a positive diagonal");
    let mut acc = block(j0) * w0;
    for (j, wij) in support {
        acc.zip_apply(block(j), |a, b| *a += wij * b);
    }
    acc
}

/// `(W (x) I) b`.
pub fn mix(w: &MixingMatrix, blocks: &[Mat]) -> Vec<Mat> {
    (0..blocks.len())
        .map(|i| mix_row(w, i, |j| &blocks[j]))
        .collect()
}

/// One-round Euclidean gradient `x_i - sum_j W_ij x_j`.
pub fn euclidean_grad_onestep(state: &NetworkState, w: &MixingMatrix) -> Result<GradientField> {
    multistep_grad(state, w, 1)
}

/// `t`-round Euclidean gradient via `g^1 = x - W x`, `g^l = g^1 + W g^{l-1}`,
/// which equals `((I - W^t) (x) I) x`.
pub fn multistep_grad(state: &NetworkState, w: &MixingMatrix, t: u32) -> Result<GradientField> {
    check_network(state, w)?;
    if t == 0 {
        return Err(Error::config(
            "t",
            "the number of communication rounds must be at least 1",
        ));
    }
    let x: Vec<Mat> = state.matrices().cloned().collect();
    let g1: Vec<Mat> = x
        .iter()
        .zip(mix(w, &x))
        .map(|(xi, mixed)| xi - mixed)
        .collect();
    let mut g = g1.clone();
    for _ in 1..t {
        g = g1.iter().zip(mix(w, &g)).map(|(a, b)| a + b).collect();
    }
    Ok(GradientField::new(GradientKind::Euclidean, g))
}

/// Euclidean gradient `x_i - sum_j W^t_ij x_j` from the explicit power `wt = W^t`.
pub fn euclidean_grad_with_power(state: &NetworkState, wt: &MixingMatrix) -> Result<GradientField> {
    check_network(state, wt)?;
    let x: Vec<Mat> = state.matrices().cloned().collect();
    let g = x
        .iter()
        .zip(mix(wt, &x))
        .map(|(xi, mixed)| xi - mixed)
        .collect();
    Ok(GradientField::new(GradientKind::Euclidean, g))
}

/// Blockwise tangent projection of a Euclidean field.
pub fn riemannian_grad(state: &NetworkState, eg: &GradientField) -> Result<GradientField> {
    if eg.kind() != GradientKind::Euclidean {
        return Err(Error::InvalidDimensions(
            "riemannian_grad expects a Euclidean gradient field".into(),
        ));
    }
    if eg.len() != state.n() {
        return Err(Error::ShapeMismatch {
            expected: (state.n(), 0),
            got: (eg.len(), 0),
        });
    }
    let blocks = state
        .blocks()
        .iter()
        .zip(eg.blocks())
        .map(|(x, g)| project_tangent(x, g).map(TangentVector::into_matrix))
        .collect::<Result<Vec<_>>>()?;
    Ok(GradientField::new(GradientKind::Riemannian, blocks))
}

/// Riemannian gradient of the `t`-step potential at `state`.
pub fn drcs_gradient(state: &NetworkState, w: &MixingMatrix, t: u32) -> Result<GradientField> {
    riemannian_grad(state, &multistep_grad(state, w, t)?)
}

/// Closed form `x_i - sum_j W^t_ij x_j - (1/2) x_i sum_j W^t_ij (x_i - x_j)^T (x_i - x_j)`,
/// evaluated with the explicit power `wt = W^t`.
pub fn riemannian_grad_closed_form(
    state: &NetworkState,
    wt: &MixingMatrix,
) -> Result<GradientField> {
    check_network(state, wt)?;
    let x: Vec<&Mat> = state.matrices().collect();
    let r = state.r();
    let blocks = (0..state.n())
        .map(|i| {
            let mut euclid = x[i].clone();
            let mut quad = Mat::zeros(r, r);
            for (j, wij) in wt.row_support(i) {
                euclid -= x[j] * wij;
                let diff = x[i] - x[j];
                quad += diff.transpose() * &diff * wij;
            }
            euclid - x[i] * quad * 0.5
        })
        .collect();
    Ok(GradientField::new(GradientKind::Riemannian, blocks))
}

/// Retracts every block along `-alpha * grad_i`.
pub fn retract_along(
    state: &NetworkState,
    grad: &GradientField,
    alpha: f64,
    retraction: Retraction,
) -> Result<NetworkState> {
    let blocks = state
        .blocks()
        .iter()
        .zip(grad.blocks())
        .map(|(x, g)| retraction.apply(&tangent_step(x, g, -alpha)))
        .collect::<Result<Vec<_>>>()?;
    NetworkState::new(blocks)
}

/// `s * g` attached to `x`; `g` is already tangent so it is not re-projected.
pub(crate) fn tangent_step<'a>(x: &'a StiefelPoint, g: &Mat, s: f64) -> TangentVector<'a> {
    TangentVector::new_unchecked(x, g * s)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::config(
            "alpha",
            format!("stepsize must be positive and finite, got {alpha}"),
        ))
    }
}

/// One iteration `x_i <- Retr_{x_i}(-alpha P_T(grad_i))` with the `t`-round gradient.
pub fn drcs_step(
    state: &NetworkState,
    w: &MixingMatrix,
    t: u32,
    alpha: f64,
    retraction: Retraction,
) -> Result<NetworkState> {
    check_alpha(alpha)?;
    let grad = drcs_gradient(state, w, t)?;
    retract_along(state, &grad, alpha, retraction)
}

/// The same iteration written as `Retr_{x_i}(alpha P_T(sum_j W^t_ij x_j))`,
/// with the explicit power `wt = W^t`.
pub fn drcs_step_ascent_form(
    state: &NetworkState,
    wt: &MixingMatrix,
    alpha: f64,
    retraction: Retraction,
) -> Result<NetworkState> {
    check_alpha(alpha)?;
    check_network(state, wt)?;
    let x: Vec<Mat> = state.matrices().cloned().collect();
    let blocks = state
        .blocks()
        .iter()
        .zip(mix(wt, &x))
        .map(|(xi, avg)| {
            let dir = project_tangent(xi, &avg)?.scaled(alpha);
            retraction.apply(&dir)
        })
        .collect::<Result<Vec<_>>>()?;
    NetworkState::new(blocks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::random_stiefel;
    use crate::network::{complete_matrix, ring_matrix};

    fn col(v: &[f64]) -> StiefelPoint {
        StiefelPoint::new(Mat::from_column_slice(v.len(), 1, v)).unwrap()
    }

    /// Dense oracle: `((I - M) (x) I) x` with the stacked `Nd x r` state.
    fn kron_oracle(state: &NetworkState, m: &Mat) -> Vec<Mat> {
        let (n, d, r) = (state.n(), state.d(), state.r());
        let mut stacked = Mat::zeros(n * d, r);
        for (i, x) in state.matrices().enumerate() {
            stacked.view_mut((i * d, 0), (d, r)).copy_from(x);
        }
        let op = (Mat::identity(n, n) - m).kronecker(&Mat::identity(d, d));
        let out = op * stacked;
        (0..n)
            .map(|i| out.view((i * d, 0), (d, r)).into_owned())
            .collect()
    }

    #[test]
    fn consensus_gives_zero_fields() {
        let w = ring_matrix(6).unwrap();
        let x = NetworkState::consensus(&random_stiefel(4, 2, 1).unwrap(), 6).unwrap();
        for t in [1, 4] {
            let g = drcs_gradient(&x, &w, t).unwrap();
            assert!(g.norm_sq() < 1e-28);
        }
        assert!(
            drcs_step(&x, &w, 3, 0.7, Retraction::Polar)
                .unwrap()
                .max_abs_diff(&x)
                < 1e-15
        );
    }

    #[test]
    fn two_agent_average() {
        let j = complete_matrix(2).unwrap();
        let x = NetworkState::new(vec![col(&[1.0, 0.0]), col(&[0.0, 1.0])]).unwrap();
        let g = euclidean_grad_onestep(&x, &j).unwrap();
        assert_eq!(g.block(0), &Mat::from_column_slice(2, 1, &[0.5, -0.5]));
        assert_eq!(g.block(1), &Mat::from_column_slice(2, 1, &[-0.5, 0.5]));
    }

    #[test]
    fn onestep_matches_kronecker_oracle() {
        let w = ring_matrix(5).unwrap();
        let x = NetworkState::random(5, 4, 2, 11).unwrap();
        let g = euclidean_grad_onestep(&x, &w).unwrap();
        for (a, b) in g.blocks().iter().zip(kron_oracle(&x, w.entries())) {
            assert!((a - b).amax() < 1e-13);
        }
        assert!(g.satisfies_invariant(&x));
    }

    #[test]
    fn multistep_matches_matrix_power() {
        let w = ring_matrix(8).unwrap();
        let x = NetworkState::random(8, 5, 2, 12).unwrap();
        assert_eq!(
            multistep_grad(&x, &w, 1).unwrap(),
            euclidean_grad_onestep(&x, &w).unwrap()
        );
        let g = multistep_grad(&x, &w, 10).unwrap();
        let w10 = w.power(10).unwrap();
        for (a, b) in g.blocks().iter().zip(kron_oracle(&x, w10.entries())) {
            assert!((a - b).amax() < 1e-12);
        }
        let dense = euclidean_grad_with_power(&x, &w10).unwrap();
        for (a, b) in g.blocks().iter().zip(dense.blocks()) {
            assert!((a - b).amax() < 1e-12);
        }
        assert!(multistep_grad(&x, &w, 0).is_err());
        assert!(multistep_grad(&x, &ring_matrix(7).unwrap(), 1).is_err());
    }

    #[test]
    fn projection_route_matches_closed_form() {
        let w = ring_matrix(6).unwrap();
        let x = NetworkState::random(6, 5, 2, 13).unwrap();
        for t in [1, 5] {
            let proj = drcs_gradient(&x, &w, t).unwrap();
            let closed = riemannian_grad_closed_form(&x, &w.power(t).unwrap()).unwrap();
            for (a, b) in proj.blocks().iter().zip(closed.blocks()) {
                assert!((a - b).amax() < 1e-12);
            }
            assert!(proj.satisfies_invariant(&x));
            let eg = multistep_grad(&x, &w, t).unwrap();
            for (rg, e) in proj.blocks().iter().zip(eg.blocks()) {
                assert!(rg.norm() <= e.norm() + 1e-15);
            }
        }
    }

    #[test]
    fn orthogonal_group_case_has_zero_gradient_for_scalars() {
        let w = ring_matrix(4).unwrap();
        let x =
            NetworkState::new(vec![col(&[1.0]), col(&[-1.0]), col(&[1.0]), col(&[-1.0])]).unwrap();
        assert!(drcs_gradient(&x, &w, 1).unwrap().norm_sq() == 0.0);
    }

    #[test]
    fn complete_graph_hand_step() {
        // W = J_3, x = ((1,0), (0,1), (0,1)): the average is a = (1/3, 2/3), so
        // agent 1 moves along P_T(a) = (0, 2/3) and agents 2, 3 along (1/3, 0).
        let j = complete_matrix(3).unwrap();
        let x =
            NetworkState::new(vec![col(&[1.0, 0.0]), col(&[0.0, 1.0]), col(&[0.0, 1.0])]).unwrap();
        let y = drcs_step(&x, &j, 1, 1.0, Retraction::Polar).unwrap();
        let n1 = (1.0f64 + 4.0 / 9.0).sqrt();
        let n2 = (1.0f64 + 1.0 / 9.0).sqrt();
        let expect = [[1.0 / n1, (2.0 / 3.0) / n1], [(1.0 / 3.0) / n2, 1.0 / n2]];
        assert!((y.block(0).as_matrix() - Mat::from_column_slice(2, 1, &expect[0])).amax() < 1e-15);
        assert!((y.block(1).as_matrix() - Mat::from_column_slice(2, 1, &expect[1])).amax() < 1e-15);
        let phi = |s: &NetworkState| crate::analysis::phi_value(s, &j, 1).unwrap();
        assert!(phi(&y) < phi(&x));
    }

    #[test]
    fn ascent_form_agrees() {
        let w = ring_matrix(7).unwrap();
        let x = NetworkState::random(7, 5, 2, 14).unwrap();
        for t in [1u32, 3, 10] {
            for alpha in [0.3, 1.0, 1.5] {
                for retr in [Retraction::Polar, Retraction::Qr] {
                    let a = drcs_step(&x, &w, t, alpha, retr).unwrap();
                    let b = drcs_step_ascent_form(&x, &w.power(t).unwrap(), alpha, retr).unwrap();
                    assert!(a.max_abs_diff(&b) < 1e-13, "t={t} alpha={alpha}");
                }
            }
        }
        assert!(drcs_step(&x, &w, 1, 0.0, Retraction::Polar).is_err());
        assert!(drcs_step(&x, &w, 1, f64::NAN, Retraction::Polar).is_err());
    }
}
