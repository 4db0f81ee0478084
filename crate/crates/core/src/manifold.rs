//! Primitives on the Stiefel manifold `St(d, r) = { x in R^{d x r} : x^T x = I_r }`.
//!
//! Points are validated once at construction and never silently
//! re-orthonormalized: if a retraction produces a matrix that drifts off the
//! manifold beyond [`ORTHONORMALITY_TOL`], the caller sees an error instead of
//! a repaired point.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::state::NetworkState;

/// Dense real matrix used for every block quantity (points, gradients, means).
pub type Mat = DMatrix<f64>;

/// Bound on `||x^T x - I_r||_F` accepted for a Stiefel point.
pub const ORTHONORMALITY_TOL: f64 = 1e-12;

/// Bound on `||x^T xi + xi^T x||_F` accepted for a tangent vector.
pub const TANGENT_TOL: f64 = 1e-10;

/// Singular values at or below this make the polar factor non-unique.
pub const DEGENERACY_THRESHOLD: f64 = 1e-12;

/// Frobenius inner product `<a, b> = Tr(a^T b)`.
#[inline]
pub fn inner(a: &Mat, b: &Mat) -> f64 {
    a.dot(b)
}

fn check_shape(expected: (usize, usize), got: (usize, usize)) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::ShapeMismatch { expected, got })
    }
}

/// A `d x r` matrix with orthonormal columns.
#[derive(Clone, Debug, PartialEq)]
pub struct StiefelPoint(Mat);

impl StiefelPoint {
    pub fn new(entries: Mat) -> Result<Self> {
        let (d, r) = entries.shape();
        if r == 0 || r > d {
            return Err(Error::InvalidDimensions(format!(
                "Stiefel point needs 1 <= r <= d, got d={d}, r={r}"
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotOrthonormal {
                residual: f64::INFINITY,
            });
        }
        let residual = orthonormality_residual(&entries);
        if residual > ORTHONORMALITY_TOL {
            return Err(Error::NotOrthonormal { residual });
        }
        Ok(StiefelPoint(entries))
    }

    /// Builds a point from a column-major slice.
    pub fn from_column_slice(d: usize, r: usize, data: &[f64]) -> Result<Self> {
        Self::new(Mat::from_column_slice(d, r, data))
    }

    /// First `r` columns of the `d x d` identity.
    pub fn identity(d: usize, r: usize) -> Result<Self> {
        Self::new(Mat::identity(d, r))
    }

    pub fn as_matrix(&self) -> &Mat {
        &self.0
    }

    pub fn into_matrix(self) -> Mat {
        self.0
    }

    pub fn d(&self) -> usize {
        self.0.nrows()
    }

    pub fn r(&self) -> usize {
        self.0.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }
}

impl AsRef<Mat> for StiefelPoint {
    fn as_ref(&self) -> &Mat {
        &self.0
    }
}

/// `||x^T x - I_r||_F`.
pub fn orthonormality_residual(x: &Mat) -> f64 {
    let r = x.ncols();
    (x.transpose() * x - Mat::identity(r, r)).norm()
}

/// An element of the tangent space `T_x St(d, r) = { xi : x^T xi + xi^T x = 0 }`.
#[derive(Clone, Debug)]
pub struct TangentVector<'a> {
    base: &'a StiefelPoint,
    entries: Mat,
}

impl<'a> TangentVector<'a> {
    pub fn new(base: &'a StiefelPoint, entries: Mat) -> Result<Self> {
        check_shape(base.shape(), entries.shape())?;
        let residual = skew_residual(base.as_matrix(), &entries);
        if residual > TANGENT_TOL {
            return Err(Error::NotTangent { residual });
        }
        Ok(TangentVector { base, entries })
    }

    /// Attaches `entries` to `base` without the tangency check.
    pub(crate) fn new_unchecked(base: &'a StiefelPoint, entries: Mat) -> Self {
        TangentVector { base, entries }
    }

    pub fn zero(base: &'a StiefelPoint) -> Self {
        let (d, r) = base.shape();
        TangentVector {
            base,
            entries: Mat::zeros(d, r),
        }
    }

    pub fn base(&self) -> &'a StiefelPoint {
        self.base
    }

    pub fn as_matrix(&self) -> &Mat {
        &self.entries
    }

    pub fn into_matrix(self) -> Mat {
        self.entries
    }

    pub fn norm(&self) -> f64 {
        self.entries.norm()
    }

    pub fn scaled(&self, s: f64) -> TangentVector<'a> {
        TangentVector {
            base: self.base,
            entries: &self.entries * s,
        }
    }

    pub fn retract(&self, retraction: Retraction) -> Result<StiefelPoint> {
        retraction.apply(self)
    }
}

/// `||x^T v + v^T x||_F`; zero exactly on the tangent space.
pub fn skew_residual(x: &Mat, v: &Mat) -> f64 {
    let xtv = x.transpose() * v;
    (&xtv + xtv.transpose()).norm()
}

/// `sym(a) = (a + a^T) / 2`.
fn sym(a: &Mat) -> Mat {
    (a + a.transpose()) * 0.5
}

/// `P_T(v) = v - x sym(x^T v)`.
pub fn project_tangent<'a>(x: &'a StiefelPoint, v: &Mat) -> Result<TangentVector<'a>> {
    check_shape(x.shape(), v.shape())?;
    let xm = x.as_matrix();
    let entries = v - xm * sym(&(xm.transpose() * v));
    Ok(TangentVector { base: x, entries })
}

/// `P_N(v) = x sym(x^T v)`.
pub fn project_normal(x: &StiefelPoint, v: &Mat) -> Result<Mat> {
    check_shape(x.shape(), v.shape())?;
    let xm = x.as_matrix();
    Ok(xm * sym(&(xm.transpose() * v)))
}

/// Thin SVD `y = u s v^T`; returns the polar factor `u v^T` and `min s`.
fn polar_factor(y: &Mat) -> (Mat, f64) {
    let svd = y.clone().svd(true, true);
    let sigma_min = svd
        .singular_values
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let u = svd.u.expect("left singular vectors requested");
    let v_t = svd.v_t.expect("right singular vectors requested");
    (u * v_t, sigma_min)
}

/// Orthogonal projection onto `St(d, r)`: the polar factor `u v^T` of `y`.
///
/// Fails with [`Error::DegenerateMean`] when `sigma_r(y) <= 1e-12`, where the
/// projection is not unique.
pub fn project_stiefel(y: &Mat) -> Result<StiefelPoint> {
    let (d, r) = y.shape();
    if r == 0 || r > d {
        return Err(Error::InvalidDimensions(format!(
            "projection onto St(d, r) needs 1 <= r <= d, got d={d}, r={r}"
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateMean {
            sigma_min: f64::NAN,
        });
    }
    let (q, sigma_min) = polar_factor(y);
    if sigma_min <= DEGENERACY_THRESHOLD {
        return Err(Error::DegenerateMean { sigma_min });
    }
    StiefelPoint::new(q)
}

/// Polar retraction `Retr_x(xi) = P_St(x + xi)`, computed through the SVD.
pub fn polar_retract(x: &StiefelPoint, xi: &TangentVector<'_>) -> Result<StiefelPoint> {
    check_base(x, xi)?;
    project_stiefel(&(x.as_matrix() + xi.as_matrix()))
}

/// The same retraction through its closed form `(x + xi)(I_r + xi^T xi)^{-1/2}`.
pub fn polar_retract_closed_form(x: &StiefelPoint, xi: &TangentVector<'_>) -> Result<StiefelPoint> {
    check_base(x, xi)?;
    let r = x.r();
    let xim = xi.as_matrix();
    let gram = Mat::identity(r, r) + xim.transpose() * xim;
    let eig = SymmetricEigen::new(gram);
    let inv_sqrt = DVector::from_iterator(r, eig.eigenvalues.iter().map(|l| 1.0 / l.sqrt()));
    let inv_root = &eig.eigenvectors * Mat::from_diagonal(&inv_sqrt) * eig.eigenvectors.transpose();
    StiefelPoint::new((x.as_matrix() + xim) * inv_root)
}

/// QR retraction `Retr_x(xi) = qf(x + xi)` with the diagonal of `R` made
/// nonnegative.
pub fn qr_retract(x: &StiefelPoint, xi: &TangentVector<'_>) -> Result<StiefelPoint> {
    check_base(x, xi)?;
    StiefelPoint::new(q_factor_positive(x.as_matrix() + xi.as_matrix()))
}

fn q_factor_positive(m: Mat) -> Mat {
    let qr = m.qr();
    let rdiag = qr.r().diagonal();
    let mut q = qr.q();
    for (j, rjj) in rdiag.iter().enumerate() {
        if *rjj < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

fn check_base(x: &StiefelPoint, xi: &TangentVector<'_>) -> Result<()> {
    if std::ptr::eq(x, xi.base()) || x == xi.base() {
        Ok(())
    } else {
        Err(Error::InvalidDimensions(
            "tangent vector is attached to a different base point".into(),
        ))
    }
}

/// Retraction used to map a tangent step back onto the manifold.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Retraction {
    #[default]
    Polar,
    Qr,
}

impl Retraction {
    pub fn apply(self, xi: &TangentVector<'_>) -> Result<StiefelPoint> {
        match self {
            Retraction::Polar => polar_retract(xi.base(), xi),
            Retraction::Qr => qr_retract(xi.base(), xi),
        }
    }

    /// Second-order constant `M` with `||Retr_x(xi) - (x + xi)|| <= M ||xi||^2`,
    /// valid for `||xi||_F <= self.constant_radius()`.
    pub fn second_order_constant(self) -> f64 {
        match self {
            Retraction::Polar => 1.0,
            Retraction::Qr => 10f64.sqrt() / 4.0,
        }
    }

    pub fn constant_radius(self) -> f64 {
        match self {
            Retraction::Polar => 1.0,
            Retraction::Qr => 0.5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Retraction::Polar => "polar",
            Retraction::Qr => "qr",
        }
    }
}

impl std::str::FromStr for Retraction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "polar" => Ok(Retraction::Polar),
            "qr" => Ok(Retraction::Qr),
            other => Err(Error::config(
                "retraction",
                format!("unknown retraction `{other}` (expected polar or qr)"),
            )),
        }
    }
}

/// Uniform sample on `St(d, r)` from a seeded generator.
pub fn random_stiefel(d: usize, r: usize, seed: u64) -> Result<StiefelPoint> {
    random_stiefel_with(&mut ChaCha8Rng::seed_from_u64(seed), d, r)
}

/// Orthonormal factor of a `d x r` standard Gaussian matrix, with the sign
/// convention `diag(R) >= 0` so the draw is a deterministic function of the
/// generator state.
pub fn random_stiefel_with<R: Rng + ?Sized>(
    rng: &mut R,
    d: usize,
    r: usize,
) -> Result<StiefelPoint> {
    if r == 0 || r > d {
        return Err(Error::InvalidDimensions(format!(
            "random_stiefel needs 1 <= r <= d, got d={d}, r={r}"
        )));
    }
    let g = gaussian_matrix(rng, d, r);
    StiefelPoint::new(q_factor_positive(g))
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Projection of a standard Gaussian matrix onto `T_x St(d, r)`.
pub fn random_tangent<'a, R: Rng + ?Sized>(rng: &mut R, x: &'a StiefelPoint) -> TangentVector<'a> {
    let (d, r) = x.shape();
    let g = gaussian_matrix(rng, d, r);
    project_tangent(x, &g).expect("shapes agree by construction")
}

/// Euclidean mean `x_hat = (1/N) sum_i x_i`.
pub fn euclidean_mean(state: &NetworkState) -> Mat {
    mean_of(state.blocks().iter().map(|b| b.as_matrix()))
}

pub(crate) fn mean_of<'a>(mut blocks: impl ExactSizeIterator<Item = &'a Mat>) -> Mat {
    let n = blocks.len();
    let first = blocks.next().expect("at least one block");
    let mut acc = first.clone();
    for b in blocks {
        acc += b;
    }
    acc / n as f64
}

/// Induced arithmetic mean: the Stiefel projection of the Euclidean mean.
pub fn iam(state: &NetworkState) -> Result<StiefelPoint> {
    project_stiefel(&euclidean_mean(state))
}

/// `sum_i ||x_i - y||_F^2` (not divided by `N`).
pub fn dist_sq(state: &NetworkState, y: &StiefelPoint) -> f64 {
    state
        .blocks()
        .iter()
        .map(|b| (b.as_matrix() - y.as_matrix()).norm_squared())
        .sum()
}

/// `max_i ||x_i - y||_F`.
pub fn dist_inf(state: &NetworkState, y: &StiefelPoint) -> f64 {
    state
        .blocks()
        .iter()
        .map(|b| (b.as_matrix() - y.as_matrix()).norm())
        .fold(0.0, f64::max)
}
