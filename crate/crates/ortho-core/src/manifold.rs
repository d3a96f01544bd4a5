//! Geometry of O(p): tangent projection, Riemannian gradient, retractions.
//!
//! Tangent vectors at W are matrices AW with A skew-symmetric. The
//! conventions here follow the descent iterate W ← exp(−η·A)·W: every
//! retraction takes the generator A and the step η separately and applies
//! the minus sign itself, so callers never pre-negate.

use crate::error::{Error, Result};
use crate::expm::matrix_exp_skew;
use crate::loss::DifferentiableLoss;
use crate::matrix::{ensure_finite, Mat};
use crate::orthogonal::OrthogonalMatrix;
use crate::qr::qr_orthonormalize;
use crate::skew::{skew_part, SkewSymmetricMatrix};

/// A tangent vector at `base`, stored in generator form: the ambient
/// vector is `generator · base`. Skewness of the generator is structural.
#[derive(Debug, Clone)]
pub struct TangentVector {
    base: OrthogonalMatrix,
    generator: SkewSymmetricMatrix,
}

impl TangentVector {
    pub fn new(base: OrthogonalMatrix, generator: SkewSymmetricMatrix) -> Result<Self> {
        if base.dim() != generator.dim() {
            return Err(Error::DimensionMismatch {
                expected: base.dim(),
                rows: generator.dim(),
                cols: generator.dim(),
            });
        }
        Ok(Self { base, generator })
    }

    pub fn base(&self) -> &OrthogonalMatrix {
        &self.base
    }

    pub fn generator(&self) -> &SkewSymmetricMatrix {
        &self.generator
    }

    /// The ambient-space representation A·W.
    pub fn ambient(&self) -> Mat {
        self.generator.matrix() * self.base.matrix()
    }

    pub fn norm(&self) -> f64 {
        // ‖AW‖_F = ‖A‖_F for orthogonal W
        self.generator.norm()
    }
}

/// Euclidean projection onto T_W: P(B) = Skew(BWᵀ)W.
pub fn project_tangent(w: &OrthogonalMatrix, b: &Mat) -> Result<TangentVector> {
    if b.nrows() != w.dim() || b.ncols() != w.dim() {
        return Err(Error::DimensionMismatch {
            expected: w.dim(),
            rows: b.nrows(),
            cols: b.ncols(),
        });
    }
    ensure_finite(b)?;
    let generator = skew_part(&(b * w.matrix().transpose()))?;
    TangentVector::new(w.clone(), generator)
}

/// Riemannian gradient of a loss at W: Skew(G(W)Wᵀ)W, in generator form.
pub fn riemannian_grad(loss: &dyn DifferentiableLoss, w: &OrthogonalMatrix) -> Result<TangentVector> {
    let g = loss.euclidean_gradient(w.matrix());
    ensure_finite(&g)?;
    project_tangent(w, &g)
}

/// Which retraction maps a step back onto the manifold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Retraction {
    /// W ← exp(−ηA)W, the exponential map.
    Exponential,
    /// W ← (I + (η/2)A)⁻¹(I − (η/2)A)W, the symmetric Cayley transform.
    Cayley,
    /// Polar projection of W − ηAW back onto O(p).
    ProjectionPolar,
    /// QR orthonormalization of W − ηAW.
    ProjectionQr,
}

impl Retraction {
    pub fn apply(
        self,
        w: &OrthogonalMatrix,
        a: &SkewSymmetricMatrix,
        eta: f64,
    ) -> Result<OrthogonalMatrix> {
        match self {
            Retraction::Exponential => retract_exponential(w, a, eta),
            Retraction::Cayley => retract_cayley(w, a, eta),
            Retraction::ProjectionPolar => retract_projection(w, a, eta),
            Retraction::ProjectionQr => retract_projection_qr(w, a, eta),
        }
    }
}

fn check_dims(w: &OrthogonalMatrix, a: &SkewSymmetricMatrix, eta: f64) -> Result<()> {
    if w.dim() != a.dim() {
        return Err(Error::DimensionMismatch {
            expected: w.dim(),
            rows: a.dim(),
            cols: a.dim(),
        });
    }
    if !eta.is_finite() {
        return Err(Error::InvalidInput("step size must be finite".into()));
    }
    Ok(())
}

/// Exponential retraction: exp(−ηA)·W.
pub fn retract_exponential(
    w: &OrthogonalMatrix,
    a: &SkewSymmetricMatrix,
    eta: f64,
) -> Result<OrthogonalMatrix> {
    check_dims(w, a, eta)?;
    if eta == 0.0 || a.norm() == 0.0 {
        return Ok(w.clone());
    }
    let e = matrix_exp_skew(&a.scale(-eta));
    OrthogonalMatrix::new(e.matrix() * w.matrix())
}

/// Cayley retraction with symmetric splitting:
/// (I + (η/2)A)⁻¹(I − (η/2)A)·W. Second-order accurate against the
/// exponential. Always well defined for skew A and real η.
pub fn retract_cayley(
    w: &OrthogonalMatrix,
    a: &SkewSymmetricMatrix,
    eta: f64,
) -> Result<OrthogonalMatrix> {
    check_dims(w, a, eta)?;
    if eta == 0.0 || a.norm() == 0.0 {
        return Ok(w.clone());
    }
    let p = w.dim();
    let half = a.matrix() * (eta / 2.0);
    let plus = Mat::identity(p, p) + &half;
    let minus = Mat::identity(p, p) - &half;
    let rhs = minus * w.matrix();
    let result = plus
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("I + (η/2)A singular".into()))?;
    OrthogonalMatrix::new(result)
}

/// Orthogonal polar factor of a nonsingular matrix: the closest point of
/// O(p) in Frobenius norm. From the SVD M = UΣVᵀ the factor is UVᵀ.
pub fn polar_orthogonal_factor(m: &Mat) -> Result<OrthogonalMatrix> {
    ensure_finite(m)?;
    let svd = m.clone().svd(true, true);
    let min_sv = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_sv = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if !(min_sv > 1e-12 * f64::max(1.0, max_sv)) {
        return Err(Error::Singular(format!("polar factor of singular matrix (σ_min = {min_sv:.3e})")));
    }
    let u = svd.u.ok_or_else(|| Error::Singular("SVD did not converge".into()))?;
    let v_t = svd.v_t.ok_or_else(|| Error::Singular("SVD did not converge".into()))?;
    OrthogonalMatrix::new(u * v_t)
}

/// Projection retraction: polar projection of W − ηAW onto O(p).
pub fn retract_projection(
    w: &OrthogonalMatrix,
    a: &SkewSymmetricMatrix,
    eta: f64,
) -> Result<OrthogonalMatrix> {
    check_dims(w, a, eta)?;
    if eta == 0.0 || a.norm() == 0.0 {
        return Ok(w.clone());
    }
    let stepped = w.matrix() - (a.matrix() * w.matrix()) * eta;
    polar_orthogonal_factor(&stepped)
}

/// QR variant of the projection retraction.
pub fn retract_projection_qr(
    w: &OrthogonalMatrix,
    a: &SkewSymmetricMatrix,
    eta: f64,
) -> Result<OrthogonalMatrix> {
    check_dims(w, a, eta)?;
    if eta == 0.0 || a.norm() == 0.0 {
        return Ok(w.clone());
    }
    let stepped = w.matrix() - (a.matrix() * w.matrix()) * eta;
    qr_orthonormalize(&stepped)
}
