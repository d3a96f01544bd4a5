//! Points on the orthogonal manifold O(p).

use crate::error::{Error, Result};
use crate::matrix::{ensure_finite, ensure_square, orthogonality_defect, Mat};

/// Construction tolerance on ‖WWᵀ − I‖_F.
pub const ORTHOGONALITY_TOL: f64 = 1e-10;

/// A p×p matrix with WWᵀ = I within [`ORTHOGONALITY_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalMatrix {
    inner: Mat,
}

impl OrthogonalMatrix {
    pub fn new(m: Mat) -> Result<Self> {
        ensure_square(&m)?;
        ensure_finite(&m)?;
        let defect = orthogonality_defect(&m);
        if defect > ORTHOGONALITY_TOL {
            return Err(Error::OrthogonalityLost { defect });
        }
        Ok(Self { inner: m })
    }

    pub fn identity(p: usize) -> Self {
        Self { inner: Mat::identity(p, p) }
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn matrix(&self) -> &Mat {
        &self.inner
    }

    pub fn into_inner(self) -> Mat {
        self.inner
    }

    /// ‖WWᵀ − I‖_F of the stored matrix.
    pub fn defect(&self) -> f64 {
        orthogonality_defect(&self.inner)
    }

    /// The transpose, which is also the inverse.
    pub fn transpose(&self) -> Self {
        Self { inner: self.inner.transpose() }
    }
}
