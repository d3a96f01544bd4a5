//! Skew-symmetric matrices, the Lie algebra of the orthogonal group.

use crate::error::{Error, Result};
use crate::matrix::{ensure_finite, ensure_square, Mat};

/// A p×p real matrix A with Aᵀ = −A, stored exactly skew: the constructor
/// rebuilds the lower triangle as the negated upper triangle and zeroes the
/// diagonal, so skewness is structural, not a numerical tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct SkewSymmetricMatrix {
    inner: Mat,
}

impl SkewSymmetricMatrix {
    /// Builds from a matrix that is already skew-symmetric within
    /// ‖A + Aᵀ‖_F ≤ 1e−12·max(1, ‖A‖_F), then enforces exact skewness.
    pub fn new(m: Mat) -> Result<Self> {
        ensure_square(&m)?;
        ensure_finite(&m)?;
        let sym = (&m + m.transpose()).norm();
        if sym > 1e-12 * f64::max(1.0, m.norm()) {
            return Err(Error::InvalidInput(format!(
                "matrix is not skew-symmetric: ‖A + Aᵀ‖_F = {sym:.3e}"
            )));
        }
        Ok(Self::enforce(m))
    }

    /// Exactly symmetrizes: A ← (A − Aᵀ)/2 with the lower triangle set to
    /// the negation of the upper, diagonal exactly zero.
    fn enforce(m: Mat) -> Self {
        let p = m.nrows();
        let mut a = Mat::zeros(p, p);
        for i in 0..p {
            for j in (i + 1)..p {
                let v = 0.5 * (m[(i, j)] - m[(j, i)]);
                a[(i, j)] = v;
                a[(j, i)] = -v;
            }
        }
        Self { inner: a }
    }

    pub fn zero(p: usize) -> Self {
        Self { inner: Mat::zeros(p, p) }
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

    pub fn norm(&self) -> f64 {
        self.inner.norm()
    }

    /// Scales the generator; skewness is preserved exactly.
    pub fn scale(&self, s: f64) -> Self {
        Self { inner: &self.inner * s }
    }
}

/// Skew(M) = (M − Mᵀ)/2, the projection of M onto skew-symmetric matrices.
pub fn skew_part(m: &Mat) -> Result<SkewSymmetricMatrix> {
    ensure_square(m)?;
    ensure_finite(m)?;
    Ok(SkewSymmetricMatrix::enforce(m.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn skew_part_of_symmetric_is_zero() {
        let m = Mat::identity(3, 3);
        let a = skew_part(&m).unwrap();
        assert_eq!(a.norm(), 0.0);
    }

    #[test]
    fn skew_part_fixes_skew_input() {
        let m = Mat::from_row_slice(2, 2, &[0.0, -0.7, 0.7, 0.0]);
        let a = skew_part(&m).unwrap();
        assert_eq!(a.matrix(), &m);
    }

    #[test]
    fn skew_part_worked_example() {
        // M = [[1,2],[3,4]] → [[0,−0.5],[0.5,0]]
        let m = Mat::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let a = skew_part(&m).unwrap();
        let expected = Mat::from_row_slice(2, 2, &[0.0, -0.5, 0.5, 0.0]);
        assert_eq!(a.matrix(), &expected);
    }

    #[test]
    fn skewness_is_exact() {
        let m = Mat::from_fn(5, 5, |i, j| ((i * 31 + j * 17) % 13) as f64 * 0.37 - 1.0);
        let a = skew_part(&m).unwrap();
        let s = a.matrix() + a.matrix().transpose();
        assert_eq!(s.norm(), 0.0);
        for i in 0..5 {
            assert_eq!(a.matrix()[(i, i)], 0.0);
        }
    }

    #[test]
    fn new_rejects_far_from_skew() {
        let m = Mat::identity(2, 2);
        assert!(SkewSymmetricMatrix::new(m).is_err());
    }

    #[test]
    fn new_rejects_non_finite() {
        let mut m = Mat::zeros(2, 2);
        m[(0, 1)] = f64::INFINITY;
        m[(1, 0)] = f64::NEG_INFINITY;
        assert!(SkewSymmetricMatrix::new(m).is_err());
    }
}
