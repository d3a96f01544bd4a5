//! QR orthonormalization with the positive-diagonal sign convention.
//!
//! The convention diag(R) > 0 makes Q unique and is what turns QR of a
//! Gaussian matrix into a Haar sample (Mezzadri 2007).

use crate::error::{Error, Result};
use crate::matrix::{ensure_finite, ensure_square, Mat};
use crate::orthogonal::OrthogonalMatrix;

/// Returns the Q factor of M = QR with diag(R) > 0.
pub fn qr_orthonormalize(m: &Mat) -> Result<OrthogonalMatrix> {
    ensure_square(m)?;
    ensure_finite(m)?;
    let p = m.nrows();
    let qr = m.clone().qr();
    let mut q = qr.q();
    let r = qr.r();

    let mut max_diag: f64 = 0.0;
    let mut min_diag = f64::INFINITY;
    for j in 0..p {
        let d = r[(j, j)].abs();
        max_diag = max_diag.max(d);
        min_diag = min_diag.min(d);
    }
    if min_diag <= 1e-10 * max_diag {
        return Err(Error::Singular(format!(
            "rank-deficient input: |R| diagonal ratio {:.3e}",
            min_diag / max_diag
        )));
    }

    for j in 0..p {
        if r[(j, j)] < 0.0 {
            for i in 0..p {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    OrthogonalMatrix::new(q)
}
