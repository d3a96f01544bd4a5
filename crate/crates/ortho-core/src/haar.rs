//! Haar-distributed random orthogonal matrices.
//!
//! Sampling: fill a p×p matrix with independent standard Gaussians
//! (row-major order), then QR with the diag(R) > 0 convention. The RNG is
//! ChaCha8, so samples are reproducible across platforms. Independent
//! streams are derived from a master seed with [`substream`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matrix::Mat;
use crate::orthogonal::OrthogonalMatrix;
use crate::qr::qr_orthonormalize;

/// The portable generator used throughout.
pub type Prng = ChaCha8Rng;

/// RNG for a substream of `master`: same key, ChaCha stream id = `index`.
/// Streams with distinct indices never overlap.
pub fn substream(master: u64, index: u64) -> Prng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

/// A p×p standard-Gaussian matrix, entries drawn in row-major order.
pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> Mat {
    let mut m = Mat::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = rng.sample(StandardNormal);
        }
    }
    m
}

/// Haar sample on O(p) from an existing RNG.
pub fn haar_sample_with_rng(p: usize, rng: &mut impl Rng) -> Result<OrthogonalMatrix> {
    if p == 0 {
        return Err(Error::InvalidInput("p must be ≥ 1".into()));
    }
    // A Gaussian matrix is singular with probability zero, but resample on
    // the measure-zero failure path rather than erroring.
    loop {
        let g = gaussian_matrix(p, p, rng);
        match qr_orthonormalize(&g) {
            Ok(q) => return Ok(q),
            Err(Error::Singular(_)) => continue,
            Err(e) => return Err(e),
        }
    }
}

/// Deterministic Haar sample for a fixed (p, seed).
pub fn haar_sample(p: usize, seed: u64) -> Result<OrthogonalMatrix> {
    let mut rng = Prng::seed_from_u64(seed);
    haar_sample_with_rng(p, &mut rng)
}
