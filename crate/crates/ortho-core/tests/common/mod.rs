//! Shared test oracles, independent of the implementation paths they check.
#![allow(dead_code)] // each integration test binary uses a subset

use ortho_core::{skew_part, Mat, SkewSymmetricMatrix};
use rand::Rng;
use rand_distr::StandardNormal;

/// Truncated Taylor series Σ_{k≤30} Aᵏ/k!. For ‖A‖_F ≤ 1 the remainder
/// is bounded by ‖A‖^31/31! ≈ 1e−34, far below double rounding.
pub fn taylor_exp(a: &Mat, terms: usize) -> Mat {
    let p = a.nrows();
    let mut sum = Mat::identity(p, p);
    let mut term = Mat::identity(p, p);
    for k in 1..=terms {
        term = (&term * a) / k as f64;
        sum += &term;
    }
    sum
}

/// Random skew-symmetric matrix with Gaussian entries, scaled to the
/// requested Frobenius norm.
pub fn random_skew(p: usize, norm: f64, rng: &mut impl Rng) -> SkewSymmetricMatrix {
    let g = Mat::from_fn(p, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let a = skew_part(&g).unwrap();
    if a.norm() == 0.0 {
        return a;
    }
    a.scale(norm / a.norm())
}

/// Random Gaussian matrix.
pub fn random_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}
