//! Matrix exponential against the independent Taylor-series oracle, plus
//! the equivariance identities under orthogonal conjugation.

mod common;

use common::{random_skew, taylor_exp};
use ortho_core::{
    haar_sample, matrix_exp_skew, skew_part, substream, Mat,
};

#[test]
fn exp_matches_taylor_oracle_at_unit_norm() {
    let mut rng = substream(0xE1, 0);
    for p in [2usize, 4, 8] {
        for _ in 0..20 {
            let a = random_skew(p, 1.0, &mut rng);
            let e = matrix_exp_skew(&a);
            let oracle = taylor_exp(a.matrix(), 30);
            assert!(
                (e.matrix() - &oracle).norm() < 1e-12,
                "p={p} gap {}",
                (e.matrix() - &oracle).norm()
            );
        }
    }
}

#[test]
fn exp_matches_taylor_oracle_below_unit_norm() {
    let mut rng = substream(0xE1, 1);
    for norm in [1e-3, 0.1, 0.5, 0.9] {
        let a = random_skew(6, norm, &mut rng);
        let e = matrix_exp_skew(&a);
        let oracle = taylor_exp(a.matrix(), 30);
        assert!((e.matrix() - &oracle).norm() < 1e-12);
    }
}

#[test]
fn exp_is_orthogonal_up_to_norm_ten() {
    let mut rng = substream(0xE1, 2);
    for norm in [2.0, 5.0, 10.0] {
        let a = random_skew(5, norm, &mut rng);
        let e = matrix_exp_skew(&a);
        assert!(e.defect() < 1e-12, "norm {norm}: defect {}", e.defect());
        let prod = e.matrix() * matrix_exp_skew(&a.scale(-1.0)).matrix();
        assert!((prod - Mat::identity(5, 5)).norm() < 1e-12);
    }
}

#[test]
fn skew_equivariance_under_conjugation() {
    // Skew(Q M Qᵀ) = Q Skew(M) Qᵀ for orthogonal Q
    let mut rng = substream(0xE1, 3);
    for p in [3usize, 8] {
        let q = haar_sample(p, 77 + p as u64).unwrap();
        let m = common::random_matrix(p, p, &mut rng);
        let lhs = skew_part(&(q.matrix() * &m * q.matrix().transpose())).unwrap();
        let rhs = q.matrix() * skew_part(&m).unwrap().matrix() * q.matrix().transpose();
        assert!((lhs.matrix() - rhs).norm() < 1e-12);
    }
}

#[test]
fn exp_equivariance_under_conjugation() {
    // exp(Q A Qᵀ) = Q exp(A) Qᵀ for orthogonal Q
    let mut rng = substream(0xE1, 4);
    for p in [3usize, 8] {
        let q = haar_sample(p, 99 + p as u64).unwrap();
        let a = random_skew(p, 1.5, &mut rng);
        let conj = skew_part(&(q.matrix() * a.matrix() * q.matrix().transpose())).unwrap();
        let lhs = matrix_exp_skew(&conj);
        let rhs = q.matrix() * matrix_exp_skew(&a).matrix() * q.matrix().transpose();
        assert!((lhs.matrix() - rhs).norm() < 1e-11);
    }
}

#[test]
fn determinant_one_for_random_generators() {
    let mut rng = substream(0xE1, 5);
    for p in [2usize, 7, 16] {
        let a = random_skew(p, 3.0, &mut rng);
        let e = matrix_exp_skew(&a);
        assert!((e.matrix().determinant() - 1.0).abs() < 1e-10);
    }
}
