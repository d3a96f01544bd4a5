//! End-to-end training runs: descent, the deep/shallow trajectory match,
//! flow integration orders, and divergence handling.

mod common;

use common::random_matrix;
use ortho_core::{
    deep_rgd, flow_integrate, flow_integrate_lie_euler, haar_sample, haar_sample_with_rng,
    polar_orthogonal_factor, product, shallow_rgd, substream, write_trajectory_csv,
    DifferentiableLoss, LinearTraceLoss, Mat, NetworkWeights, ProcrustesLoss, Retraction,
    TrainConfig, TrainError,
};

fn procrustes(p: usize, seed: u64) -> ProcrustesLoss {
    ProcrustesLoss::new(haar_sample(p, seed).unwrap())
}

#[test]
fn zero_steps_yields_single_record() {
    let pi0 = haar_sample(4, 1).unwrap();
    let loss = procrustes(4, 2);
    let records = shallow_rgd(&pi0, &loss, 0.1, 0, Retraction::Exponential).unwrap();
    assert_eq!(records.len(), 1);
    assert_eq!(records[0].product.matrix(), pi0.matrix());
}

#[test]
fn stationary_initialization_stays_fixed() {
    let t = haar_sample(4, 3).unwrap();
    let loss = ProcrustesLoss::new(t.clone());
    let records = shallow_rgd(&t, &loss, 0.1, 50, Retraction::Exponential).unwrap();
    for r in &records {
        assert!((r.product.matrix() - t.matrix()).norm() < 1e-12);
        assert!(r.loss < 1e-20);
    }
}

#[test]
fn shallow_procrustes_converges_monotonically() {
    let p = 4;
    let loss = procrustes(p, 6);
    let mut init = haar_sample(p, 5).unwrap().into_inner();
    if init.determinant() * loss.target().determinant() < 0.0 {
        init.swap_rows(0, 1);
    }
    let pi0 = ortho_core::OrthogonalMatrix::new(init).unwrap();
    let records = shallow_rgd(&pi0, &loss, 0.1, 200, Retraction::Exponential).unwrap();
    assert_eq!(records.len(), 201);
    for pair in records.windows(2) {
        assert!(pair[1].loss <= pair[0].loss + 1e-15, "loss increased");
    }
    assert!(records[200].loss < 1e-8 * records[0].loss);
    assert!(records[200].generator_norm <= 1e-6);
    for r in &records {
        assert!(r.product_defect <= 1e-10);
        assert!(r.step == r.product.dim() * 0 + r.step); // indices present
    }
}

#[test]
fn deep_and_shallow_trajectories_coincide() {
    let (p, depth, eta, steps) = (8usize, 5usize, 0.05, 100usize);
    let mut rng = substream(0x7A, 0);
    let layers = (0..depth)
        .map(|_| haar_sample_with_rng(p, &mut rng).unwrap())
        .collect();
    let weights = NetworkWeights::new(layers).unwrap();
    let loss = ProcrustesLoss::new(haar_sample_with_rng(p, &mut rng).unwrap());

    let deep = deep_rgd(&weights, &loss, eta, steps, Retraction::Exponential).unwrap();
    let shallow =
        shallow_rgd(&product(&weights), &loss, eta, steps, Retraction::Exponential).unwrap();

    let max_dev = deep
        .iter()
        .zip(&shallow)
        .map(|(d, s)| (d.product.matrix() - s.product.matrix()).norm())
        .fold(0.0, f64::max);
    assert!(max_dev <= 1e-8, "max deviation {max_dev}");
}

#[test]
fn depth_one_deep_run_is_bitwise_shallow() {
    let p = 6;
    let pi0 = haar_sample(p, 9).unwrap();
    let loss = procrustes(p, 10);
    let weights = NetworkWeights::new(vec![pi0.clone()]).unwrap();
    let deep = deep_rgd(&weights, &loss, 0.1, 50, Retraction::Exponential).unwrap();
    let shallow = shallow_rgd(&pi0, &loss, 0.1, 50, Retraction::Exponential).unwrap();
    for (d, s) in deep.iter().zip(&shallow) {
        assert_eq!(d.product.matrix(), s.product.matrix());
        assert_eq!(d.loss, s.loss);
    }
}

#[test]
fn identity_initialized_network_tracks_shallow_from_identity() {
    let p = 5;
    let loss = procrustes(p, 11);
    let weights = NetworkWeights::identity(p, 4).unwrap();
    let deep = deep_rgd(&weights, &loss, 0.1, 80, Retraction::Exponential).unwrap();
    let shallow = shallow_rgd(
        &ortho_core::OrthogonalMatrix::identity(p),
        &loss,
        0.1,
        80,
        Retraction::Exponential,
    )
    .unwrap();
    for (d, s) in deep.iter().zip(&shallow) {
        assert!((d.product.matrix() - s.product.matrix()).norm() < 1e-9);
    }
}

#[test]
fn trajectories_are_deterministic() {
    let p = 4;
    let pi0 = haar_sample(p, 12).unwrap();
    let loss = procrustes(p, 13);
    let a = shallow_rgd(&pi0, &loss, 0.1, 30, Retraction::Exponential).unwrap();
    let b = shallow_rgd(&pi0, &loss, 0.1, 30, Retraction::Exponential).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.product.matrix(), y.product.matrix());
        assert_eq!(x.loss, y.loss);
    }
}

#[test]
fn flow_with_zero_horizon_returns_initial_point() {
    let pi0 = haar_sample(4, 14).unwrap();
    let loss = procrustes(4, 15);
    let records = flow_integrate(&pi0, &loss, 0.0, 0.01).unwrap();
    assert_eq!(records.len(), 1);
    assert_eq!(records[0].product.matrix(), pi0.matrix());
}

#[test]
fn flow_from_stationary_point_is_constant() {
    let t = haar_sample(4, 16).unwrap();
    let loss = ProcrustesLoss::new(t.clone());
    let records = flow_integrate(&t, &loss, 1.0, 0.05).unwrap();
    for r in &records {
        assert!((r.product.matrix() - t.matrix()).norm() < 1e-12);
    }
}

#[test]
fn rk4_self_convergence_is_fourth_order() {
    let p = 4;
    let pi0 = haar_sample(p, 17).unwrap();
    let loss = procrustes(p, 18);
    let t_end = 1.0;
    let endpoint = |dt: f64| {
        flow_integrate(&pi0, &loss, t_end, dt)
            .unwrap()
            .last()
            .unwrap()
            .product
            .matrix()
            .clone()
    };
    let e1 = endpoint(0.1);
    let e2 = endpoint(0.05);
    let e3 = endpoint(0.025);
    let ratio = (&e1 - &e2).norm() / (&e2 - &e3).norm();
    assert!((10.0..22.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn flow_endpoint_stable_under_refinement() {
    let p = 4;
    let pi0 = haar_sample(p, 19).unwrap();
    let loss = procrustes(p, 20);
    let a = flow_integrate(&pi0, &loss, 1.0, 0.02).unwrap();
    let b = flow_integrate(&pi0, &loss, 1.0, 0.01).unwrap();
    let gap = (a.last().unwrap().product.matrix() - b.last().unwrap().product.matrix()).norm();
    assert!(gap <= 1e-8, "gap {gap}");
}

#[test]
fn discrete_rgd_approaches_the_flow_at_first_order() {
    let p = 4;
    let pi0 = haar_sample(p, 21).unwrap();
    let loss = procrustes(p, 22);
    let t_end = 1.0;
    let reference = flow_integrate(&pi0, &loss, t_end, 1e-3)
        .unwrap()
        .last()
        .unwrap()
        .product
        .matrix()
        .clone();
    let gap = |eta: f64| {
        let steps = (t_end / eta).round() as usize;
        let records = shallow_rgd(&pi0, &loss, eta, steps, Retraction::Exponential).unwrap();
        (records.last().unwrap().product.matrix() - &reference).norm()
    };
    let ratio1 = gap(0.1) / gap(0.05);
    let ratio2 = gap(0.05) / gap(0.025);
    assert!((1.7..2.3).contains(&ratio1), "ratio1 {ratio1}");
    assert!((1.7..2.3).contains(&ratio2), "ratio2 {ratio2}");
}

#[test]
fn lie_euler_flow_agrees_with_rk4() {
    let p = 4;
    let pi0 = haar_sample(p, 23).unwrap();
    let loss = procrustes(p, 24);
    let rk4 = flow_integrate(&pi0, &loss, 1.0, 1e-3).unwrap();
    let lie = flow_integrate_lie_euler(&pi0, &loss, 1.0, 1e-4).unwrap();
    let gap =
        (rk4.last().unwrap().product.matrix() - lie.last().unwrap().product.matrix()).norm();
    assert!(gap < 1e-3, "gap {gap}");
    for r in &lie {
        assert!(r.product_defect <= 1e-10);
    }
}

#[test]
fn trace_loss_descends_to_the_polar_factor() {
    let p = 3;
    let mut rng = substream(0x7A, 1);
    let c = random_matrix(p, p, &mut rng);
    let loss = LinearTraceLoss::new(c.clone()).unwrap();
    let target = polar_orthogonal_factor(&(-&c)).unwrap();

    // The exponential retraction cannot leave the initial SO-component, so
    // match the determinant of the target before descending.
    let mut pi0 = haar_sample(p, 31).unwrap().into_inner();
    if pi0.determinant() * target.matrix().determinant() < 0.0 {
        pi0.swap_rows(0, 1);
    }
    let pi0 = ortho_core::OrthogonalMatrix::new(pi0).unwrap();

    let records = shallow_rgd(&pi0, &loss, 0.1, 4000, Retraction::Exponential).unwrap();
    let dist = (records.last().unwrap().product.matrix() - target.matrix()).norm();
    assert!(dist <= 1e-6, "distance to polar factor {dist}");
}

#[test]
fn divergent_loss_aborts_with_last_good_record() {
    struct ExplodingLoss;
    impl DifferentiableLoss for ExplodingLoss {
        fn dim(&self) -> usize {
            3
        }
        fn value(&self, x: &Mat) -> f64 {
            // Finite at the start, absurd after the first step moves W.
            if (x - Mat::identity(3, 3)).norm() < 1e-12 {
                1.0
            } else {
                1e15
            }
        }
        fn euclidean_gradient(&self, _x: &Mat) -> Mat {
            Mat::from_fn(3, 3, |i, j| (i as f64 - j as f64) * 10.0)
        }
    }

    let pi0 = ortho_core::OrthogonalMatrix::identity(3);
    let err = shallow_rgd(&pi0, &ExplodingLoss, 0.5, 10, Retraction::Exponential).unwrap_err();
    match err {
        TrainError::Diverged { step, records } => {
            assert_eq!(step, 1);
            assert_eq!(records.len(), 2);
            assert!(records[0].loss.is_finite());
        }
        other => panic!("expected divergence, got {other}"),
    }
}

#[test]
fn csv_serialization_has_expected_header_and_rows() {
    let pi0 = haar_sample(3, 25).unwrap();
    let loss = procrustes(3, 26);
    let records = shallow_rgd(&pi0, &loss, 0.1, 10, Retraction::Exponential).unwrap();
    let mut buf = Vec::new();
    write_trajectory_csv(&mut buf, &records, 1).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "step,t,loss,generator_norm,max_layer_defect,product_defect"
    );
    assert_eq!(lines.count(), 11);

    let mut buf = Vec::new();
    write_trajectory_csv(&mut buf, &records, 5).unwrap();
    let text = String::from_utf8(buf).unwrap();
    // strided: records 0, 5, 10 plus header
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn config_validation_rejects_bad_values() {
    let good = TrainConfig {
        p: 4,
        depth: 2,
        eta: 0.1,
        steps: 10,
        seed: 0,
        retraction: Retraction::Exponential,
        record_stride: 1,
    };
    assert!(good.validate().is_ok());
    assert!(TrainConfig { p: 0, ..good.clone() }.validate().is_err());
    assert!(TrainConfig { depth: 0, ..good.clone() }.validate().is_err());
    assert!(TrainConfig { eta: 0.0, ..good.clone() }.validate().is_err());
    assert!(TrainConfig { eta: f64::NAN, ..good.clone() }.validate().is_err());
    assert!(TrainConfig { record_stride: 0, ..good }.validate().is_err());
}

#[test]
fn other_retractions_also_descend() {
    let p = 4;
    let loss = procrustes(p, 28);
    // Stay in the target's SO-component: retractions cannot cross over,
    // and the wrong component bottoms out at a positive loss.
    let mut init = haar_sample(p, 27).unwrap().into_inner();
    if init.determinant() * loss.target().determinant() < 0.0 {
        init.swap_rows(0, 1);
    }
    let pi0 = ortho_core::OrthogonalMatrix::new(init).unwrap();
    for r in [
        Retraction::Cayley,
        Retraction::ProjectionPolar,
        Retraction::ProjectionQr,
    ] {
        let records = shallow_rgd(&pi0, &loss, 0.1, 200, Retraction::Exponential).unwrap();
        let alt = shallow_rgd(&pi0, &loss, 0.1, 200, r).unwrap();
        assert!(alt.last().unwrap().loss < 1e-8 * alt[0].loss, "{r:?}");
        // Small-step trajectories of different retractions stay close.
        let gap = (records[1].product.matrix() - alt[1].product.matrix()).norm();
        assert!(gap < 1e-2, "{r:?} first-step gap {gap}");
    }
}
