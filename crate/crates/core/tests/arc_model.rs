use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, PI};

use approx::assert_abs_diff_eq;
use beadjam_core::arc_model::SERIES_THRESHOLD;
use beadjam_core::pose::rot_z;
use beadjam_core::{arc_point, arc_tip_position, arc_transform, compose, fit_arc, ArcParams, Pose};
use nalgebra::{Matrix3, Matrix4, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Closed-form tip written out directly from the circle geometry, independent of the library.
fn oracle_tip(phi: f64, theta: f64, length: f64) -> Vector3<f64> {
    let r = length / theta;
    let planar = Vector3::new(r * (1.0 - theta.cos()), 0.0, r * theta.sin());
    Vector3::new(phi.cos() * planar.x, phi.sin() * planar.x, planar.z)
}

/// Rz(φ)·Ry(θ)·Rz(−φ) with the tip translation, as a 4×4 matrix.
fn oracle_homogeneous(phi: f64, theta: f64, length: f64) -> Matrix4<f64> {
    let rz = |a: f64| Matrix3::new(a.cos(), -a.sin(), 0.0, a.sin(), a.cos(), 0.0, 0.0, 0.0, 1.0);
    let ry = |a: f64| Matrix3::new(a.cos(), 0.0, a.sin(), 0.0, 1.0, 0.0, -a.sin(), 0.0, a.cos());
    let r = rz(phi) * ry(theta) * rz(-phi);
    let p = oracle_tip(phi, theta, length);
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&p);
    m
}

fn arc(phi: f64, theta: f64, length: f64) -> ArcParams {
    ArcParams::new(phi, theta, length).unwrap()
}

#[test]
fn tip_examples() {
    assert_abs_diff_eq!(arc_tip_position(&arc(0.0, 0.0, 200.0)), Vector3::new(0.0, 0.0, 200.0), epsilon = 1e-12);
    let quarter = arc_tip_position(&arc(0.0, FRAC_PI_2, 200.0));
    assert_abs_diff_eq!(quarter, Vector3::new(127.3240, 0.0, 127.3240), epsilon = 1e-4);
    let side = arc_tip_position(&arc(FRAC_PI_2, FRAC_PI_3, 200.0));
    let front = arc_tip_position(&arc(0.0, FRAC_PI_3, 200.0));
    assert_abs_diff_eq!(side, rot_z(FRAC_PI_2) * front, epsilon = 1e-12);
    assert_abs_diff_eq!(side.x, 0.0, epsilon = 1e-12);
}

#[test]
fn transform_examples() {
    for phi in [0.0, 1.0, -2.5, PI] {
        let t = arc_transform(&arc(phi, 0.0, 100.0));
        assert_abs_diff_eq!(t.rotation, Matrix3::identity(), epsilon = 1e-15);
        assert_abs_diff_eq!(t.translation, Vector3::new(0.0, 0.0, 100.0), epsilon = 1e-12);
    }
    let t = arc_transform(&arc(0.0, FRAC_PI_2, 200.0));
    assert_abs_diff_eq!(t.rotation, beadjam_core::pose::rot_y(FRAC_PI_2), epsilon = 1e-12);
    assert_abs_diff_eq!(t.translation, Vector3::new(127.3240, 0.0, 127.3240), epsilon = 1e-4);
}

#[test]
fn half_arcs_multiply_to_the_whole() {
    let (phi, theta, length) = (0.8, 1.9, 310.0);
    let half = oracle_homogeneous(phi, theta / 2.0, length / 2.0);
    let lib = compose(&[arc_transform(&arc(phi, theta / 2.0, length / 2.0)); 2]).unwrap();
    assert!((lib.to_homogeneous() - half * half).amax() <= 1e-9);
    assert!((lib.to_homogeneous() - oracle_homogeneous(phi, theta, length)).amax() <= 1e-9);
}

#[test]
fn compose_identities() {
    assert_eq!(compose(&[Pose::identity()]).unwrap(), Pose::identity());
    let t = arc_transform(&arc(0.4, 1.2, 250.0));
    let round = compose(&[t, t.inverse()]).unwrap();
    assert!(round.max_abs_diff(&Pose::identity()) <= 1e-9);
}

#[test]
fn series_branch_is_continuous_at_the_switch() {
    for phi in [0.0, 0.3, -1.7, PI] {
        for length in [50.0, 400.0, 800.0] {
            let below = arc_transform(&arc(phi, SERIES_THRESHOLD * (1.0 - 1e-13), length));
            let above = arc_transform(&arc(phi, SERIES_THRESHOLD * (1.0 + 1e-13), length));
            assert!(below.max_abs_diff(&above) <= 1e-9);
            let exact = oracle_tip(phi, SERIES_THRESHOLD * (1.0 - 1e-13), length);
            assert!((below.translation - exact).amax() <= 1e-9);
        }
    }
    let tiny = arc_tip_position(&arc(0.2, 1e-9, 300.0));
    assert!((tiny - Vector3::new(0.0, 0.0, 300.0)).norm() < 1e-6);
}

#[test]
fn polyline_through_dense_samples_keeps_arc_length() {
    for (phi, theta) in [(0.0, 0.5), (1.1, 2.0), (-2.0, PI)] {
        let (u, v) = arc(phi, theta, 400.0).curvature_vector();
        let k = 256;
        let pts: Vec<Vector3<f64>> = (0..=k).map(|i| arc_point(u, v, 400.0, 400.0 * i as f64 / k as f64)).collect();
        let len: f64 = pts.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
        assert!((len - 400.0).abs() / 400.0 < 1e-4, "{len}");
    }
}

#[test]
fn fit_recovers_exact_samples() {
    let truth = arc(FRAC_PI_4, 1.0, 200.0);
    let (u, v) = truth.curvature_vector();
    let pts: Vec<Vector3<f64>> = (0..20).map(|i| arc_point(u, v, 200.0, 200.0 * i as f64 / 19.0)).collect();
    let fit = fit_arc(&pts).unwrap();
    assert!(fit.residual <= 1e-6);
    assert_abs_diff_eq!(fit.arc.phi(), FRAC_PI_4, epsilon = 1e-6);
    assert_abs_diff_eq!(fit.arc.theta(), 1.0, epsilon = 1e-6);
    assert_abs_diff_eq!(fit.arc.length(), 200.0, epsilon = 1e-5);
}

#[test]
fn fit_collinear_extent() {
    let pts: Vec<Vector3<f64>> = (0..10).map(|i| Vector3::new(0.0, 0.0, 150.0 * i as f64 / 9.0)).collect();
    let fit = fit_arc(&pts).unwrap();
    assert_eq!(fit.arc.phi(), 0.0);
    assert_abs_diff_eq!(fit.arc.theta(), 0.0, epsilon = 1e-9);
    assert_abs_diff_eq!(fit.arc.length(), 150.0, epsilon = 1e-9);
    assert!(fit.residual <= 1e-9);
}

#[test]
fn fit_under_uniform_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let truth = arc(0.6, 1.0, 200.0);
    let (u, v) = truth.curvature_vector();
    let clean: Vec<Vector3<f64>> = (0..20).map(|i| arc_point(u, v, 200.0, 200.0 * i as f64 / 19.0)).collect();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let noisy: Vec<Vector3<f64>> = clean
            .iter()
            .enumerate()
            .map(|(i, p)| {
                // The base point is the segment origin and stays exact.
                if i == 0 {
                    *p
                } else {
                    p + Vector3::from_fn(|_, _| rng.random_range(-0.5..=0.5))
                }
            })
            .collect();
        let fit = fit_arc(&noisy).unwrap();
        worst = worst.max((fit.arc.theta() - 1.0).abs());
    }
    assert!(worst < 0.02, "worst θ error {worst}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn subdivision_closure(phi in -PI..PI, theta in 1e-6..PI, length in 50.0..800.0, n in 1usize..=64) {
        let a = arc(phi, theta, length);
        let parts: Vec<Pose> = a.subdivide(n).iter().map(arc_transform).collect();
        prop_assert!(compose(&parts).unwrap().max_abs_diff(&arc_transform(&a)) <= 1e-9);
    }

    #[test]
    fn matches_the_closed_form(phi in -PI..PI, theta in 1e-3..PI, length in 50.0..800.0) {
        let a = arc(phi, theta, length);
        prop_assert!((arc_transform(&a).to_homogeneous() - oracle_homogeneous(a.phi(), theta, length)).amax() <= 1e-9);
        prop_assert!((arc_tip_position(&a) - arc_transform(&a).translation).amax() <= 1e-12);
    }

    #[test]
    fn phi_equivariance(phi in -PI..PI, theta in 0.0..PI, length in 50.0..800.0) {
        let rotated = arc_tip_position(&arc(phi, theta, length));
        let planar = arc_tip_position(&arc(0.0, theta, length));
        prop_assert!((rotated - rot_z(phi) * planar).amax() <= 1e-12 * length);
    }

    #[test]
    fn transforms_are_proper(phi in -PI..PI, theta in 0.0..PI, length in 1.0..800.0) {
        prop_assert!(arc_transform(&arc(phi, theta, length)).is_proper(1e-9));
    }

    #[test]
    fn fit_inverts_sampling(phi in -3.0..3.0f64, theta in 0.2..2.5f64, length in 80.0..500.0) {
        let a = arc(phi, theta, length);
        let (u, v) = a.curvature_vector();
        let pts: Vec<Vector3<f64>> = (0..15).map(|i| arc_point(u, v, length, length * i as f64 / 14.0)).collect();
        let fit = fit_arc(&pts).unwrap();
        prop_assert!(fit.residual <= 1e-6);
        prop_assert!((fit.arc.theta() - theta).abs() <= 1e-6);
        prop_assert!((fit.arc.length() - length).abs() <= 1e-5);
    }
}
