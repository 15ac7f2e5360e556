use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, PI};

use approx::assert_abs_diff_eq;
use beadjam_core::bead_chain::forward_kinematics_with_families;
use beadjam_core::pose::rot_z;
use beadjam_core::{
    arc_tip_position, arc_to_chain, arcs_to_state, chain_forward_kinematics, chain_to_arcs, default_spec, fit_arc,
    tip_position, ArcParams, ChainState, JointFamily, ManipulatorSpec, Pose,
};
use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn one_segment(bead_count: usize, length: f64) -> ManipulatorSpec {
    let mut spec = default_spec();
    spec.segments.truncate(1);
    spec.segments[0].bead_count = bead_count;
    spec.segments[0].bead.pitch = length / bead_count as f64;
    spec.segments[0].tendons.clear();
    spec
}

#[test]
fn straight_column_and_uniform_compression() {
    let spec = default_spec();
    let n = spec.joint_count();
    let frames = chain_forward_kinematics(&spec, &ChainState::zeros(n)).unwrap();
    for (k, f) in frames.iter().enumerate() {
        assert_abs_diff_eq!(f.translation, Vector3::new(0.0, 0.0, 20.0 * (k + 1) as f64), epsilon = 1e-12);
        assert_eq!(f.rotation, Matrix3::identity());
    }
    let gap = spec.segments[0].hinge.free_gap;
    let squeezed = ChainState {
        joint_angles: vec![0.0; n],
        hinge_compressions: vec![gap; n],
    };
    let frames = chain_forward_kinematics(&spec, &squeezed).unwrap();
    for (k, f) in frames.iter().enumerate() {
        assert_abs_diff_eq!(f.translation.z, (k + 1) as f64 * (20.0 - gap), epsilon = 1e-12);
        assert_eq!(f.rotation, Matrix3::identity());
    }
}

#[test]
fn twenty_joints_follow_a_diagonal_arc() {
    let spec = one_segment(20, 400.0);
    let a = ArcParams::new(FRAC_PI_4, 60f64.to_radians(), 400.0).unwrap();
    let state = arcs_to_state(&spec, &[a]).unwrap();
    let err = (tip_position(&spec, &state).unwrap() - arc_tip_position(&a)).norm();
    assert!(err <= 0.02 * 400.0, "{err}");
}

#[test]
fn in_plane_arc_loads_only_x_joints() {
    let seg = &default_spec().segments[0];
    let angles = arc_to_chain(seg, &ArcParams::new(0.0, 0.6, 200.0).unwrap()).unwrap();
    for (j, a) in angles.iter().enumerate() {
        match j {
            _ if j % 2 == 1 => assert_eq!(*a, 0.0),
            // Interior joints take the uniform share; the base joint half of it.
            0 => assert_abs_diff_eq!(*a, 0.06, epsilon = 1e-12),
            _ => assert_abs_diff_eq!(*a, 0.12, epsilon = 1e-12),
        }
    }
    let swapped = arc_to_chain(seg, &ArcParams::new(FRAC_PI_2, 0.6, 200.0).unwrap()).unwrap();
    for (j, a) in swapped.iter().enumerate() {
        if j % 2 == 0 {
            assert_abs_diff_eq!(*a, 0.0, epsilon = 1e-15);
        } else if (3..=7).contains(&j) {
            assert_abs_diff_eq!(*a, 0.12, epsilon = 1e-12);
        }
    }
}

#[test]
fn diagonal_arc_splits_evenly_and_fits_back() {
    let spec = default_spec();
    let a = ArcParams::new(FRAC_PI_4, 0.6, 200.0).unwrap();
    let angles = arc_to_chain(&spec.segments[0], &a).unwrap();
    for x in &angles[2..9] {
        assert_abs_diff_eq!(*x, 0.6 * FRAC_1_SQRT_2 / 5.0, epsilon = 1e-12);
    }
    let mut state = ChainState::zeros(spec.joint_count());
    state.joint_angles[..10].copy_from_slice(&angles);
    let frames = chain_forward_kinematics(&spec, &state).unwrap();
    let mut pts = vec![Vector3::zeros()];
    pts.extend(frames[..10].iter().map(|f| f.translation));
    let fit = fit_arc(&pts).unwrap();
    assert!((fit.arc.phi() - FRAC_PI_4).abs() < 0.01, "{}", fit.arc.phi());
}

#[test]
fn refinement_converges_at_first_order_or_better() {
    let length = 400.0;
    for (phi, theta) in [(0.0, 0.4), (0.7, 1.0), (FRAC_PI_4, 60f64.to_radians()), (-2.2, 1.3)] {
        let a = ArcParams::new(phi, theta, length).unwrap();
        let exact = arc_tip_position(&a);
        let errs: Vec<f64> = [5, 10, 20, 40, 80]
            .iter()
            .map(|&n| {
                let spec = one_segment(n, length);
                (tip_position(&spec, &arcs_to_state(&spec, &[a]).unwrap()).unwrap() - exact).norm()
            })
            .collect();
        for w in errs.windows(2) {
            assert!(w[1] < w[0], "{errs:?}");
            assert!((w[0] / w[1]).log2() >= 1.0, "order below 1: {errs:?}");
        }
    }
}

#[test]
fn chain_to_arcs_round_trip_and_straight_state() {
    let spec = default_spec();
    let arcs = [ArcParams::new(0.5, 0.7, 200.0).unwrap(), ArcParams::new(-2.0, 0.4, 200.0).unwrap()];
    let fitted = chain_to_arcs(&spec, &arcs_to_state(&spec, &arcs).unwrap()).unwrap();
    for (f, a) in fitted.iter().zip(&arcs) {
        assert!(f.residual <= 0.02 * 200.0);
        assert!((f.arc.theta() - a.theta()).abs() < 0.02);
        assert!((f.arc.phi() - a.phi()).abs() < 0.02);
    }
    let straight = chain_to_arcs(&spec, &ChainState::zeros(spec.joint_count())).unwrap();
    for f in &straight {
        assert_abs_diff_eq!(f.arc.theta(), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(f.arc.length(), 200.0, epsilon = 1e-9);
    }
}

#[test]
fn fit_residual_grows_with_joint_noise() {
    let spec = default_spec();
    let arcs = [ArcParams::new(0.3, 0.8, 200.0).unwrap(), ArcParams::straight(200.0).unwrap()];
    let base = arcs_to_state(&spec, &arcs).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mean_residual = |scale: f64, rng: &mut ChaCha8Rng| {
        let mut total = 0.0;
        for _ in 0..100 {
            let mut s = base.clone();
            for a in &mut s.joint_angles[..10] {
                *a += scale * rng.random_range(-0.01..=0.01);
            }
            total += chain_to_arcs(&spec, &s).unwrap()[0].residual;
        }
        total / 100.0
    };
    let residuals: Vec<f64> = [0.25, 0.5, 1.0, 2.0].iter().map(|&k| mean_residual(k, &mut rng)).collect();
    assert!(residuals.windows(2).all(|w| w[1] > w[0]), "{residuals:?}");
}

#[test]
fn swapping_joint_families_is_a_quarter_turn_of_the_base() {
    let spec = default_spec();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = spec.joint_count();
    let state = ChainState {
        joint_angles: (0..n).map(|_| rng.random_range(-0.3..0.3)).collect(),
        hinge_compressions: (0..n).map(|_| rng.random_range(0.0..0.3)).collect(),
    };
    // Conjugating by Rz(90°) maps an x-family bend onto the y-family, and a y-family bend
    // onto the x-family with the opposite sign.
    let mut swapped = state.clone();
    for (j, a) in swapped.joint_angles.iter_mut().enumerate() {
        if spec.joint_family(j) == JointFamily::Y {
            *a = -*a;
        }
    }
    let quarter = Pose::from_rotation(rot_z(FRAC_PI_2));
    let original = chain_forward_kinematics(&spec, &state).unwrap();
    let other = forward_kinematics_with_families(&spec, &swapped, JointFamily::Y).unwrap();
    for (a, b) in original.iter().zip(&other) {
        let conjugated = quarter.then(a).then(&quarter.inverse());
        assert!(conjugated.max_abs_diff(b) <= 1e-9);
    }
}

proptest! {
    #[test]
    fn straight_runs_never_twist(compressions in prop::collection::vec(0.0..0.3f64, 20)) {
        let spec = default_spec();
        let state = ChainState { joint_angles: vec![0.0; 20], hinge_compressions: compressions };
        for f in chain_forward_kinematics(&spec, &state).unwrap() {
            prop_assert!((f.rotation - Matrix3::identity()).amax() <= 1e-15);
        }
    }

    #[test]
    fn frames_are_proper(angles in prop::collection::vec(-0.4..0.4f64, 20)) {
        let spec = default_spec();
        let state = ChainState { joint_angles: angles, hinge_compressions: vec![0.1; 20] };
        for f in chain_forward_kinematics(&spec, &state).unwrap() {
            prop_assert!(f.is_proper(1e-9));
        }
    }

    #[test]
    fn chain_tracks_the_arc(phi in -PI..PI, theta in 0.0..60f64.to_radians()) {
        let spec = one_segment(20, 400.0);
        let a = ArcParams::new(phi, theta, 400.0).unwrap();
        let err = (tip_position(&spec, &arcs_to_state(&spec, &[a]).unwrap()).unwrap() - arc_tip_position(&a)).norm();
        prop_assert!(err <= 0.02 * 400.0);
    }
}
