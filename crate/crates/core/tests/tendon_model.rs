use std::f64::consts::{FRAC_PI_2, PI};

use beadjam_core::tendon_model::tendon_generalized_forces_with_step;
use beadjam_core::{
    arc_point, arcs_to_state, chain_to_arcs, default_spec, tendon_generalized_forces, tendon_length, tendon_path, ArcParams,
    ChainState, JointFamily, ManipulatorSpec, Routing, TendonSpec,
};
use proptest::prelude::*;

fn distal(anchor_angle: f64, routing: Routing) -> TendonSpec {
    TendonSpec {
        terminal_segment: 1,
        anchor_angle,
        external_radius: 15.0,
        routing,
    }
}

fn bent_proximal(spec: &ManipulatorSpec, phi: f64, theta_deg: f64) -> ChainState {
    let arcs = [ArcParams::new(phi, theta_deg.to_radians(), 200.0).unwrap(), ArcParams::straight(200.0).unwrap()];
    arcs_to_state(spec, &arcs).unwrap()
}

#[test]
fn internal_path_leaves_the_axis_in_the_terminal_segment() {
    let spec = default_spec();
    let path = tendon_path(&spec, &distal(0.3, Routing::Internal), &ChainState::zeros(20)).unwrap();
    assert_eq!(path.len(), 21);
    for p in &path[..=10] {
        assert!(p.xy().norm() < 1e-12);
    }
    for p in &path[11..] {
        assert!((p.xy().norm() - 15.0).abs() < 1e-12);
    }
}

#[test]
fn external_straight_path_is_a_parallel_offset() {
    let spec = default_spec();
    let t = distal(-2.0, Routing::External);
    let path = tendon_path(&spec, &t, &ChainState::zeros(20)).unwrap();
    assert!(path.iter().all(|p| (p.xy().norm() - 15.0).abs() < 1e-12));
    assert!((tendon_length(&spec, &t, &ChainState::zeros(20)).unwrap() - 400.0).abs() < 1e-12);
}

#[test]
fn internal_waypoints_follow_the_bent_proximal_arc() {
    let spec = default_spec();
    let mut worst = Vec::new();
    for phi_deg in [0.0, 23.0, 45.0, 90.0, -135.0] {
        let state = bent_proximal(&spec, f64::to_radians(phi_deg), 30.0);
        let path = tendon_path(&spec, &distal(0.0, Routing::Internal), &state).unwrap();
        let fitted = chain_to_arcs(&spec, &state).unwrap()[0].arc;
        let (u, v) = fitted.curvature_vector();
        let l = fitted.length();
        let samples: Vec<_> = (0..=4000).map(|i| arc_point(u, v, l, l * i as f64 / 4000.0)).collect();
        let off = path[..=10]
            .iter()
            .map(|p| samples.iter().map(|s| (s - p).norm()).fold(f64::INFINITY, f64::min))
            .fold(0.0f64, f64::max);
        worst.push(off);
    }
    // Bead tips sit at the midpoints of two-bead chords, one sagitta inside the arc.
    let kappa = 30f64.to_radians() / 200.0;
    let sagitta = (2.0 * 20.0f64).powi(2) * kappa / 8.0;
    assert!(worst.iter().all(|&d| d <= 1.01 * sagitta), "{worst:?} vs sagitta {sagitta}");
}

#[test]
fn antagonistic_lengths_cancel_to_first_order() {
    let spec = default_spec();
    for theta in [10.0, 30.0, 50.0] {
        let state = bent_proximal(&spec, 0.0, theta);
        let pair: f64 = [0.0, PI]
            .iter()
            .map(|&psi| tendon_length(&spec, &distal(psi, Routing::External), &state).unwrap())
            .sum();
        assert!((pair - 800.0).abs() / 800.0 < 0.005, "θ = {theta}°: {pair}");
    }
}

#[test]
fn internal_routing_decouples_length_from_proximal_bending() {
    let spec = default_spec();
    let straight = ChainState::zeros(20);
    for phi in [0.0, 0.5, FRAC_PI_2, -2.0] {
        let state = bent_proximal(&spec, phi, 40.0);
        for psi in [0.0, FRAC_PI_2, PI] {
            let change = |r| {
                let t = distal(psi, r);
                (tendon_length(&spec, &t, &state).unwrap() - tendon_length(&spec, &t, &straight).unwrap()).abs()
            };
            let (int, ext) = (change(Routing::Internal), change(Routing::External));
            // A tendon in the neutral plane barely changes length either way.
            if ext > 1.0 {
                assert!(int < 0.2 * ext, "φ₁ = {phi}, ψ = {psi}: {int} vs {ext}");
            }
        }
    }
}

#[test]
fn straight_internal_tendon_exerts_no_proximal_torque() {
    let spec = default_spec();
    for tension in [1.0, 30.0, 500.0] {
        let f = tendon_generalized_forces(&spec, &distal(0.7, Routing::Internal), &ChainState::zeros(20), tension).unwrap();
        assert!(f.joint_torques[..10].iter().all(|t| t.abs() <= 1e-6), "{:?}", f.joint_torques);
    }
}

#[test]
fn external_moment_arm_is_the_radius() {
    let spec = default_spec();
    let zero = ChainState::zeros(20);
    for (psi, loaded) in [(0.0, JointFamily::X), (FRAC_PI_2, JointFamily::Y)] {
        let f = tendon_generalized_forces(&spec, &distal(psi, Routing::External), &zero, 10.0).unwrap();
        for (j, t) in f.joint_torques.iter().enumerate() {
            if spec.joint_family(j) == loaded {
                assert!((t.abs() - 150.0).abs() < 1e-3, "joint {j}: {t}");
            } else {
                assert!(t.abs() < 1e-6, "joint {j}: {t}");
            }
        }
    }
}

#[test]
fn central_differences_are_second_order() {
    let spec = default_spec();
    let mut state = bent_proximal(&spec, 0.7, 40.0);
    for (j, a) in state.joint_angles.iter_mut().enumerate().skip(10) {
        *a = 0.05 * (j as f64 - 14.0);
    }
    let t = distal(0.4, Routing::External);
    let at = |h| tendon_generalized_forces_with_step(&spec, &t, &state, 20.0, h).unwrap().joint_torques;
    let (f1, f2, f4) = (at(0.04), at(0.02), at(0.01));
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let ratio = diff(&f1, &f2) / diff(&f2, &f4);
    assert!((3.5..=4.5).contains(&ratio), "{ratio}");
}

#[test]
fn opposed_pair_cancels_torque_and_adds_compression() {
    let spec = default_spec();
    let zero = ChainState::zeros(20);
    let single = tendon_generalized_forces(&spec, &distal(0.0, Routing::External), &zero, 10.0).unwrap();
    let other = tendon_generalized_forces(&spec, &distal(PI, Routing::External), &zero, 10.0).unwrap();
    let scale = single.joint_torques.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    for (a, b) in single.joint_torques.iter().zip(&other.joint_torques) {
        assert!((a + b).abs() <= 0.01 * scale);
    }
    for (a, b) in single.axial_forces.iter().zip(&other.axial_forces) {
        assert!((a + b - 2.0 * a).abs() < 1e-6 && *a > 0.0);
    }
}

#[test]
fn internal_routing_loads_proximal_joints_less() {
    let spec = default_spec();
    for theta in [20.0, 40.0, 60.0] {
        for phi_deg in [0.0, 45.0, -45.0, 90.0, 150.0] {
            let state = bent_proximal(&spec, f64::to_radians(phi_deg), theta);
            for psi in [0.0, FRAC_PI_2, PI, -FRAC_PI_2] {
                let peak = |r| {
                    let f = tendon_generalized_forces(&spec, &distal(psi, r), &state, 30.0).unwrap();
                    f.joint_torques[..10].iter().fold(0.0f64, |m, t| m.max(t.abs()))
                };
                let (int, ext) = (peak(Routing::Internal), peak(Routing::External));
                assert!(int < ext, "θ₁ = {theta}, φ₁ = {phi_deg}, ψ = {psi}: {int} vs {ext}");
            }
        }
    }
}

proptest! {
    #[test]
    fn lengths_are_positive(
        angles in prop::collection::vec(-0.43..0.43f64, 20),
        gaps in prop::collection::vec(0.0..0.3f64, 20),
        psi in -3.1..3.1f64,
        external in any::<bool>(),
    ) {
        let spec = default_spec();
        let state = ChainState { joint_angles: angles, hinge_compressions: gaps };
        let routing = if external { Routing::External } else { Routing::Internal };
        for terminal in 0..2 {
            let t = TendonSpec { terminal_segment: terminal, ..distal(psi, routing) };
            prop_assert!(tendon_length(&spec, &t, &state).unwrap() > 0.0);
        }
    }
}
