//! Shared fixtures for the benchmarks.

use beadjam_core::{arcs_to_state, chain_forward_kinematics, ArcParams, ChainState, ManipulatorSpec};
use nalgebra::Vector3;

/// A two-segment S-bend used as the working pose.
pub fn bent_arcs(spec: &ManipulatorSpec) -> Vec<ArcParams> {
    let l: Vec<f64> = spec.segments.iter().map(|s| s.rest_length()).collect();
    vec![
        ArcParams::new(0.3, 40f64.to_radians(), l[0]).unwrap(),
        ArcParams::new(-1.2, 30f64.to_radians(), l[1]).unwrap(),
    ]
}

pub fn bent_state(spec: &ManipulatorSpec) -> ChainState {
    arcs_to_state(spec, &bent_arcs(spec)).unwrap()
}

/// Base point plus the bead tips of the proximal segment.
pub fn proximal_points(spec: &ManipulatorSpec, state: &ChainState) -> Vec<Vector3<f64>> {
    let frames = chain_forward_kinematics(spec, state).unwrap();
    let n = spec.segments[0].bead_count;
    let mut pts = vec![Vector3::zeros()];
    pts.extend(frames[..n].iter().map(|f| f.translation));
    pts
}
