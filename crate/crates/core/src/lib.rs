//! Simulation of a two-segment, tendon-driven bead-jamming continuum manipulator.
//!
//! Units are millimetres, radians, grams and newtons throughout.

pub mod arc_model;
pub mod bead_chain;
pub mod experiments;
pub mod error;
pub mod pose;
pub mod spec_file;
pub mod statics;
pub mod tendon_model;

pub use arc_model::{
    arc_point, arc_tip_position, arc_transform, compose, fit_arc, wrap_angle, ArcFit, ArcParams,
};
pub use bead_chain::{
    arc_to_chain, arcs_to_state, chain_forward_kinematics, chain_to_arcs, tip_position, BeadSpec,
    ChainState, GravityOrientation, HingeSpec, JointFamily, ManipulatorSpec, SegmentSpec,
    SolverSettings,
};
pub use error::{Error, Result};
pub use pose::Pose;
pub use spec_file::{default_spec, parse_spec, to_canonical, SpecError};
pub use statics::{
    load_sweep, potential_energy, solve_equilibrium, EquilibriumResult, LoadCase, SegmentMode,
    StiffnessCommand,
};
pub use tendon_model::{
    tendon_generalized_forces, tendon_length, tendon_path, Routing, TendonForces, TendonSpec,
    TendonState,
};
