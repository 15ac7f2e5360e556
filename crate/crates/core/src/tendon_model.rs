//! Tendon routing geometry, tendon lengths and the joint loads produced by tension.
//!
//! A tendon is anchored at the base and guided through one channel per bead up to the
//! last bead of its terminal segment. `External` tendons run at their radial offset the
//! whole way; `Internal` tendons stay on the backbone through the segments they pass and
//! move out to the periphery over a single bead at the start of their terminal segment.

use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::bead_chain::{chain_forward_kinematics, ChainState, ManipulatorSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Routing {
    External,
    Internal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TendonSpec {
    pub terminal_segment: usize,
    /// Angle ψ about the backbone where the tendon sits on the periphery, radians.
    pub anchor_angle: f64,
    /// Offset from the backbone on the periphery, mm.
    pub external_radius: f64,
    pub routing: Routing,
}

impl TendonSpec {
    fn radial(&self) -> Vector3<f64> {
        let (s, c) = self.anchor_angle.sin_cos();
        Vector3::new(self.external_radius * c, self.external_radius * s, 0.0)
    }

    fn peripheral_in(&self, segment: usize) -> bool {
        match self.routing {
            Routing::External => true,
            Routing::Internal => segment == self.terminal_segment,
        }
    }
}

/// Tendon tensions, newtons, in the order of [`ManipulatorSpec::tendons`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TendonState {
    pub tensions: Vec<f64>,
}

impl TendonState {
    pub fn new(tensions: Vec<f64>) -> Result<Self> {
        if let Some(t) = tensions.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(Error::invalid("tension", format!("tendons cannot push: {t}")));
        }
        Ok(Self { tensions })
    }

    pub fn slack(spec: &ManipulatorSpec) -> Self {
        Self {
            tensions: vec![0.0; spec.tendon_count()],
        }
    }

    pub fn check_dims(&self, spec: &ManipulatorSpec) -> Result<()> {
        if self.tensions.len() != spec.tendon_count() {
            return Err(Error::DimensionMismatch {
                what: "tensions",
                expected: spec.tendon_count(),
                got: self.tensions.len(),
            });
        }
        Ok(())
    }

    /// Current length of every tendon, mm.
    pub fn lengths(spec: &ManipulatorSpec, state: &ChainState) -> Result<Vec<f64>> {
        spec.tendons().map(|t| tendon_length(spec, t, state)).collect()
    }
}

pub(crate) fn validate_tendons(spec: &ManipulatorSpec) -> Result<()> {
    for s in 0..spec.segments.len() {
        for t in &spec.segments[s].tendons {
            validate_tendon(spec, s, t)?;
        }
        validate_tendon_set(spec, s)?;
    }
    Ok(())
}

/// Checks one tendon listed under segment `s`.
pub(crate) fn validate_tendon(spec: &ManipulatorSpec, s: usize, t: &TendonSpec) -> Result<()> {
    let count = spec.segments.len();
    if t.terminal_segment >= count {
        return Err(Error::SegmentOutOfRange {
            index: t.terminal_segment,
            count,
        });
    }
    if t.terminal_segment != s {
        return Err(Error::invalid(
            "terminal_segment",
            format!("tendon listed under segment {s} terminates in segment {}", t.terminal_segment),
        ));
    }
    if !(t.anchor_angle > -PI && t.anchor_angle <= PI) {
        return Err(Error::invalid(
            "anchor_angle",
            format!("must lie in (−180°, 180°], got {}°", t.anchor_angle.to_degrees()),
        ));
    }
    let bound = spec.segments[..=s]
        .iter()
        .enumerate()
        .filter(|(i, _)| t.peripheral_in(*i))
        .map(|(_, g)| g.bead.width / 2.0)
        .fold(f64::INFINITY, f64::min);
    if !(t.external_radius > 0.0 && t.external_radius <= bound) {
        return Err(Error::invalid(
            "external_radius",
            format!("0 < external_radius ≤ bead width / 2 = {bound} required, got {}", t.external_radius),
        ));
    }
    Ok(())
}

/// An actuated segment needs at least three distinct anchor angles.
pub(crate) fn validate_tendon_set(spec: &ManipulatorSpec, s: usize) -> Result<()> {
    let seg = &spec.segments[s];
    if seg.tendons.is_empty() {
        return Ok(());
    }
    let mut angles: Vec<f64> = seg.tendons.iter().map(|t| t.anchor_angle).collect();
    angles.sort_by(f64::total_cmp);
    angles.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    if angles.len() < 3 {
        return Err(Error::invalid(
            "tendons",
            format!("segment {s} needs ≥ 3 tendons at distinct anchor angles"),
        ));
    }
    Ok(())
}

/// A routing waypoint: fixed to the ground (`None`) or to a bead frame.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Waypoint {
    pub bead: Option<usize>,
    pub local: Vector3<f64>,
}

/// Base anchor followed by one channel per bead up to the terminal segment's last bead.
pub(crate) fn waypoints(spec: &ManipulatorSpec, tendon: &TendonSpec) -> Result<Vec<Waypoint>> {
    let count = spec.segments.len();
    if tendon.terminal_segment >= count {
        return Err(Error::SegmentOutOfRange {
            index: tendon.terminal_segment,
            count,
        });
    }
    let radial = tendon.radial();
    let at = |segment: usize| {
        if tendon.peripheral_in(segment) {
            radial
        } else {
            Vector3::zeros()
        }
    };
    let mut out = vec![Waypoint {
        bead: None,
        local: at(0),
    }];
    for s in 0..=tendon.terminal_segment {
        out.extend(spec.segment_joints(s).map(|j| Waypoint {
            bead: Some(j),
            local: at(s),
        }));
    }
    Ok(out)
}

/// Routing waypoints in the base frame: the base anchor, then one per bead.
pub fn tendon_path(
    spec: &ManipulatorSpec,
    tendon: &TendonSpec,
    state: &ChainState,
) -> Result<Vec<Vector3<f64>>> {
    let frames = chain_forward_kinematics(spec, state)?;
    Ok(waypoints(spec, tendon)?
        .iter()
        .map(|w| match w.bead {
            None => w.local,
            Some(j) => frames[j].transform_point(&w.local),
        })
        .collect())
}

/// Polyline length through the routing waypoints, mm.
pub fn tendon_length(spec: &ManipulatorSpec, tendon: &TendonSpec, state: &ChainState) -> Result<f64> {
    let path = tendon_path(spec, tendon, state)?;
    Ok(path.windows(2).map(|w| (w[1] - w[0]).norm()).sum())
}

/// Joint loads produced by one tendon.
#[derive(Debug, Clone, PartialEq)]
pub struct TendonForces {
    /// Generalized torque on every joint, N·mm (positive drives the joint angle up).
    pub joint_torques: Vec<f64>,
    /// Compressive force the tendon adds along the backbone at every hinge, N.
    pub axial_forces: Vec<f64>,
}

/// `−T·∂l/∂q` by central differences on [`tendon_length`].
///
/// Angles are stepped by `spec.solver.fd_step` radians and compressions by the same number
/// of millimetres.
pub fn tendon_generalized_forces(
    spec: &ManipulatorSpec,
    tendon: &TendonSpec,
    state: &ChainState,
    tension: f64,
) -> Result<TendonForces> {
    tendon_generalized_forces_with_step(spec, tendon, state, tension, spec.solver.fd_step)
}

pub fn tendon_generalized_forces_with_step(
    spec: &ManipulatorSpec,
    tendon: &TendonSpec,
    state: &ChainState,
    tension: f64,
    step: f64,
) -> Result<TendonForces> {
    if !(tension.is_finite() && tension >= 0.0) {
        return Err(Error::invalid("tension", format!("must be ≥ 0, got {tension}")));
    }
    state.check_dims(spec)?;
    let n = spec.joint_count();
    let mut probe = state.clone();
    let mut joint_torques = vec![0.0; n];
    let mut axial_forces = vec![0.0; n];
    for j in 0..n {
        let a = state.joint_angles[j];
        probe.joint_angles[j] = a + step;
        let hi = tendon_length(spec, tendon, &probe)?;
        probe.joint_angles[j] = a - step;
        let lo = tendon_length(spec, tendon, &probe)?;
        probe.joint_angles[j] = a;
        joint_torques[j] = -tension * (hi - lo) / (2.0 * step);

        let c = state.hinge_compressions[j];
        probe.hinge_compressions[j] = c + step;
        let hi = tendon_length(spec, tendon, &probe)?;
        probe.hinge_compressions[j] = c - step;
        let lo = tendon_length(spec, tendon, &probe)?;
        probe.hinge_compressions[j] = c;
        // Compressing a hinge shortens the tendon; that shortening is what the tension pushes.
        axial_forces[j] = -tension * (hi - lo) / (2.0 * step);
    }
    Ok(TendonForces {
        joint_torques,
        axial_forces,
    })
}
