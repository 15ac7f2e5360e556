//! Discretized bead chain: rigid beads coupled by sprung single-axis hinges whose bending
//! axes alternate by 90° from one bead interface to the next.

use std::f64::consts::FRAC_PI_2;
use std::ops::Range;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::arc_model::{fit_arc, ArcFit, ArcParams};
use crate::error::{Error, Result};
use crate::pose::{rot_x, rot_y, Pose};
use crate::tendon_model::{Routing, TendonSpec};

/// Each bead interface is coupled by two hinges, one on either side.
pub const HINGES_PER_JOINT: f64 = 2.0;

/// Standard gravity in mm/s².
pub const GRAVITY_MM_S2: f64 = 9810.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeadSpec {
    /// Hinge socket to circular head, mm.
    pub length: f64,
    pub width: f64,
    /// grams
    pub mass: f64,
    /// Axial spacing between successive joint centres with the hinge uncompressed, mm.
    pub pitch: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HingeSpec {
    /// N·mm per radian.
    pub bending_stiffness: f64,
    /// N per mm.
    pub axial_stiffness: f64,
    /// Sprung-centre travel before the beads touch, mm.
    pub free_gap: f64,
    pub height: f64,
    /// grams, per hinge
    pub mass: f64,
    /// Mechanical bending limit of one joint, radians.
    pub angle_limit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentSpec {
    pub bead_count: usize,
    pub bead: BeadSpec,
    pub hinge: HingeSpec,
    pub tendons: Vec<TendonSpec>,
}

/// Direction of gravity relative to the manipulator base.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GravityOrientation {
    /// Backbone hangs along gravity (+z of the base frame).
    Vertical,
    /// Gravity perpendicular to the backbone (−x of the base frame).
    Horizontal,
    /// No gravity.
    Zero,
}

impl GravityOrientation {
    /// Unit direction in the base frame (zero vector for `Zero`).
    pub fn base_direction(self) -> Vector3<f64> {
        match self {
            GravityOrientation::Vertical => Vector3::z(),
            GravityOrientation::Horizontal => -Vector3::x(),
            GravityOrientation::Zero => Vector3::zeros(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GravityOrientation::Vertical => "vertical",
            GravityOrientation::Horizontal => "horizontal",
            GravityOrientation::Zero => "zero",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Projected-gradient tolerance, N·mm.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Finite-difference step for tendon generalized forces, rad.
    pub fd_step: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_iterations: 5000,
            fd_step: 1e-5,
        }
    }
}

/// Full parametric description of the manipulator.
#[derive(Debug, Clone, PartialEq)]
pub struct ManipulatorSpec {
    /// Proximal first.
    pub segments: Vec<SegmentSpec>,
    pub base_pose: Pose,
    pub gravity: GravityOrientation,
    /// Bead-on-bead Coulomb coefficient.
    pub friction_coefficient: f64,
    /// Effective friction moment arm at a jammed interface, mm.
    pub contact_radius: f64,
    /// Capacity multiplier when both rail faces are in contact (off-axis bending).
    pub out_of_plane_contact_factor: f64,
    pub solver: SolverSettings,
}

/// Which of the two alternating hinge orientations a joint belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum JointFamily {
    /// Bends toward +x (rotation about local +y).
    X,
    /// Bends toward +y (rotation about local −x).
    Y,
}

impl JointFamily {
    pub fn other(self) -> Self {
        match self {
            JointFamily::X => JointFamily::Y,
            JointFamily::Y => JointFamily::X,
        }
    }

    /// Family of the `index`-th joint of a run that starts with `first`.
    pub fn alternating(first: JointFamily, index: usize) -> Self {
        if index.is_multiple_of(2) {
            first
        } else {
            first.other()
        }
    }

    /// Local rotation axis; positive angles bend the next bead toward +x or +y.
    pub fn axis(self) -> Vector3<f64> {
        match self {
            JointFamily::X => Vector3::y(),
            JointFamily::Y => -Vector3::x(),
        }
    }

    pub fn rotation(self, angle: f64) -> Matrix3<f64> {
        match self {
            JointFamily::X => rot_y(angle),
            JointFamily::Y => rot_x(-angle),
        }
    }
}

/// Joint angles and hinge compressions of the whole chain; joint `i` sits at the base of bead `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub joint_angles: Vec<f64>,
    pub hinge_compressions: Vec<f64>,
}

impl ChainState {
    pub fn zeros(joint_count: usize) -> Self {
        Self {
            joint_angles: vec![0.0; joint_count],
            hinge_compressions: vec![0.0; joint_count],
        }
    }

    pub fn joint_count(&self) -> usize {
        self.joint_angles.len()
    }

    /// Checks lengths only.
    pub fn check_dims(&self, spec: &ManipulatorSpec) -> Result<()> {
        let n = spec.joint_count();
        if self.joint_angles.len() != n {
            return Err(Error::DimensionMismatch {
                what: "joint_angles",
                expected: n,
                got: self.joint_angles.len(),
            });
        }
        if self.hinge_compressions.len() != n {
            return Err(Error::DimensionMismatch {
                what: "hinge_compressions",
                expected: n,
                got: self.hinge_compressions.len(),
            });
        }
        Ok(())
    }

    /// Checks lengths, angle limits and compression bounds.
    pub fn validate(&self, spec: &ManipulatorSpec) -> Result<()> {
        self.check_dims(spec)?;
        for j in 0..spec.joint_count() {
            let hinge = spec.hinge(j);
            if self.joint_angles[j].abs() > hinge.angle_limit + 1e-12 {
                return Err(Error::invalid(
                    "joint_angles",
                    format!("joint {j} exceeds the ±{} rad limit", hinge.angle_limit),
                ));
            }
            let c = self.hinge_compressions[j];
            if !(-1e-12..=hinge.free_gap + 1e-12).contains(&c) {
                return Err(Error::invalid(
                    "hinge_compressions",
                    format!("joint {j} compression {c} outside [0, {}]", hinge.free_gap),
                ));
            }
        }
        Ok(())
    }
}

impl BeadSpec {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("bead.length", self.length),
            ("bead.width", self.width),
            ("bead.mass", self.mass),
            ("bead.pitch", self.pitch),
        ] {
            positive(field, v)?;
        }
        if self.pitch > self.length {
            return Err(Error::invalid(
                "bead.pitch",
                format!("pitch ≤ length required ({} > {})", self.pitch, self.length),
            ));
        }
        Ok(())
    }
}

impl HingeSpec {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("hinge.bending_stiffness", self.bending_stiffness),
            ("hinge.axial_stiffness", self.axial_stiffness),
            ("hinge.free_gap", self.free_gap),
            ("hinge.height", self.height),
            ("hinge.mass", self.mass),
            ("hinge.angle_limit", self.angle_limit),
        ] {
            positive(field, v)?;
        }
        if self.free_gap >= self.height {
            return Err(Error::invalid(
                "hinge.free_gap",
                format!("free_gap < height required ({} ≥ {})", self.free_gap, self.height),
            ));
        }
        if self.angle_limit >= FRAC_PI_2 {
            return Err(Error::invalid("hinge.angle_limit", "must be below 90°"));
        }
        Ok(())
    }
}

impl SegmentSpec {
    pub fn rest_length(&self) -> f64 {
        self.bead_count as f64 * self.bead.pitch
    }

    /// Unit mass (bead plus its hinges), grams.
    pub fn unit_mass(&self) -> f64 {
        self.bead.mass + HINGES_PER_JOINT * self.hinge.mass
    }

    pub fn validate(&self) -> Result<()> {
        if self.bead_count < 2 {
            return Err(Error::invalid(
                "bead_count",
                format!("bead_count ≥ 2 required, got {}", self.bead_count),
            ));
        }
        self.bead.validate()?;
        self.hinge.validate()
    }
}

fn positive(field: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be > 0, got {v}")))
    }
}

impl ManipulatorSpec {
    /// The two-segment, 2×10-bead prototype with calibrated hinge and friction constants.
    pub fn prototype() -> Self {
        let bead = BeadSpec {
            length: 26.0,
            width: 38.0,
            mass: 7.0,
            pitch: 20.0,
        };
        let hinge = HingeSpec {
            bending_stiffness: 2000.0,
            axial_stiffness: 175.0,
            free_gap: 0.3,
            height: 19.0,
            mass: 1.0,
            angle_limit: 25f64.to_radians(),
        };
        let segments = (0..2)
            .map(|s| SegmentSpec {
                bead_count: 10,
                bead,
                hinge,
                tendons: [0.0, 90.0, 180.0, 270.0]
                    .iter()
                    .map(|deg: &f64| TendonSpec {
                        terminal_segment: s,
                        anchor_angle: crate::arc_model::wrap_angle(deg.to_radians()),
                        external_radius: 15.0,
                        routing: Routing::Internal,
                    })
                    .collect(),
            })
            .collect();
        Self {
            segments,
            base_pose: Pose::identity(),
            gravity: GravityOrientation::Vertical,
            friction_coefficient: 0.35,
            contact_radius: 9.5,
            out_of_plane_contact_factor: 4.0,
            solver: SolverSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::invalid("segments", "at least one segment required"));
        }
        for seg in &self.segments {
            seg.validate()?;
        }
        if !self.base_pose.is_proper(crate::pose::ORTHONORMAL_TOL) {
            return Err(Error::invalid("base_pose", "rotation is not proper"));
        }
        if !(self.friction_coefficient > 0.0 && self.friction_coefficient < 2.0) {
            return Err(Error::invalid(
                "friction_coefficient",
                format!("must lie in (0, 2), got {}", self.friction_coefficient),
            ));
        }
        positive("contact_radius", self.contact_radius)?;
        if !(self.out_of_plane_contact_factor >= 1.0 && self.out_of_plane_contact_factor.is_finite()) {
            return Err(Error::invalid(
                "out_of_plane_contact_factor",
                format!("must be ≥ 1, got {}", self.out_of_plane_contact_factor),
            ));
        }
        positive("solver.tolerance", self.solver.tolerance)?;
        positive("solver.fd_step", self.solver.fd_step)?;
        if self.solver.max_iterations == 0 {
            return Err(Error::invalid("solver.max_iterations", "must be ≥ 1"));
        }
        crate::tendon_model::validate_tendons(self)
    }

    pub fn joint_count(&self) -> usize {
        self.segments.iter().map(|s| s.bead_count).sum()
    }

    pub fn segment_joints(&self, segment: usize) -> Range<usize> {
        let start: usize = self.segments[..segment].iter().map(|s| s.bead_count).sum();
        start..start + self.segments[segment].bead_count
    }

    pub fn segment_of_joint(&self, joint: usize) -> usize {
        let mut end = 0;
        for (s, seg) in self.segments.iter().enumerate() {
            end += seg.bead_count;
            if joint < end {
                return s;
            }
        }
        panic!("joint {joint} out of range");
    }

    pub fn joint_family(&self, joint: usize) -> JointFamily {
        JointFamily::alternating(JointFamily::X, joint)
    }

    pub fn hinge(&self, joint: usize) -> &HingeSpec {
        &self.segments[self.segment_of_joint(joint)].hinge
    }

    pub fn pitch(&self, joint: usize) -> f64 {
        self.segments[self.segment_of_joint(joint)].bead.pitch
    }

    pub fn rest_length(&self) -> f64 {
        self.segments.iter().map(SegmentSpec::rest_length).sum()
    }

    /// Shortening of the chain with every hinge gap closed, mm.
    pub fn jammed_shortening(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| s.bead_count as f64 * s.hinge.free_gap)
            .sum()
    }

    /// All tendons, in segment order.
    pub fn tendons(&self) -> impl Iterator<Item = &TendonSpec> {
        self.segments.iter().flat_map(|s| s.tendons.iter())
    }

    pub fn tendon_count(&self) -> usize {
        self.segments.iter().map(|s| s.tendons.len()).sum()
    }

    /// Global tendon indices belonging to `segment`.
    pub fn segment_tendons(&self, segment: usize) -> Range<usize> {
        let start: usize = self.segments[..segment].iter().map(|s| s.tendons.len()).sum();
        start..start + self.segments[segment].tendons.len()
    }

    /// Gravity in the world frame, mm/s².
    pub fn gravity_vector(&self, orientation: GravityOrientation) -> Vector3<f64> {
        self.base_pose.rotation * orientation.base_direction() * GRAVITY_MM_S2
    }

    /// A copy with every tendon terminating in `segment` switched to `routing`.
    pub fn with_routing(&self, segment: usize, routing: Routing) -> Self {
        let mut spec = self.clone();
        for seg in &mut spec.segments {
            for t in seg.tendons.iter_mut().filter(|t| t.terminal_segment == segment) {
                t.routing = routing;
            }
        }
        spec
    }
}

/// Bead-tip frames of the chain in the base frame, one per bead.
///
/// Joint `i` rotates about its family's local axis and is followed by a translation of
/// `pitch − compression` along the new local z.
pub fn chain_forward_kinematics(spec: &ManipulatorSpec, state: &ChainState) -> Result<Vec<Pose>> {
    state.check_dims(spec)?;
    Ok(frames_with_families(spec, state, JointFamily::X))
}

/// Forward kinematics of the same chain with the alternation starting from `first` at the base.
pub fn forward_kinematics_with_families(
    spec: &ManipulatorSpec,
    state: &ChainState,
    first: JointFamily,
) -> Result<Vec<Pose>> {
    state.check_dims(spec)?;
    Ok(frames_with_families(spec, state, first))
}

pub(crate) fn frames_with_families(
    spec: &ManipulatorSpec,
    state: &ChainState,
    first: JointFamily,
) -> Vec<Pose> {
    let mut frames = Vec::with_capacity(state.joint_count());
    let mut current = Pose::identity();
    let mut j = 0;
    for seg in &spec.segments {
        for _ in 0..seg.bead_count {
            let family = JointFamily::alternating(first, j);
            let rotation = current.rotation * family.rotation(state.joint_angles[j]);
            let advance = seg.bead.pitch - state.hinge_compressions[j];
            current = Pose {
                rotation,
                translation: current.translation + rotation.column(2) * advance,
            };
            frames.push(current);
            j += 1;
        }
    }
    frames
}

/// Per-joint shares of a family's curvature under the midpoint-chord rule.
///
/// Joints of one family sit at integer positions (in pitches) along the segment. The link
/// after each of them is turned to the direction of the arc chord over that link, so joint
/// `k` takes the difference of successive chord directions. Interior joints receive a
/// uniform share; the ends absorb the half-pitch offsets.
fn chord_shares(bead_count: usize, family_offset: usize) -> Vec<(usize, f64)> {
    let positions: Vec<usize> = (family_offset..bead_count).step_by(2).collect();
    let n = bead_count as f64;
    let mut prev = 0.0;
    positions
        .iter()
        .enumerate()
        .map(|(k, &z)| {
            let next = positions.get(k + 1).map_or(n, |&p| p as f64);
            let direction = (z as f64 + next) / (2.0 * n);
            let share = direction - prev;
            prev = direction;
            (z, share)
        })
        .collect()
}

/// Joint angles that bend one segment (whose first joint has family `first`) onto `arc`.
fn arc_angles(bead_count: usize, first: JointFamily, arc: &ArcParams) -> Vec<f64> {
    let (u, v) = arc.curvature_vector();
    let mut angles = vec![0.0; bead_count];
    for offset in 0..2 {
        let family = JointFamily::alternating(first, offset);
        let total = match family {
            JointFamily::X => u,
            JointFamily::Y => v,
        };
        for (z, share) in chord_shares(bead_count, offset) {
            angles[z] = total * share;
        }
    }
    angles
}

fn check_arc_length(rest_length: f64, arc: &ArcParams) -> Result<()> {
    if (arc.length() - rest_length).abs() > 0.02 * rest_length {
        return Err(Error::ArcLengthMismatch {
            arc_length: arc.length(),
            rest_length,
        });
    }
    Ok(())
}

/// Distributes an arc's curvature over a segment's joints (first joint bends toward x).
pub fn arc_to_chain(segment: &SegmentSpec, arc: &ArcParams) -> Result<Vec<f64>> {
    check_arc_length(segment.rest_length(), arc)?;
    Ok(arc_angles(segment.bead_count, JointFamily::X, arc))
}

/// Chain state (zero compression) realizing one arc per segment.
pub fn arcs_to_state(spec: &ManipulatorSpec, arcs: &[ArcParams]) -> Result<ChainState> {
    if arcs.len() != spec.segments.len() {
        return Err(Error::DimensionMismatch {
            what: "arcs",
            expected: spec.segments.len(),
            got: arcs.len(),
        });
    }
    let mut state = ChainState::zeros(spec.joint_count());
    for (s, (seg, arc)) in spec.segments.iter().zip(arcs).enumerate() {
        check_arc_length(seg.rest_length(), arc)?;
        let range = spec.segment_joints(s);
        let first = spec.joint_family(range.start);
        state.joint_angles[range].copy_from_slice(&arc_angles(seg.bead_count, first, arc));
    }
    Ok(state)
}

/// Base frame of each segment (the tip frame of the previous segment's last bead).
pub fn segment_base_frames(spec: &ManipulatorSpec, frames: &[Pose]) -> Vec<Pose> {
    (0..spec.segments.len())
        .map(|s| {
            let start = spec.segment_joints(s).start;
            if start == 0 {
                Pose::identity()
            } else {
                frames[start - 1]
            }
        })
        .collect()
}

/// Bead-tip points of `segment` in its own base frame, preceded by the base origin.
pub fn segment_points(spec: &ManipulatorSpec, frames: &[Pose], segment: usize) -> Vec<Vector3<f64>> {
    let base_inv = segment_base_frames(spec, frames)[segment].inverse();
    std::iter::once(Vector3::zeros())
        .chain(
            spec.segment_joints(segment)
                .map(|j| base_inv.transform_point(&frames[j].translation)),
        )
        .collect()
}

/// Fits one arc per segment to its bead tips.
pub fn chain_to_arcs(spec: &ManipulatorSpec, state: &ChainState) -> Result<Vec<ArcFit>> {
    let frames = chain_forward_kinematics(spec, state)?;
    (0..spec.segments.len())
        .map(|s| fit_arc(&segment_points(spec, &frames, s)))
        .collect()
}

/// Position of the last bead's tip in the base frame.
pub fn tip_position(spec: &ManipulatorSpec, state: &ChainState) -> Result<Vector3<f64>> {
    Ok(chain_forward_kinematics(spec, state)?
        .last()
        .expect("spec has at least one bead")
        .translation)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> ManipulatorSpec {
        ManipulatorSpec::prototype()
    }

    #[test]
    fn prototype_is_valid() {
        let s = spec();
        s.validate().unwrap();
        assert_eq!(s.joint_count(), 20);
        assert_eq!(s.rest_length(), 400.0);
        assert_eq!(s.segment_joints(1), 10..20);
        assert_eq!(s.segment_tendons(1), 4..8);
    }

    #[test]
    fn zero_state_is_a_straight_column() {
        let s = spec();
        let frames = chain_forward_kinematics(&s, &ChainState::zeros(20)).unwrap();
        for (k, f) in frames.iter().enumerate() {
            assert_eq!(f.translation, Vector3::new(0.0, 0.0, 20.0 * (k + 1) as f64));
            assert_eq!(f.rotation, Matrix3::identity());
        }
    }

    #[test]
    fn full_compression_shortens_uniformly() {
        let s = spec();
        let mut state = ChainState::zeros(20);
        state.hinge_compressions.fill(0.3);
        let frames = chain_forward_kinematics(&s, &state).unwrap();
        for (k, f) in frames.iter().enumerate() {
            let expected = (k + 1) as f64 * (20.0 - 0.3);
            assert!((f.translation.z - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let err = chain_forward_kinematics(&spec(), &ChainState::zeros(19)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn in_plane_arc_uses_only_x_joints() {
        let seg = &spec().segments[0];
        let arc = ArcParams::new(0.0, 0.6, 200.0).unwrap();
        let angles = arc_to_chain(seg, &arc).unwrap();
        let expected = [0.06, 0.0, 0.12, 0.0, 0.12, 0.0, 0.12, 0.0, 0.12, 0.0];
        for (a, e) in angles.iter().zip(expected) {
            assert!((a - e).abs() < 1e-15, "{angles:?}");
        }
    }

    #[test]
    fn quarter_turn_of_phi_moves_curvature_to_y_joints() {
        let seg = &spec().segments[0];
        let arc = ArcParams::new(FRAC_PI_2, 0.6, 200.0).unwrap();
        let angles = arc_to_chain(seg, &arc).unwrap();
        for (j, a) in angles.iter().enumerate() {
            if j % 2 == 0 {
                assert!(a.abs() < 1e-15);
            } else {
                assert!(*a > 0.0);
            }
        }
        let total: f64 = angles.iter().sum();
        assert!((total - 0.6 * 0.95).abs() < 1e-12);
    }

    #[test]
    fn arc_length_mismatch_rejected() {
        let seg = &spec().segments[0];
        let arc = ArcParams::new(0.0, 0.3, 205.0).unwrap();
        assert!(matches!(arc_to_chain(seg, &arc), Err(Error::ArcLengthMismatch { .. })));
    }

    #[test]
    fn validation_names_the_bead_count_bound() {
        let mut s = spec();
        s.segments[0].bead_count = 1;
        let msg = s.validate().unwrap_err().to_string();
        assert!(msg.contains("bead_count ≥ 2"), "{msg}");
    }

    #[test]
    fn jammed_shortening_is_below_two_percent() {
        let s = spec();
        assert!(s.jammed_shortening() < 0.02 * s.rest_length());
    }
}
