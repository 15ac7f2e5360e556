//! Quasi-static equilibrium by potential-energy minimization, with friction jamming.

mod energy;
mod jamming;
pub mod optim;
mod posing;
mod sweep;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

pub use energy::EnergyBreakdown;
pub use jamming::{JammingLock, JammingReport, JointAudit, JointStatus, ReleaseEvent};
pub use posing::{open_loop_tensions, reach_pose, PoseSolution, POSE_TOLERANCE};
pub use sweep::{failure_threshold, load_sweep, LoadPoint, LoadSweep, SLOPE_FACTOR, SLOPE_FLOOR};

use crate::bead_chain::{ChainState, GravityOrientation, ManipulatorSpec};
use crate::error::{Error, Result};
use crate::tendon_model::TendonState;
use energy::{pack, unpack, EnergyModel};

/// Gravity and tip payload.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadCase {
    /// Payload at the distal tip, grams.
    pub tip_mass: f64,
    /// Gravitational acceleration in the world frame, mm/s².
    pub gravity: Vector3<f64>,
}

impl LoadCase {
    pub fn new(tip_mass: f64, gravity: Vector3<f64>) -> Result<Self> {
        if !(tip_mass >= 0.0 && tip_mass.is_finite()) {
            return Err(Error::invalid("tip_mass", format!("must be ≥ 0, got {tip_mass}")));
        }
        if !gravity.iter().all(|g| g.is_finite()) {
            return Err(Error::invalid("gravity", "must be finite"));
        }
        Ok(Self { tip_mass, gravity })
    }

    /// Standard gravity along one of the named orientations of the spec's base.
    pub fn oriented(spec: &ManipulatorSpec, orientation: GravityOrientation, tip_mass: f64) -> Result<Self> {
        Self::new(tip_mass, spec.gravity_vector(orientation))
    }

    pub fn weightless() -> Self {
        Self {
            tip_mass: 0.0,
            gravity: Vector3::zeros(),
        }
    }

    pub fn without_payload(&self) -> Self {
        Self {
            tip_mass: 0.0,
            ..*self
        }
    }
}

/// Stiffness mode of one segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SegmentMode {
    Flexible,
    /// Every tendon of the segment carries this extra tension, N.
    Jammed { tension: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StiffnessCommand {
    pub modes: Vec<SegmentMode>,
}

impl StiffnessCommand {
    pub fn flexible(spec: &ManipulatorSpec) -> Self {
        Self {
            modes: vec![SegmentMode::Flexible; spec.segments.len()],
        }
    }

    pub fn jammed(spec: &ManipulatorSpec, tension: f64) -> Self {
        Self {
            modes: vec![SegmentMode::Jammed { tension }; spec.segments.len()],
        }
    }

    pub fn with(mut self, segment: usize, mode: SegmentMode) -> Self {
        self.modes[segment] = mode;
        self
    }

    pub fn validate(&self, spec: &ManipulatorSpec) -> Result<()> {
        if self.modes.len() != spec.segments.len() {
            return Err(Error::DimensionMismatch {
                what: "stiffness modes",
                expected: spec.segments.len(),
                got: self.modes.len(),
            });
        }
        for mode in &self.modes {
            if let SegmentMode::Jammed { tension } = *mode {
                if !(tension > 0.0 && tension.is_finite()) {
                    return Err(Error::invalid("jam tension", format!("must be > 0, got {tension}")));
                }
            }
        }
        Ok(())
    }

    pub fn is_jammed(&self, segment: usize) -> bool {
        matches!(self.modes[segment], SegmentMode::Jammed { .. })
    }

    pub fn any_jammed(&self) -> bool {
        (0..self.modes.len()).any(|s| self.is_jammed(s))
    }

    /// `tensions` plus the jamming tension on every tendon of each jammed segment.
    pub fn apply(&self, spec: &ManipulatorSpec, tensions: &TendonState) -> Result<TendonState> {
        self.validate(spec)?;
        tensions.check_dims(spec)?;
        let mut out = tensions.clone();
        for (s, mode) in self.modes.iter().enumerate() {
            if let SegmentMode::Jammed { tension } = *mode {
                for i in spec.segment_tendons(s) {
                    out.tensions[i] += tension;
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumResult {
    pub state: ChainState,
    /// Potential energy at `state`, N·mm.
    pub energy: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Norm of the projected energy gradient, N·mm.
    pub gradient_norm: f64,
    /// Objective after each accepted solver step.
    pub energy_trace: Vec<f64>,
    pub jamming: Option<JammingReport>,
}

pub fn energy_breakdown(
    spec: &ManipulatorSpec,
    state: &ChainState,
    tendons: &TendonState,
    load: &LoadCase,
) -> Result<EnergyBreakdown> {
    state.check_dims(spec)?;
    let model = EnergyModel::new(spec, tendons, load)?;
    Ok(model.evaluate(&pack(state), None, false))
}

/// Total potential energy, N·mm.
pub fn potential_energy(
    spec: &ManipulatorSpec,
    state: &ChainState,
    tendons: &TendonState,
    load: &LoadCase,
) -> Result<f64> {
    Ok(energy_breakdown(spec, state, tendons, load)?.total())
}

/// Gradient of the potential energy: joint angles first, then hinge compressions.
pub fn energy_gradient(
    spec: &ManipulatorSpec,
    state: &ChainState,
    tendons: &TendonState,
    load: &LoadCase,
) -> Result<Vec<f64>> {
    state.check_dims(spec)?;
    let model = EnergyModel::new(spec, tendons, load)?;
    let mut g = vec![0.0; model.dim()];
    model.evaluate(&pack(state), Some(&mut g), true);
    Ok(g)
}

/// Box bounds `[angle limits…, compression ranges…]`.
pub(crate) fn bounds(spec: &ManipulatorSpec) -> (Vec<f64>, Vec<f64>) {
    let n = spec.joint_count();
    let mut lo = vec![0.0; 2 * n];
    let mut hi = vec![0.0; 2 * n];
    for j in 0..n {
        let hinge = spec.hinge(j);
        lo[j] = -hinge.angle_limit;
        hi[j] = hinge.angle_limit;
        hi[n + j] = hinge.free_gap;
    }
    (lo, hi)
}

/// Minimizes energy plus the linear term `Σ linear[i]·x[i]` over the box.
pub(crate) fn minimize_model(
    spec: &ManipulatorSpec,
    model: &EnergyModel,
    lo: &[f64],
    hi: &[f64],
    linear: &[f64],
    initial: &[f64],
) -> EquilibriumResult {
    let opts = optim::Options {
        tolerance: spec.solver.tolerance,
        max_iterations: spec.solver.max_iterations,
        ..optim::Options::default()
    };
    let out = optim::minimize(
        |x, g| {
            let mut v = model.evaluate(x, Some(g), true).total();
            for i in 0..x.len() {
                v += linear[i] * x[i];
                g[i] += linear[i];
            }
            v
        },
        initial,
        lo,
        hi,
        &opts,
    );
    EquilibriumResult {
        energy: model.evaluate(&out.x, None, false).total(),
        state: unpack(&out.x),
        converged: out.converged,
        iterations: out.iterations,
        gradient_norm: out.gradient_norm,
        energy_trace: out.trace,
        jamming: None,
    }
}

/// Equilibrium with every joint free to move within its limits.
pub fn solve_flexible(
    spec: &ManipulatorSpec,
    tensions: &TendonState,
    load: &LoadCase,
    initial: &ChainState,
) -> Result<EquilibriumResult> {
    initial.check_dims(spec)?;
    let model = EnergyModel::new(spec, tensions, load)?;
    let (lo, hi) = bounds(spec);
    let linear = vec![0.0; model.dim()];
    Ok(minimize_model(spec, &model, &lo, &hi, &linear, &pack(initial)))
}

/// Static equilibrium under `command`.
///
/// Jammed segments lock at the equilibrium reached under tension alone (no payload);
/// the payload is then applied against the friction capacity of the closed joints.
pub fn solve_equilibrium(
    spec: &ManipulatorSpec,
    tensions: &TendonState,
    load: &LoadCase,
    command: &StiffnessCommand,
    initial: &ChainState,
) -> Result<EquilibriumResult> {
    let total = command.apply(spec, tensions)?;
    if !command.any_jammed() {
        return solve_flexible(spec, &total, load, initial);
    }
    let reference = solve_flexible(spec, &total, &load.without_payload(), initial)?;
    if !reference.converged {
        return Ok(reference);
    }
    let lock = JammingLock::engage(spec, command, &reference.state)?;
    lock.solve(spec, &total, load, &reference.state)
}
