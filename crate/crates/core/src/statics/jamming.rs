//! Coulomb stick-slip locking of closed hinge gaps.

use serde::{Deserialize, Serialize};

use super::energy::{pack, EnergyModel};
use super::{bounds, minimize_model, EquilibriumResult, LoadCase, StiffnessCommand};
use crate::bead_chain::{ChainState, JointFamily, ManipulatorSpec};
use crate::error::Result;
use crate::tendon_model::TendonState;

/// A hinge gap counts as closed within this distance of full compression, mm.
const CLOSED_TOL: f64 = 1e-9;
/// Bending planes this close to a joint axis count as in-plane, rad.
const IN_PLANE_TOL: f64 = 1.0 * std::f64::consts::PI / 180.0;
/// Segments bent less than this have no defined bending plane, rad.
const STRAIGHT_TOL: f64 = 1e-3;
const MAX_FIXED_POINT_ITERATIONS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
enum Lock {
    Free,
    Stuck { angle: f64 },
    /// Sliding away from `anchor` in `direction` against a constant friction torque.
    Slipping { anchor: f64, direction: f64, capacity: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum JointStatus {
    Free,
    Stuck,
    Slipping,
}

/// Torque and friction capacity of one jammed-segment joint at the converged state, N·mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointAudit {
    pub joint: usize,
    pub status: JointStatus,
    pub gap_closed: bool,
    pub torque: f64,
    pub capacity: f64,
}

/// A stuck joint that broke loose, with the torque and capacity at that moment, N·mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReleaseEvent {
    pub joint: usize,
    pub torque: f64,
    pub capacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JammingReport {
    pub joints: Vec<JointAudit>,
    pub releases: Vec<ReleaseEvent>,
    pub fixed_point_iterations: usize,
    pub fixed_point_converged: bool,
    /// Capacity multiplier applied in each segment.
    pub axis_factors: Vec<f64>,
}

/// Stick/slip state of every joint of the jammed segments.
#[derive(Debug, Clone, PartialEq)]
pub struct JammingLock {
    locks: Vec<Lock>,
    jammed: Vec<bool>,
    axis_factors: Vec<f64>,
}

/// Capacity multiplier for a segment bent in the plane at `phi`.
fn axis_factor(spec: &ManipulatorSpec, state: &ChainState, segment: usize) -> f64 {
    let (mut u, mut v) = (0.0, 0.0);
    for j in spec.segment_joints(segment) {
        match spec.joint_family(j) {
            JointFamily::X => u += state.joint_angles[j],
            JointFamily::Y => v += state.joint_angles[j],
        }
    }
    if u.hypot(v) < STRAIGHT_TOL {
        return 1.0;
    }
    let quarter = std::f64::consts::FRAC_PI_2;
    let phi = v.atan2(u);
    let off = (phi - (phi / quarter).round() * quarter).abs();
    if off > IN_PLANE_TOL {
        spec.out_of_plane_contact_factor
    } else {
        1.0
    }
}

impl JammingLock {
    /// Locks every closed-gap joint of the jammed segments at its angle in `state`.
    pub fn engage(
        spec: &ManipulatorSpec,
        command: &StiffnessCommand,
        state: &ChainState,
    ) -> Result<Self> {
        command.validate(spec)?;
        state.check_dims(spec)?;
        let n = spec.joint_count();
        let jammed: Vec<bool> = (0..spec.segments.len()).map(|s| command.is_jammed(s)).collect();
        let axis_factors = (0..spec.segments.len())
            .map(|s| if jammed[s] { axis_factor(spec, state, s) } else { 1.0 })
            .collect();
        let locks = (0..n)
            .map(|j| {
                let closed = state.hinge_compressions[j] >= spec.hinge(j).free_gap - CLOSED_TOL;
                if jammed[spec.segment_of_joint(j)] && closed {
                    Lock::Stuck {
                        angle: state.joint_angles[j],
                    }
                } else {
                    Lock::Free
                }
            })
            .collect();
        Ok(Self {
            locks,
            jammed,
            axis_factors,
        })
    }

    pub fn stuck_count(&self) -> usize {
        self.locks.iter().filter(|l| matches!(l, Lock::Stuck { .. })).count()
    }

    pub fn axis_factors(&self) -> &[f64] {
        &self.axis_factors
    }

    /// Equilibrium under `load` with stuck joints held until their torque exceeds the
    /// friction capacity, iterated to a stick/slip fixed point.
    pub fn solve(
        &self,
        spec: &ManipulatorSpec,
        tensions: &TendonState,
        load: &LoadCase,
        initial: &ChainState,
    ) -> Result<EquilibriumResult> {
        initial.check_dims(spec)?;
        let model = EnergyModel::new(spec, tensions, load)?;
        let n = spec.joint_count();
        let (base_lo, base_hi) = bounds(spec);
        let capacity_scale: Vec<f64> = (0..n)
            .map(|j| {
                spec.friction_coefficient
                    * spec.contact_radius
                    * self.axis_factors[spec.segment_of_joint(j)]
            })
            .collect();

        let mut locks = self.locks.clone();
        let mut releases = Vec::new();
        let mut x = pack(initial);
        let mut total_iterations = 0;
        let mut trace = Vec::new();
        let mut grad = vec![0.0; 2 * n];
        let mut fixed_point_converged = false;
        let mut rounds = 0;
        let mut result;
        loop {
            rounds += 1;
            let mut lo = base_lo.clone();
            let mut hi = base_hi.clone();
            let mut linear = vec![0.0; 2 * n];
            for (j, lock) in locks.iter().enumerate() {
                match *lock {
                    Lock::Free => {}
                    Lock::Stuck { angle } => {
                        lo[j] = angle;
                        hi[j] = angle;
                    }
                    Lock::Slipping {
                        anchor,
                        direction,
                        capacity,
                    } => {
                        if direction > 0.0 {
                            lo[j] = anchor;
                        } else {
                            hi[j] = anchor;
                        }
                        linear[j] = direction * capacity;
                    }
                }
            }
            result = minimize_model(spec, &model, &lo, &hi, &linear, &x);
            total_iterations += result.iterations;
            trace.extend_from_slice(&result.energy_trace);
            x = pack(&result.state);
            model.evaluate(&x, Some(&mut grad), true);

            let mut changed = false;
            for j in 0..n {
                if !self.jammed[spec.segment_of_joint(j)] {
                    continue;
                }
                let closed = x[n + j] >= spec.hinge(j).free_gap - CLOSED_TOL;
                let capacity = if closed {
                    capacity_scale[j] * (-grad[n + j]).max(0.0)
                } else {
                    0.0
                };
                let torque = grad[j];
                let next = match locks[j] {
                    Lock::Free => Lock::Free,
                    _ if !closed => Lock::Free,
                    Lock::Stuck { angle } => {
                        if torque.abs() > capacity {
                            releases.push(ReleaseEvent {
                                joint: j,
                                torque: torque.abs(),
                                capacity,
                            });
                            Lock::Slipping {
                                anchor: angle,
                                direction: -torque.signum(),
                                capacity,
                            }
                        } else {
                            locks[j]
                        }
                    }
                    Lock::Slipping {
                        anchor,
                        direction,
                        capacity: old,
                    } => {
                        let moved = (x[j] - anchor) * direction > 0.0;
                        if !moved && torque.abs() <= capacity {
                            Lock::Stuck { angle: anchor }
                        } else if (old - capacity).abs() > 1e-9 * (1.0 + old) {
                            Lock::Slipping {
                                anchor,
                                direction,
                                capacity,
                            }
                        } else {
                            locks[j]
                        }
                    }
                };
                if next != locks[j] {
                    locks[j] = next;
                    changed = true;
                }
            }
            if !changed {
                fixed_point_converged = true;
                break;
            }
            if rounds >= MAX_FIXED_POINT_ITERATIONS {
                break;
            }
        }

        let joints = (0..n)
            .filter(|&j| self.jammed[spec.segment_of_joint(j)])
            .map(|j| {
                let closed = x[n + j] >= spec.hinge(j).free_gap - CLOSED_TOL;
                JointAudit {
                    joint: j,
                    status: match locks[j] {
                        Lock::Free => JointStatus::Free,
                        Lock::Stuck { .. } => JointStatus::Stuck,
                        Lock::Slipping { .. } => JointStatus::Slipping,
                    },
                    gap_closed: closed,
                    torque: grad[j].abs(),
                    capacity: if closed {
                        capacity_scale[j] * (-grad[n + j]).max(0.0)
                    } else {
                        0.0
                    },
                }
            })
            .collect();
        result.converged &= fixed_point_converged;
        result.iterations = total_iterations;
        result.energy_trace = trace;
        result.jamming = Some(JammingReport {
            joints,
            releases,
            fixed_point_iterations: rounds,
            fixed_point_converged,
            axis_factors: self.axis_factors.clone(),
        });
        Ok(result)
    }

    /// Like [`solve`](Self::solve), then adopts the resulting stick state for the next step
    /// (slipped joints re-stick where they came to rest).
    pub fn advance(
        &mut self,
        spec: &ManipulatorSpec,
        tensions: &TendonState,
        load: &LoadCase,
        initial: &ChainState,
    ) -> Result<EquilibriumResult> {
        let result = self.solve(spec, tensions, load, initial)?;
        if let Some(report) = &result.jamming {
            for audit in &report.joints {
                let j = audit.joint;
                self.locks[j] = match audit.status {
                    JointStatus::Free => Lock::Free,
                    _ => Lock::Stuck {
                        angle: result.state.joint_angles[j],
                    },
                };
            }
        }
        Ok(result)
    }
}
