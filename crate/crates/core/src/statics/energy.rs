//! Total potential energy of the chain and its analytic gradient.

use nalgebra::{Matrix3, Vector3};

use super::LoadCase;
use crate::bead_chain::{ChainState, JointFamily, ManipulatorSpec};
use crate::error::Result;
use crate::tendon_model::{waypoints, TendonState, Waypoint};

/// Potential energy split by source, N·mm.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyBreakdown {
    pub bending: f64,
    pub axial: f64,
    pub gravity: f64,
    pub tendon: f64,
}

impl EnergyBreakdown {
    pub fn total(&self) -> f64 {
        self.bending + self.axial + self.gravity + self.tendon
    }
}

/// Precomputed per-joint and per-tendon data for fast energy evaluations.
///
/// The decision vector is `[joint angles…, hinge compressions…]`.
pub(crate) struct EnergyModel {
    n: usize,
    axes: Vec<Vector3<f64>>,
    families: Vec<JointFamily>,
    pitch: Vec<f64>,
    bending_stiffness: Vec<f64>,
    axial_stiffness: Vec<f64>,
    unit_mass: Vec<f64>,
    /// Gravity force per gram in the base frame, N.
    weight_per_gram: Vector3<f64>,
    tip_mass: f64,
    tendons: Vec<(f64, Vec<Waypoint>, Vec<f64>)>,
}

impl EnergyModel {
    pub fn new(spec: &ManipulatorSpec, tendons: &TendonState, load: &LoadCase) -> Result<Self> {
        tendons.check_dims(spec)?;
        let n = spec.joint_count();
        let families: Vec<JointFamily> = (0..n).map(|j| spec.joint_family(j)).collect();
        let mut pitch = Vec::with_capacity(n);
        let mut bending_stiffness = Vec::with_capacity(n);
        let mut axial_stiffness = Vec::with_capacity(n);
        let mut unit_mass = Vec::with_capacity(n);
        for seg in &spec.segments {
            for _ in 0..seg.bead_count {
                pitch.push(seg.bead.pitch);
                bending_stiffness.push(seg.hinge.bending_stiffness);
                axial_stiffness.push(seg.hinge.axial_stiffness);
                unit_mass.push(seg.unit_mass());
            }
        }
        let gravity_base = spec.base_pose.rotation.transpose() * load.gravity;
        let mut tendon_data = Vec::new();
        for (t, &tension) in spec.tendons().zip(&tendons.tensions) {
            if tension == 0.0 {
                continue;
            }
            let wps = waypoints(spec, t)?;
            // Straight-chain segment lengths, subtracted to keep the objective small.
            let mut rest = Vec::with_capacity(wps.len() - 1);
            for w in wps.windows(2) {
                let j = w[1].bead.expect("only the first waypoint is grounded");
                let d = Vector3::new(0.0, 0.0, pitch[j]) + w[1].local - w[0].local;
                rest.push(d.norm());
            }
            tendon_data.push((tension, wps, rest));
        }
        Ok(Self {
            n,
            axes: families.iter().map(|f| f.axis()).collect(),
            families,
            pitch,
            bending_stiffness,
            axial_stiffness,
            unit_mass,
            weight_per_gram: gravity_base * 1e-6,
            tip_mass: load.tip_mass,
            tendons: tendon_data,
        })
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    /// Energy terms. With `offset`, tendon terms are measured from the straight-chain length
    /// (a constant shift that keeps round-off small inside the solver).
    pub fn evaluate(&self, x: &[f64], grad: Option<&mut [f64]>, offset: bool) -> EnergyBreakdown {
        let n = self.n;
        let (angles, comps) = x.split_at(n);
        let mut rot = Vec::with_capacity(n);
        let mut pos = Vec::with_capacity(n);
        let mut r = Matrix3::identity();
        let mut t = Vector3::zeros();
        for j in 0..n {
            r *= self.families[j].rotation(angles[j]);
            t += r.column(2) * (self.pitch[j] - comps[j]);
            rot.push(r);
            pos.push(t);
        }

        let mut e = EnergyBreakdown::default();
        for j in 0..n {
            e.bending += 0.5 * self.bending_stiffness[j] * angles[j] * angles[j];
            e.axial += 0.5 * self.axial_stiffness[j] * comps[j] * comps[j];
        }

        // Net force and moment (about the base origin) applied to each bead.
        let want_grad = grad.is_some();
        let mut force = vec![Vector3::zeros(); if want_grad { n } else { 0 }];
        let mut moment = vec![Vector3::zeros(); if want_grad { n } else { 0 }];
        let mut apply = |bead: usize, point: &Vector3<f64>, f: Vector3<f64>| {
            force[bead] += f;
            moment[bead] += point.cross(&f);
        };

        let g = self.weight_per_gram;
        if g != Vector3::zeros() {
            for j in 0..n {
                let com = pos[j] - rot[j].column(2) * (0.5 * self.pitch[j]);
                let f = g * self.unit_mass[j];
                e.gravity -= f.dot(&com);
                if want_grad {
                    apply(j, &com, f);
                }
            }
            if self.tip_mass > 0.0 {
                let f = g * self.tip_mass;
                e.gravity -= f.dot(&pos[n - 1]);
                if want_grad {
                    apply(n - 1, &pos[n - 1].clone(), f);
                }
            }
        }

        let mut points = Vec::new();
        let mut dirs = Vec::new();
        for (tension, wps, rest) in &self.tendons {
            points.clear();
            points.extend(wps.iter().map(|w| match w.bead {
                None => w.local,
                Some(j) => pos[j] + rot[j] * w.local,
            }));
            dirs.clear();
            let mut length = 0.0;
            for (k, pair) in points.windows(2).enumerate() {
                let d = pair[1] - pair[0];
                let len = d.norm();
                length += if offset { len - rest[k] } else { len };
                dirs.push(d / len);
            }
            e.tendon += tension * length;
            if want_grad {
                for k in 1..points.len() {
                    let mut dl = dirs[k - 1];
                    if k < dirs.len() {
                        dl -= dirs[k];
                    }
                    let bead = wps[k].bead.expect("bead waypoint");
                    apply(bead, &points[k], -dl * *tension);
                }
            }
        }

        if let Some(grad) = grad {
            let (ga, gc) = grad.split_at_mut(n);
            let mut f_tot = Vector3::zeros();
            let mut m_tot = Vector3::zeros();
            for j in (0..n).rev() {
                f_tot += force[j];
                m_tot += moment[j];
                let origin = if j == 0 { Vector3::zeros() } else { pos[j - 1] };
                let omega = rot[j] * self.axes[j];
                let m_joint = m_tot - origin.cross(&f_tot);
                ga[j] = self.bending_stiffness[j] * angles[j] - omega.dot(&m_joint);
                gc[j] = self.axial_stiffness[j] * comps[j] + rot[j].column(2).dot(&f_tot);
            }
        }
        e
    }
}

pub(crate) fn pack(state: &ChainState) -> Vec<f64> {
    let mut x = state.joint_angles.clone();
    x.extend_from_slice(&state.hinge_compressions);
    x
}

pub(crate) fn unpack(x: &[f64]) -> ChainState {
    let n = x.len() / 2;
    ChainState {
        joint_angles: x[..n].to_vec(),
        hinge_compressions: x[n..].to_vec(),
    }
}
