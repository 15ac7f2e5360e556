//! Tendon tensions that bend segments onto commanded arcs.

use nalgebra::{DMatrix, DVector};

use super::EquilibriumResult;
use crate::arc_model::{ArcFit, ArcParams};
use crate::bead_chain::{chain_to_arcs, ChainState, JointFamily, ManipulatorSpec};
use crate::error::{Error, Result};
use crate::tendon_model::TendonState;

/// Largest accepted curvature-vector mismatch between fitted and commanded arcs, rad.
pub const POSE_TOLERANCE: f64 = 0.5 * std::f64::consts::PI / 180.0;
/// The iteration aims well inside the acceptance tolerance.
const TARGET: f64 = 1e-5;
const MAX_ITERATIONS: usize = 40;
/// Moments beyond this (in tension units, N) are never tried.
const MAX_MOMENT: f64 = 1e4;

#[derive(Debug, Clone)]
pub struct PoseSolution {
    pub tensions: TendonState,
    pub result: EquilibriumResult,
    /// Fitted arc of every segment at the solution.
    pub arcs: Vec<ArcFit>,
    /// Largest curvature-vector mismatch over the commanded segments, rad.
    pub error: f64,
    pub iterations: usize,
}

/// Splits the bending moment `(mx, my)` (in tension units) over the two tendons whose
/// anchor angles bracket its direction.
fn allocate(spec: &ManipulatorSpec, segment: usize, mx: f64, my: f64, out: &mut [f64]) {
    let range = spec.segment_tendons(segment);
    if mx.hypot(my) == 0.0 {
        return;
    }
    let mut order: Vec<(f64, usize)> = spec.segments[segment]
        .tendons
        .iter()
        .enumerate()
        .map(|(k, t)| (t.anchor_angle, range.start + k))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    let target = my.atan2(mx);
    let tau = std::f64::consts::TAU;
    for k in 0..order.len() {
        let (a, ia) = order[k];
        let (b, ib) = order[(k + 1) % order.len()];
        let span = (b - a).rem_euclid(tau);
        let offset = (target - a).rem_euclid(tau);
        if offset <= span || order.len() == 1 {
            let det = a.cos() * b.sin() - a.sin() * b.cos();
            if det.abs() < 1e-12 {
                continue;
            }
            let ta = (mx * b.sin() - my * b.cos()) / det;
            let tb = (a.cos() * my - a.sin() * mx) / det;
            out[ia] += ta.max(0.0);
            out[ib] += tb.max(0.0);
            return;
        }
    }
}

/// Bending moment (in tension units) that would produce curvature vector `(u, v)` on
/// `segment` if its joints were free linear springs sharing the curvature evenly.
fn linear_moment(spec: &ManipulatorSpec, segment: usize, u: f64, v: f64) -> (f64, f64) {
    let seg = &spec.segments[segment];
    let radius = seg.tendons.iter().map(|t| t.external_radius).sum::<f64>() / seg.tendons.len() as f64;
    let joints = spec.segment_joints(segment);
    let count = |f: JointFamily| joints.clone().filter(|&j| spec.joint_family(j) == f).count().max(1) as f64;
    let k_b = seg.hinge.bending_stiffness;
    (
        u * k_b / (radius * count(JointFamily::X)),
        v * k_b / (radius * count(JointFamily::Y)),
    )
}

/// Open-loop tensions: `base` plus, for each segment, the linear-spring estimate of the
/// tension needed to reach its arc (gravity and coupling ignored).
pub fn open_loop_tensions(spec: &ManipulatorSpec, arcs: &[ArcParams], base: &TendonState) -> Result<TendonState> {
    if arcs.len() != spec.segments.len() {
        return Err(Error::DimensionMismatch {
            what: "arcs",
            expected: spec.segments.len(),
            got: arcs.len(),
        });
    }
    base.check_dims(spec)?;
    let mut t = base.tensions.clone();
    for (s, arc) in arcs.iter().enumerate() {
        let (u, v) = arc.curvature_vector();
        let (mx, my) = linear_moment(spec, s, u, v);
        allocate(spec, s, mx, my, &mut t);
    }
    Ok(TendonState { tensions: t })
}

/// Bends each segment with a `Some` target onto that arc by adjusting its own tendons on top
/// of `base`; segments with `None` receive no extra tension.
///
/// `solve(tensions, initial)` computes the equilibrium for candidate tensions. The unknowns are
/// per-segment bending moments, updated by a secant (Broyden) iteration seeded with a
/// finite-difference Jacobian.
pub fn reach_pose<S>(
    spec: &ManipulatorSpec,
    targets: &[Option<ArcParams>],
    base: &TendonState,
    initial: &ChainState,
    mut solve: S,
) -> Result<PoseSolution>
where
    S: FnMut(&TendonState, &ChainState) -> Result<EquilibriumResult>,
{
    if targets.len() != spec.segments.len() {
        return Err(Error::DimensionMismatch {
            what: "pose targets",
            expected: spec.segments.len(),
            got: targets.len(),
        });
    }
    base.check_dims(spec)?;
    let active: Vec<(usize, (f64, f64))> = targets
        .iter()
        .enumerate()
        .filter_map(|(s, t)| t.map(|arc| (s, arc.curvature_vector())))
        .collect();

    let tensions_for = |m: &DVector<f64>| {
        let mut t = base.tensions.clone();
        for (k, &(s, _)) in active.iter().enumerate() {
            allocate(spec, s, m[2 * k], m[2 * k + 1], &mut t);
        }
        TendonState { tensions: t }
    };
    let mut evaluate = |m: &DVector<f64>, warm: &ChainState| -> Result<(EquilibriumResult, Vec<ArcFit>, DVector<f64>)> {
        let result = solve(&tensions_for(m), warm)?;
        let arcs = chain_to_arcs(spec, &result.state)?;
        let residual = DVector::from_iterator(
            2 * active.len(),
            active.iter().flat_map(|&(s, (u, v))| {
                let (fu, fv) = arcs[s].arc.curvature_vector();
                [fu - u, fv - v]
            }),
        );
        Ok((result, arcs, residual))
    };

    let mut m = DVector::zeros(2 * active.len());
    for (k, &(s, (u, v))) in active.iter().enumerate() {
        let (mx, my) = linear_moment(spec, s, u, v);
        m[2 * k] = mx;
        m[2 * k + 1] = my;
    }

    let (mut result, mut arcs, mut residual) = evaluate(&m, initial)?;
    let mut iterations = 0;
    if !active.is_empty() {
        let mut jacobian: Option<DMatrix<f64>> = None;
        let mut fresh = false;
        while residual.amax() > TARGET && iterations < MAX_ITERATIONS {
            iterations += 1;
            let jac = match jacobian.take() {
                Some(j) => j,
                None => {
                    fresh = true;
                    let mut j = DMatrix::zeros(m.len(), m.len());
                    for i in 0..m.len() {
                        let h = 0.5f64.max(1e-2 * m[i].abs()) * if m[i] < 0.0 { -1.0 } else { 1.0 };
                        let mut probe = m.clone();
                        probe[i] += h;
                        let (_, _, r) = evaluate(&probe, &result.state)?;
                        j.set_column(i, &((r - &residual) / h));
                    }
                    j
                }
            };
            let Some(step) = jac.clone().lu().solve(&(-&residual)) else {
                if fresh {
                    break;
                }
                continue;
            };
            let mut accepted = None;
            let mut alpha = 1.0;
            for _ in 0..8 {
                let trial = &m + &step * alpha;
                if trial.amax() > MAX_MOMENT {
                    alpha *= 0.5;
                    continue;
                }
                let out = evaluate(&trial, &result.state)?;
                if out.2.norm() < residual.norm() {
                    accepted = Some((trial, out));
                    break;
                }
                alpha *= 0.5;
            }
            match accepted {
                Some((trial, (r, a, f))) => {
                    let dm = &trial - &m;
                    let df = &f - &residual;
                    let correction = (df - &jac * &dm) * dm.transpose() / dm.norm_squared();
                    jacobian = Some(jac + correction);
                    fresh = false;
                    m = trial;
                    result = r;
                    arcs = a;
                    residual = f;
                }
                None if fresh => break,
                None => jacobian = None,
            }
        }
    }
    let error = (0..active.len())
        .map(|k| residual[2 * k].hypot(residual[2 * k + 1]))
        .fold(0.0, f64::max);
    if error > POSE_TOLERANCE {
        return Err(Error::PoseNotReached {
            residual: error,
            iterations,
        });
    }
    Ok(PoseSolution {
        tensions: tensions_for(&m),
        result,
        arcs,
        error,
        iterations,
    })
}
