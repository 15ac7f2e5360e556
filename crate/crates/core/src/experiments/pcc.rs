//! How well single arcs describe the simulated chain.

use serde::Serialize;

use crate::arc_model::{arc_transform, compose, ArcFit, ArcParams};
use crate::bead_chain::{chain_to_arcs, ChainState, ManipulatorSpec};
use crate::error::Result;
use crate::pose::Pose;
use crate::statics::{reach_pose, solve_flexible, LoadCase};
use crate::tendon_model::TendonState;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PccResult {
    pub commanded: Vec<ArcParams>,
    pub fitted: Vec<ArcFit>,
    /// Distance between the tips of the composed fitted and commanded arcs, mm.
    pub tip_residual: f64,
    pub converged: bool,
}

fn composed_tip(arcs: &[ArcParams]) -> Result<nalgebra::Vector3<f64>> {
    let poses: Vec<Pose> = arcs.iter().map(arc_transform).collect();
    Ok(compose(&poses)?.translation)
}

/// For each pose: finds the tensions that realize it without gravity or payload, applies
/// `load` with those tensions held, fits one arc per segment and compares tips.
pub fn run_pcc_validation(spec: &ManipulatorSpec, poses: &[Vec<ArcParams>], load: &LoadCase) -> Result<Vec<PccResult>> {
    spec.validate()?;
    let zero = ChainState::zeros(spec.joint_count());
    let weightless = LoadCase::weightless();
    poses
        .iter()
        .map(|pose| {
            let targets: Vec<Option<ArcParams>> = pose.iter().copied().map(Some).collect();
            let posed = reach_pose(spec, &targets, &TendonState::slack(spec), &zero, |t, init| {
                solve_flexible(spec, t, &weightless, init)
            })?;
            let result = if *load == weightless {
                posed.result
            } else {
                solve_flexible(spec, &posed.tensions, load, &posed.result.state)?
            };
            let fitted = chain_to_arcs(spec, &result.state)?;
            let fitted_arcs: Vec<ArcParams> = fitted.iter().map(|f| f.arc).collect();
            Ok(PccResult {
                tip_residual: (composed_tip(&fitted_arcs)? - composed_tip(pose)?).norm(),
                commanded: pose.clone(),
                fitted,
                converged: result.converged,
            })
        })
        .collect()
}
