//! Tip deviation under increasing payload.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{reach_pose, solve_flexible, JammingLock, LoadCase, StiffnessCommand};
use crate::arc_model::ArcParams;
use crate::bead_chain::{tip_position, ChainState, GravityOrientation, ManipulatorSpec};
use crate::error::{Error, Result};
use crate::tendon_model::TendonState;

/// Failure when the incremental slope exceeds this multiple of the median earlier slope.
pub const SLOPE_FACTOR: f64 = 3.0;
/// Slopes below this never count as failure, mm/g.
pub const SLOPE_FLOOR: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadPoint {
    /// Tip payload, g.
    pub load: f64,
    /// Distance of the loaded tip from the unloaded tip, mm.
    pub deviation: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadSweep {
    pub points: Vec<LoadPoint>,
    /// First load at which the deviation curve breaks away; `None` if it never does.
    pub threshold: Option<f64>,
    /// Tensions holding the pose, jamming tension included.
    pub tensions: TendonState,
    pub unloaded_tip: Vector3<f64>,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// First load whose incoming slope exceeds `SLOPE_FACTOR` × the median of the earlier slopes
/// (and `SLOPE_FLOOR`). The first slope has no history and is never flagged.
pub fn failure_threshold(points: &[LoadPoint]) -> Option<f64> {
    let slopes: Vec<f64> = points
        .windows(2)
        .map(|w| (w[1].deviation - w[0].deviation) / (w[1].load - w[0].load))
        .collect();
    (1..slopes.len())
        .find(|&i| {
            let reference = median(&mut slopes[..i].to_vec());
            slopes[i] > (SLOPE_FACTOR * reference).max(SLOPE_FLOOR)
        })
        .map(|i| points[i + 1].load)
}

/// Poses the manipulator unloaded, then applies each payload in turn, warm-starting from the
/// previous solution. Jammed segments lock at the unloaded pose; joints that slip re-stick
/// where they stop before the next load.
pub fn load_sweep(
    spec: &ManipulatorSpec,
    pose: &[ArcParams],
    command: &StiffnessCommand,
    orientation: GravityOrientation,
    loads: &[f64],
) -> Result<LoadSweep> {
    command.validate(spec)?;
    if loads.is_empty() {
        return Err(Error::invalid("loads", "at least one load required"));
    }
    if loads.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("loads", "must be strictly increasing"));
    }
    let unloaded = LoadCase::oriented(spec, orientation, 0.0)?;
    let base = command.apply(spec, &TendonState::slack(spec))?;
    let targets: Vec<Option<ArcParams>> = pose.iter().copied().map(Some).collect();
    let posed = reach_pose(
        spec,
        &targets,
        &base,
        &ChainState::zeros(spec.joint_count()),
        |t, init| solve_flexible(spec, t, &unloaded, init),
    )?;
    let tensions = posed.tensions;
    let unloaded_tip = tip_position(spec, &posed.result.state)?;
    let mut lock = if command.any_jammed() {
        Some(JammingLock::engage(spec, command, &posed.result.state)?)
    } else {
        None
    };

    let mut state = posed.result.state;
    let mut points = Vec::with_capacity(loads.len());
    for &load in loads {
        let case = LoadCase::oriented(spec, orientation, load)?;
        let result = match lock.as_mut() {
            Some(lock) => lock.advance(spec, &tensions, &case, &state)?,
            None => solve_flexible(spec, &tensions, &case, &state)?,
        };
        points.push(LoadPoint {
            load,
            deviation: (tip_position(spec, &result.state)? - unloaded_tip).norm(),
            converged: result.converged,
        });
        state = result.state;
    }
    Ok(LoadSweep {
        threshold: failure_threshold(&points),
        points,
        tensions,
        unloaded_tip,
    })
}
