//! Reachable tip positions under open-loop actuation.

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::LoadMode;
use crate::arc_model::ArcParams;
use crate::bead_chain::{tip_position, ChainState, GravityOrientation, ManipulatorSpec};
use crate::error::{Error, Result};
use crate::statics::{open_loop_tensions, solve_equilibrium, LoadCase};
use crate::tendon_model::TendonState;

/// Largest commanded curvature angle per segment in the workspace grid, rad.
pub const WORKSPACE_THETA_MAX: f64 = std::f64::consts::FRAC_PI_3;
const JAM_TENSION: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceReport {
    pub orientation: GravityOrientation,
    pub mode: LoadMode,
    pub density: usize,
    /// Tip positions of the converged samples, base frame.
    pub points: Vec<Vector3<f64>>,
    /// Largest tip distance from the base origin, mm.
    pub max_reach: f64,
    pub excluded: usize,
}

/// Per-segment (φ, θ) grid: `density` bending planes over a full turn and `density`
/// curvatures over `[0, WORKSPACE_THETA_MAX]`; a straight segment is sampled once.
fn segment_grid(density: usize) -> Vec<(f64, f64)> {
    let mut out = vec![(0.0, 0.0)];
    for ti in 1..density {
        let theta = WORKSPACE_THETA_MAX * ti as f64 / (density - 1) as f64;
        for pi in 0..density {
            let phi = -std::f64::consts::PI + std::f64::consts::TAU * pi as f64 / density as f64;
            out.push((phi, theta));
        }
    }
    out
}

fn run(
    spec: &ManipulatorSpec,
    orientation: GravityOrientation,
    mode: LoadMode,
    density: usize,
    parallel: bool,
) -> Result<WorkspaceReport> {
    spec.validate()?;
    let load = LoadCase::oriented(spec, orientation, 0.0)?;
    if density < 10 {
        return Err(Error::invalid("density", format!("must be ≥ 10, got {density}")));
    }
    let grid = segment_grid(density);
    let mut samples: Vec<Vec<(f64, f64)>> = vec![vec![]];
    for _ in &spec.segments {
        samples = samples
            .into_iter()
            .flat_map(|prefix| {
                grid.iter().map(move |&g| {
                    let mut next = prefix.clone();
                    next.push(g);
                    next
                })
            })
            .collect();
    }
    let command = mode.command(spec, JAM_TENSION);
    let zero = ChainState::zeros(spec.joint_count());
    let evaluate = |sample: &Vec<(f64, f64)>| -> Option<Vector3<f64>> {
        let arcs: Vec<ArcParams> = sample
            .iter()
            .zip(&spec.segments)
            .map(|(&(phi, theta), seg)| ArcParams::new(phi, theta, seg.rest_length()))
            .collect::<Result<_>>()
            .ok()?;
        let tensions = open_loop_tensions(spec, &arcs, &TendonState::slack(spec)).ok()?;
        let result = solve_equilibrium(spec, &tensions, &load, &command, &zero).ok()?;
        result.converged.then(|| tip_position(spec, &result.state).ok()).flatten()
    };
    let tips: Vec<Option<Vector3<f64>>> = if parallel {
        samples.par_iter().map(evaluate).collect()
    } else {
        samples.iter().map(evaluate).collect()
    };
    let excluded = tips.iter().filter(|t| t.is_none()).count();
    let points: Vec<Vector3<f64>> = tips.into_iter().flatten().collect();
    let max_reach = points.iter().map(|p| p.norm()).fold(0.0, f64::max);
    Ok(WorkspaceReport {
        orientation,
        mode,
        density,
        points,
        max_reach,
        excluded,
    })
}

/// Samples every combination of per-segment (φ, θ) grid points, applies the open-loop
/// tensions for that configuration, and records the equilibrium tip under gravity along
/// `orientation` (no payload).
pub fn run_workspace(
    spec: &ManipulatorSpec,
    orientation: GravityOrientation,
    mode: LoadMode,
    density: usize,
) -> Result<WorkspaceReport> {
    run(spec, orientation, mode, density, true)
}

pub fn run_workspace_serial(
    spec: &ManipulatorSpec,
    orientation: GravityOrientation,
    mode: LoadMode,
    density: usize,
) -> Result<WorkspaceReport> {
    run(spec, orientation, mode, density, false)
}
