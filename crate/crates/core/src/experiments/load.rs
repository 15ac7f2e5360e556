//! Payload sweeps over poses, gravity orientations and stiffness modes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arc_model::ArcParams;
use crate::bead_chain::{GravityOrientation, ManipulatorSpec};
use crate::error::{Error, Result};
use crate::statics::{load_sweep, LoadSweep, StiffnessCommand};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LoadMode {
    Flexible,
    Jammed,
}

impl LoadMode {
    pub fn name(self) -> &'static str {
        match self {
            LoadMode::Flexible => "flexible",
            LoadMode::Jammed => "jammed",
        }
    }

    pub fn command(self, spec: &ManipulatorSpec, jam_tension: f64) -> StiffnessCommand {
        match self {
            LoadMode::Flexible => StiffnessCommand::flexible(spec),
            LoadMode::Jammed => StiffnessCommand::jammed(spec, jam_tension),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadProtocol {
    /// Distal (φ, θ) poses, rad; the proximal segment is held straight.
    pub poses: Vec<(f64, f64)>,
    pub orientations: Vec<GravityOrientation>,
    pub modes: Vec<LoadMode>,
    /// Per-tendon jamming tension, N.
    pub jam_tension: f64,
    /// Payloads, g, strictly increasing.
    pub loads: Vec<f64>,
}

impl LoadProtocol {
    /// Poses (0°, 45°) and (45°, 45°), both orientations and modes, 0–1000 g in 50 g steps.
    pub fn standard() -> Self {
        let deg = |d: f64| d.to_radians();
        Self {
            poses: vec![(0.0, deg(45.0)), (deg(45.0), deg(45.0))],
            orientations: vec![GravityOrientation::Vertical, GravityOrientation::Horizontal],
            modes: vec![LoadMode::Flexible, LoadMode::Jammed],
            jam_tension: 30.0,
            loads: (0..=20).map(|i| 50.0 * i as f64).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.poses.is_empty() || self.orientations.is_empty() || self.modes.is_empty() {
            return Err(Error::invalid("protocol", "pose, orientation and mode lists must be non-empty"));
        }
        if !(self.jam_tension > 0.0) {
            return Err(Error::invalid("jam_tension", "must be > 0"));
        }
        if self.loads.is_empty() || self.loads[0] < 0.0 || self.loads.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("loads", "must be non-negative and strictly increasing"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadCurve {
    pub mode: LoadMode,
    pub orientation: GravityOrientation,
    pub phi: f64,
    pub theta: f64,
    /// The sweep, or why it could not run.
    pub outcome: std::result::Result<LoadSweep, String>,
}

impl LoadCurve {
    pub fn threshold(&self) -> Option<f64> {
        self.outcome.as_ref().ok().and_then(|s| s.threshold)
    }

    pub fn is_flagged(&self) -> bool {
        match &self.outcome {
            Ok(s) => s.points.iter().any(|p| !p.converged),
            Err(_) => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadReport {
    pub curves: Vec<LoadCurve>,
}

impl LoadReport {
    pub fn curve(&self, mode: LoadMode, orientation: GravityOrientation, phi: f64) -> Option<&LoadCurve> {
        self.curves
            .iter()
            .find(|c| c.mode == mode && c.orientation == orientation && (c.phi - phi).abs() < 1e-9)
    }

    pub fn flagged(&self) -> usize {
        self.curves.iter().filter(|c| c.is_flagged()).count()
    }
}

/// One load sweep per (mode, orientation, pose), in that nesting order.
pub fn run_load(spec: &ManipulatorSpec, protocol: &LoadProtocol) -> Result<LoadReport> {
    spec.validate()?;
    protocol.validate()?;
    let distal = spec.segments.len() - 1;
    let mut cases = Vec::new();
    for &mode in &protocol.modes {
        for &orientation in &protocol.orientations {
            for &(phi, theta) in &protocol.poses {
                cases.push((mode, orientation, phi, theta));
            }
        }
    }
    let curves = cases
        .par_iter()
        .map(|&(mode, orientation, phi, theta)| {
            let outcome = (|| {
                let mut pose: Vec<ArcParams> = spec
                    .segments
                    .iter()
                    .map(|s| ArcParams::straight(s.rest_length()))
                    .collect::<Result<_>>()?;
                pose[distal] = ArcParams::new(phi, theta, spec.segments[distal].rest_length())?;
                load_sweep(spec, &pose, &mode.command(spec, protocol.jam_tension), orientation, &protocol.loads)
            })()
            .map_err(|e| e.to_string());
            LoadCurve {
                mode,
                orientation,
                phi,
                theta,
                outcome,
            }
        })
        .collect();
    Ok(LoadReport { curves })
}
