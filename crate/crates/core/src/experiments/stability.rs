//! Proximal-segment disturbance caused by actuating the distal segment.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arc_model::ArcParams;
use crate::bead_chain::{chain_forward_kinematics, ChainState, ManipulatorSpec};
use crate::error::{Error, Result};
use crate::statics::{
    reach_pose, solve_equilibrium, solve_flexible, EquilibriumResult, JammingLock, LoadCase,
    SegmentMode, StiffnessCommand,
};
use crate::tendon_model::{Routing, TendonState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Scheme {
    ExternalFlexible,
    InternalFlexible,
    InternalJammed,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::ExternalFlexible, Scheme::InternalFlexible, Scheme::InternalJammed];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::ExternalFlexible => "external_flexible",
            Scheme::InternalFlexible => "internal_flexible",
            Scheme::InternalJammed => "internal_jammed",
        }
    }

    fn routing(self) -> Routing {
        match self {
            Scheme::ExternalFlexible => Routing::External,
            _ => Routing::Internal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityProtocol {
    /// Distal bending-plane angles φ₂, rad.
    pub bending_plane_angles: Vec<f64>,
    /// Distal curvature angles θ₂, rad.
    pub curvature_angles: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub repetitions: usize,
    /// Half-width of the uniform perturbation of the initial joint angles, rad.
    pub jitter: f64,
    /// Per-tendon tension on the jammed segments, N.
    pub jam_tension: f64,
    pub seed: u64,
}

impl StabilityProtocol {
    /// Five bending planes × three curvatures × all schemes × three repetitions.
    pub fn standard(seed: u64) -> Self {
        Self {
            bending_plane_angles: [0.0f64, 45.0, -45.0, 90.0, -90.0].iter().map(|d| d.to_radians()).collect(),
            curvature_angles: [20.0f64, 40.0, 60.0].iter().map(|d| d.to_radians()).collect(),
            schemes: Scheme::ALL.to_vec(),
            repetitions: 3,
            jitter: 0.005,
            jam_tension: 30.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bending_plane_angles.is_empty() || self.curvature_angles.is_empty() || self.schemes.is_empty() {
            return Err(Error::invalid("protocol", "angle and scheme lists must be non-empty"));
        }
        if self.repetitions == 0 {
            return Err(Error::invalid("repetitions", "must be ≥ 1"));
        }
        if self.curvature_angles.iter().any(|&t| !(0.0..=std::f64::consts::PI).contains(&t)) {
            return Err(Error::invalid("curvature_angles", "must lie in [0, π]"));
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return Err(Error::invalid("jitter", "must be ≥ 0"));
        }
        if !(self.jam_tension > 0.0) {
            return Err(Error::invalid("jam_tension", "must be > 0"));
        }
        Ok(())
    }
}

/// One (scheme, φ₂, θ₂, repetition) cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub scheme: Scheme,
    pub phi2: f64,
    pub theta2: f64,
    pub repetition: usize,
    /// Proximal-tip distance from its rest position, mm; `None` when a solve failed.
    pub deviation: Option<f64>,
}

/// Statistics for one scheme at one θ₂, across bending planes, mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaSummary {
    pub scheme: Scheme,
    pub theta2: f64,
    /// Mean over poses of the per-pose mean deviation.
    pub mean: f64,
    /// Largest per-pose mean deviation.
    pub max: f64,
    /// Mean over poses of the spread (max − min) across repetitions.
    pub range: f64,
    pub poses: usize,
}

/// Reduction of the per-θ₂ maximum from `baseline` to `improved`, %.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reduction {
    pub baseline: Scheme,
    pub improved: Scheme,
    pub theta2: f64,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub rows: Vec<StabilityRow>,
    pub summaries: Vec<ThetaSummary>,
    pub reductions: Vec<Reduction>,
    /// Rows without a deviation because a solve failed or did not converge.
    pub excluded: usize,
}

/// `100 × (1 − improved / baseline)`.
pub fn percent_reduction(baseline_max: f64, improved_max: f64) -> Result<f64> {
    if baseline_max == 0.0 {
        return Err(Error::ZeroBaseline);
    }
    if !(baseline_max > 0.0) || !(improved_max >= 0.0) {
        return Err(Error::invalid(
            "percent_reduction",
            format!("needs baseline > 0 and improved ≥ 0, got {baseline_max} and {improved_max}"),
        ));
    }
    Ok(100.0 * (1.0 - improved_max / baseline_max))
}

fn angle_key(a: f64) -> i64 {
    (a * 1e9).round() as i64
}

/// Summaries and reductions computed from the raw rows.
fn summarize(rows: &[StabilityRow]) -> Result<(Vec<ThetaSummary>, Vec<Reduction>)> {
    // (scheme, θ₂) → φ₂ → deviations over repetitions.
    let mut cells: BTreeMap<(Scheme, i64), BTreeMap<i64, Vec<f64>>> = BTreeMap::new();
    let mut theta_of = BTreeMap::new();
    for r in rows {
        let Some(d) = r.deviation else { continue };
        let key = (r.scheme, angle_key(r.theta2));
        theta_of.insert(key.1, r.theta2);
        cells.entry(key).or_default().entry(angle_key(r.phi2)).or_default().push(d);
    }
    let summaries: Vec<ThetaSummary> = cells
        .iter()
        .map(|(&(scheme, tk), poses)| {
            let means: Vec<f64> = poses.values().map(|v| v.iter().sum::<f64>() / v.len() as f64).collect();
            let ranges: Vec<f64> = poses
                .values()
                .map(|v| {
                    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
                    hi - lo
                })
                .collect();
            ThetaSummary {
                scheme,
                theta2: theta_of[&tk],
                mean: means.iter().sum::<f64>() / means.len() as f64,
                max: means.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                range: ranges.iter().sum::<f64>() / ranges.len() as f64,
                poses: means.len(),
            }
        })
        .collect();
    let mut reductions = Vec::new();
    for (i, &baseline) in Scheme::ALL.iter().enumerate() {
        for &improved in &Scheme::ALL[i + 1..] {
            for b in summaries.iter().filter(|s| s.scheme == baseline) {
                let Some(m) = summaries
                    .iter()
                    .find(|s| s.scheme == improved && angle_key(s.theta2) == angle_key(b.theta2))
                else {
                    continue;
                };
                if b.max > 0.0 {
                    reductions.push(Reduction {
                        baseline,
                        improved,
                        theta2: b.theta2,
                        percent: percent_reduction(b.max, m.max)?,
                    });
                }
            }
        }
    }
    Ok((summaries, reductions))
}

impl DeviationReport {
    fn from_rows(rows: Vec<StabilityRow>) -> Result<Self> {
        let (summaries, reductions) = summarize(&rows)?;
        let report = Self {
            excluded: rows.iter().filter(|r| r.deviation.is_none()).count(),
            rows,
            summaries,
            reductions,
        };
        report.audit()?;
        Ok(report)
    }

    pub fn summary(&self, scheme: Scheme, theta2: f64) -> Option<&ThetaSummary> {
        self.summaries
            .iter()
            .find(|s| s.scheme == scheme && angle_key(s.theta2) == angle_key(theta2))
    }

    /// Checks every summary statistic against a direct recomputation from the rows.
    pub fn audit(&self) -> Result<()> {
        let fail = |what: String| Err(Error::Protocol(format!("report audit failed: {what}")));
        for s in &self.summaries {
            let cell: Vec<&StabilityRow> = self
                .rows
                .iter()
                .filter(|r| r.scheme == s.scheme && angle_key(r.theta2) == angle_key(s.theta2) && r.deviation.is_some())
                .collect();
            let mut phis: Vec<f64> = cell.iter().map(|r| r.phi2).collect();
            phis.sort_by(f64::total_cmp);
            phis.dedup_by(|a, b| angle_key(*a) == angle_key(*b));
            let (mut sum, mut max, mut range_sum) = (0.0, f64::NEG_INFINITY, 0.0);
            for &phi in &phis {
                let devs: Vec<f64> = cell
                    .iter()
                    .filter(|r| angle_key(r.phi2) == angle_key(phi))
                    .filter_map(|r| r.deviation)
                    .collect();
                let mean = devs.iter().sum::<f64>() / devs.len() as f64;
                sum += mean;
                max = max.max(mean);
                let mut sorted = devs.clone();
                sorted.sort_by(f64::total_cmp);
                range_sum += sorted[sorted.len() - 1] - sorted[0];
            }
            let n = phis.len() as f64;
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()));
            if phis.len() != s.poses || !close(sum / n, s.mean) || !close(max, s.max) || !close(range_sum / n, s.range) {
                return fail(format!("{} at θ₂ = {}", s.scheme.name(), s.theta2));
            }
            if s.max < s.mean - 1e-12 || s.mean < 0.0 {
                return fail(format!("ordering of mean/max for {}", s.scheme.name()));
            }
        }
        for r in &self.reductions {
            let b = self.summary(r.baseline, r.theta2).map(|s| s.max);
            let m = self.summary(r.improved, r.theta2).map(|s| s.max);
            let (Some(b), Some(m)) = (b, m) else {
                return fail("reduction without summaries".into());
            };
            if (100.0 * (1.0 - m / b) - r.percent).abs() > 1e-9 {
                return fail(format!("reduction at θ₂ = {}", r.theta2));
            }
        }
        if self.excluded != self.rows.iter().filter(|r| r.deviation.is_none()).count() {
            return fail("excluded count".into());
        }
        Ok(())
    }
}

/// Scheme-specific setup shared by all cells: the routed spec, the command, the rest
/// equilibrium, and (when jammed) the lock engaged at rest.
struct Setup {
    spec: ManipulatorSpec,
    command: StiffnessCommand,
    load: LoadCase,
    rest: EquilibriumResult,
    rest_tip: nalgebra::Vector3<f64>,
    lock: Option<JammingLock>,
}

fn proximal_tip(spec: &ManipulatorSpec, state: &ChainState) -> Result<nalgebra::Vector3<f64>> {
    let last_proximal = spec.segment_joints(spec.segments.len() - 2).end - 1;
    Ok(chain_forward_kinematics(spec, state)?[last_proximal].translation)
}

fn setup(spec: &ManipulatorSpec, scheme: Scheme, jam_tension: f64) -> Result<Setup> {
    let distal = spec.segments.len() - 1;
    let spec = spec.with_routing(distal, scheme.routing());
    let mut command = StiffnessCommand::flexible(&spec);
    if scheme == Scheme::InternalJammed {
        for s in 0..distal {
            command = command.with(s, SegmentMode::Jammed { tension: jam_tension });
        }
    }
    let load = LoadCase::oriented(&spec, spec.gravity, 0.0)?;
    let zero = ChainState::zeros(spec.joint_count());
    let rest = solve_equilibrium(&spec, &TendonState::slack(&spec), &load, &command, &zero)?;
    if !rest.converged {
        return Err(Error::NotConverged(format!("rest equilibrium for {}", scheme.name())));
    }
    let lock = if command.any_jammed() {
        Some(JammingLock::engage(&spec, &command, &rest.state)?)
    } else {
        None
    };
    Ok(Setup {
        rest_tip: proximal_tip(&spec, &rest.state)?,
        spec,
        command,
        load,
        rest,
        lock,
    })
}

fn run_cell(setup: &Setup, phi2: f64, theta2: f64, initial: &ChainState) -> Result<f64> {
    let spec = &setup.spec;
    let distal = spec.segments.len() - 1;
    let mut targets = vec![None; spec.segments.len()];
    targets[distal] = Some(ArcParams::new(phi2, theta2, spec.segments[distal].rest_length())?);
    let base = setup.command.apply(spec, &TendonState::slack(spec))?;
    let posed = reach_pose(spec, &targets, &base, initial, |t, init| match &setup.lock {
        Some(lock) => lock.solve(spec, t, &setup.load, init),
        None => solve_flexible(spec, t, &setup.load, init),
    })?;
    if !posed.result.converged {
        return Err(Error::NotConverged("posed equilibrium".into()));
    }
    Ok((proximal_tip(spec, &posed.result.state)? - setup.rest_tip).norm())
}

fn cell_stream(scheme: usize, phi: usize, theta: usize, rep: usize) -> u64 {
    (((scheme as u64 * 1_000 + phi as u64) * 1_000 + theta as u64) * 1_000) + rep as u64
}

fn run(spec: &ManipulatorSpec, protocol: &StabilityProtocol, parallel: bool) -> Result<DeviationReport> {
    spec.validate()?;
    protocol.validate()?;
    if spec.segments.len() < 2 {
        return Err(Error::invalid("segments", "the stability study needs ≥ 2 segments"));
    }
    let setups: Vec<Setup> = protocol
        .schemes
        .iter()
        .map(|&s| setup(spec, s, protocol.jam_tension))
        .collect::<Result<_>>()?;

    let mut cells = Vec::new();
    for (si, &scheme) in protocol.schemes.iter().enumerate() {
        for (ti, &theta2) in protocol.curvature_angles.iter().enumerate() {
            for (pi, &phi2) in protocol.bending_plane_angles.iter().enumerate() {
                for rep in 0..protocol.repetitions {
                    cells.push((si, scheme, pi, phi2, ti, theta2, rep));
                }
            }
        }
    }
    let evaluate = |&(si, scheme, pi, phi2, ti, theta2, rep): &(usize, Scheme, usize, f64, usize, f64, usize)| {
        let setup = &setups[si];
        let mut rng = ChaCha8Rng::seed_from_u64(protocol.seed);
        rng.set_stream(cell_stream(si, pi, ti, rep));
        let mut initial = setup.rest.state.clone();
        for a in &mut initial.joint_angles {
            *a += rng.random_range(-protocol.jitter..=protocol.jitter);
        }
        StabilityRow {
            scheme,
            phi2,
            theta2,
            repetition: rep,
            deviation: run_cell(setup, phi2, theta2, &initial).ok(),
        }
    };
    let rows: Vec<StabilityRow> = if parallel {
        cells.par_iter().map(evaluate).collect()
    } else {
        cells.iter().map(evaluate).collect()
    };
    DeviationReport::from_rows(rows)
}

/// Runs every (scheme, φ₂, θ₂, repetition) cell in parallel.
///
/// Each cell commands the distal segment to (φ₂, θ₂) by tendon tension alone, leaves the
/// proximal segment unactuated (jammed for [`Scheme::InternalJammed`]), and records how far
/// the proximal tip moves from its rest position. Repetitions start the solves from rest
/// angles jittered by a per-cell random stream, so results do not depend on scheduling.
pub fn run_stability(spec: &ManipulatorSpec, protocol: &StabilityProtocol) -> Result<DeviationReport> {
    run(spec, protocol, true)
}

/// Same as [`run_stability`] on the calling thread.
pub fn run_stability_serial(spec: &ManipulatorSpec, protocol: &StabilityProtocol) -> Result<DeviationReport> {
    run(spec, protocol, false)
}
