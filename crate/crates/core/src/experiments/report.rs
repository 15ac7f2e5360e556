//! CSV and JSON renderings of experiment results.
//!
//! Angles are written in degrees (rounded to 1e-9°) and lengths in millimetres.

use std::io::Write;

use serde::Serialize;

use super::{DeviationReport, LoadReport, PccResult, WorkspaceReport};
use crate::error::{Error, Result};

fn deg(rad: f64) -> f64 {
    (rad.to_degrees() * 1e9).round() / 1e9 + 0.0
}

fn io_error(e: impl std::fmt::Display) -> Error {
    Error::Protocol(format!("report output failed: {e}"))
}

#[derive(Serialize)]
struct StabilityCsvRow {
    scheme: &'static str,
    phi2_deg: f64,
    theta2_deg: f64,
    repetition: usize,
    deviation_mm: Option<f64>,
}

#[derive(Serialize)]
struct SummaryOut {
    scheme: &'static str,
    theta2_deg: f64,
    mean_mm: f64,
    max_mm: f64,
    range_mm: f64,
    poses: usize,
}

#[derive(Serialize)]
struct ReductionOut {
    baseline: &'static str,
    improved: &'static str,
    theta2_deg: f64,
    percent: f64,
}

#[derive(Serialize)]
struct StabilityJson {
    rows: Vec<StabilityCsvRow>,
    summaries: Vec<SummaryOut>,
    reductions: Vec<ReductionOut>,
    excluded: usize,
}

fn stability_rows(report: &DeviationReport) -> Vec<StabilityCsvRow> {
    report
        .rows
        .iter()
        .map(|r| StabilityCsvRow {
            scheme: r.scheme.name(),
            phi2_deg: deg(r.phi2),
            theta2_deg: deg(r.theta2),
            repetition: r.repetition,
            deviation_mm: r.deviation,
        })
        .collect()
}

fn write_csv<T: Serialize>(rows: impl IntoIterator<Item = T>, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(io_error)?;
    }
    w.flush().map_err(io_error)
}

fn write_json<T: Serialize>(value: &T, mut out: impl Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value).map_err(io_error)?;
    out.write_all(b"\n").map_err(io_error)
}

/// Columns: scheme, phi2_deg, theta2_deg, repetition, deviation_mm (empty when excluded).
pub fn stability_csv(report: &DeviationReport, out: impl Write) -> Result<()> {
    write_csv(stability_rows(report), out)
}

pub fn stability_json(report: &DeviationReport, out: impl Write) -> Result<()> {
    let json = StabilityJson {
        rows: stability_rows(report),
        summaries: report
            .summaries
            .iter()
            .map(|s| SummaryOut {
                scheme: s.scheme.name(),
                theta2_deg: deg(s.theta2),
                mean_mm: s.mean,
                max_mm: s.max,
                range_mm: s.range,
                poses: s.poses,
            })
            .collect(),
        reductions: report
            .reductions
            .iter()
            .map(|r| ReductionOut {
                baseline: r.baseline.name(),
                improved: r.improved.name(),
                theta2_deg: deg(r.theta2),
                percent: r.percent,
            })
            .collect(),
        excluded: report.excluded,
    };
    write_json(&json, out)
}

#[derive(Serialize)]
struct LoadCsvRow {
    mode: &'static str,
    orientation: &'static str,
    phi_deg: f64,
    theta_deg: f64,
    load_g: f64,
    deviation_mm: f64,
    converged: bool,
}

#[derive(Serialize)]
struct CurveOut {
    mode: &'static str,
    orientation: &'static str,
    phi_deg: f64,
    theta_deg: f64,
    threshold_g: Option<f64>,
    error: Option<String>,
    points: Vec<LoadCsvRow>,
}

fn load_curves(report: &LoadReport) -> Vec<CurveOut> {
    report
        .curves
        .iter()
        .map(|c| CurveOut {
            mode: c.mode.name(),
            orientation: c.orientation.name(),
            phi_deg: deg(c.phi),
            theta_deg: deg(c.theta),
            threshold_g: c.threshold(),
            error: c.outcome.as_ref().err().cloned(),
            points: c
                .outcome
                .as_ref()
                .map(|s| {
                    s.points
                        .iter()
                        .map(|p| LoadCsvRow {
                            mode: c.mode.name(),
                            orientation: c.orientation.name(),
                            phi_deg: deg(c.phi),
                            theta_deg: deg(c.theta),
                            load_g: p.load,
                            deviation_mm: p.deviation,
                            converged: p.converged,
                        })
                        .collect()
                })
                .unwrap_or_default(),
        })
        .collect()
}

/// Columns: mode, orientation, phi_deg, theta_deg, load_g, deviation_mm, converged.
/// Curves that could not run contribute no rows.
pub fn load_csv(report: &LoadReport, out: impl Write) -> Result<()> {
    write_csv(load_curves(report).into_iter().flat_map(|c| c.points), out)
}

pub fn load_json(report: &LoadReport, out: impl Write) -> Result<()> {
    write_json(&serde_json::json!({ "curves": load_curves(report) }), out)
}

#[derive(Serialize)]
struct PointOut {
    x_mm: f64,
    y_mm: f64,
    z_mm: f64,
}

/// Columns: x_mm, y_mm, z_mm.
pub fn workspace_csv(report: &WorkspaceReport, out: impl Write) -> Result<()> {
    write_csv(
        report.points.iter().map(|p| PointOut {
            x_mm: p.x,
            y_mm: p.y,
            z_mm: p.z,
        }),
        out,
    )
}

pub fn workspace_json(report: &WorkspaceReport, out: impl Write) -> Result<()> {
    let points: Vec<[f64; 3]> = report.points.iter().map(|p| [p.x, p.y, p.z]).collect();
    write_json(
        &serde_json::json!({
            "orientation": report.orientation.name(),
            "mode": report.mode.name(),
            "density": report.density,
            "max_reach_mm": report.max_reach,
            "excluded": report.excluded,
            "points": points,
        }),
        out,
    )
}

#[derive(Serialize)]
struct PccRow {
    pose: usize,
    segment: usize,
    commanded_phi_deg: f64,
    commanded_theta_deg: f64,
    fitted_phi_deg: f64,
    fitted_theta_deg: f64,
    fitted_length_mm: f64,
    fit_residual_mm: f64,
    tip_residual_mm: f64,
    converged: bool,
}

fn pcc_rows(results: &[PccResult]) -> Vec<PccRow> {
    results
        .iter()
        .enumerate()
        .flat_map(|(i, r)| {
            r.commanded.iter().zip(&r.fitted).enumerate().map(move |(s, (c, f))| PccRow {
                pose: i,
                segment: s,
                commanded_phi_deg: deg(c.phi()),
                commanded_theta_deg: deg(c.theta()),
                fitted_phi_deg: deg(f.arc.phi()),
                fitted_theta_deg: deg(f.arc.theta()),
                fitted_length_mm: f.arc.length(),
                fit_residual_mm: f.residual,
                tip_residual_mm: r.tip_residual,
                converged: r.converged,
            })
        })
        .collect()
}

/// One row per (pose, segment); the tip residual repeats on every row of a pose.
pub fn pcc_csv(results: &[PccResult], out: impl Write) -> Result<()> {
    write_csv(pcc_rows(results), out)
}

pub fn pcc_json(results: &[PccResult], out: impl Write) -> Result<()> {
    write_json(&serde_json::json!({ "rows": pcc_rows(results) }), out)
}
