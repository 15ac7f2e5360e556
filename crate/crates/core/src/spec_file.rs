//! Text format for [`ManipulatorSpec`]: TOML with degrees for angles.
//!
//! Parsing re-validates every invariant and reports the line of the offending value.
//! [`to_canonical`] writes a fixed layout that parses back to an equal spec.

use std::fmt::{self, Write as _};
use std::ops::Range;

use serde::Deserialize;
use toml::Spanned;

use crate::arc_model::wrap_angle;
use crate::bead_chain::{BeadSpec, GravityOrientation, HingeSpec, ManipulatorSpec, SegmentSpec, SolverSettings};
use crate::error::Error;
use crate::pose::Pose;
use crate::tendon_model::{validate_tendon, validate_tendon_set, Routing, TendonSpec};

/// The two-segment prototype in canonical form.
pub const DEFAULT_SPEC: &str = include_str!("../specs/prototype.toml");

const HEADER: &str = "# Two segments of ten beads each, tendons routed internally.\n";

/// A parse or validation failure, located in the source text when possible.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecError {
    /// 1-based line and column.
    pub location: Option<(usize, usize)>,
    pub message: String,
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.location {
            Some((line, col)) => write!(f, "line {line}, column {col}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for SpecError {}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    segments: Spanned<Vec<RawSegment>>,
    environment: Option<RawEnvironment>,
    solver: Option<RawSolver>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSegment {
    bead_count: Spanned<i64>,
    bead: RawBead,
    hinge: RawHinge,
    #[serde(default)]
    tendons: Vec<Spanned<RawTendon>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBead {
    length: Spanned<f64>,
    width: Spanned<f64>,
    mass: Spanned<f64>,
    pitch: Spanned<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHinge {
    bending_stiffness: Spanned<f64>,
    axial_stiffness: Spanned<f64>,
    free_gap: Spanned<f64>,
    height: Spanned<f64>,
    mass: Spanned<f64>,
    angle_limit_deg: Option<Spanned<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTendon {
    terminal_segment: Spanned<i64>,
    anchor_angle_deg: Spanned<f64>,
    external_radius: Spanned<f64>,
    routing: Spanned<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnvironment {
    gravity_orientation: Option<Spanned<String>>,
    friction_coefficient: Option<Spanned<f64>>,
    contact_radius: Option<Spanned<f64>>,
    out_of_plane_contact_factor: Option<Spanned<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    tolerance: Option<Spanned<f64>>,
    max_iterations: Option<Spanned<i64>>,
    fd_step: Option<Spanned<f64>>,
}

struct Locator<'a> {
    text: &'a str,
}

impl Locator<'_> {
    fn error(&self, span: Option<Range<usize>>, message: impl Into<String>) -> SpecError {
        let location = span.map(|s| {
            let before = &self.text[..s.start.min(self.text.len())];
            let line = before.matches('\n').count() + 1;
            let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
            (line, col)
        });
        SpecError {
            location,
            message: message.into(),
        }
    }
}

fn describe(e: &Error) -> String {
    e.to_string()
}

fn count(loc: &Locator, v: &Spanned<i64>, field: &str) -> Result<usize, SpecError> {
    usize::try_from(*v.get_ref()).map_err(|_| loc.error(Some(v.span()), format!("`{field}` must be ≥ 0, got {}", v.get_ref())))
}

fn gravity_from_name(name: &str) -> Option<GravityOrientation> {
    match name {
        "vertical" => Some(GravityOrientation::Vertical),
        "horizontal" => Some(GravityOrientation::Horizontal),
        "zero" => Some(GravityOrientation::Zero),
        _ => None,
    }
}

/// Parses and validates a spec document. Omitted `[environment]` and `[solver]` entries take
/// the prototype defaults.
pub fn parse_spec(text: &str) -> Result<ManipulatorSpec, SpecError> {
    let loc = Locator { text };
    let raw: RawFile = toml::from_str(text).map_err(|e| loc.error(e.span(), e.message().trim().to_string()))?;
    let defaults = ManipulatorSpec::prototype();

    let mut segments = Vec::new();
    let mut tendon_spans = Vec::new();
    for rs in raw.segments.get_ref() {
        let bead_count = count(&loc, &rs.bead_count, "bead_count")?;
        let bead = BeadSpec {
            length: *rs.bead.length.get_ref(),
            width: *rs.bead.width.get_ref(),
            mass: *rs.bead.mass.get_ref(),
            pitch: *rs.bead.pitch.get_ref(),
        };
        let hinge = HingeSpec {
            bending_stiffness: *rs.hinge.bending_stiffness.get_ref(),
            axial_stiffness: *rs.hinge.axial_stiffness.get_ref(),
            free_gap: *rs.hinge.free_gap.get_ref(),
            height: *rs.hinge.height.get_ref(),
            mass: *rs.hinge.mass.get_ref(),
            angle_limit: rs
                .hinge
                .angle_limit_deg
                .as_ref()
                .map_or(defaults.segments[0].hinge.angle_limit, |a| a.get_ref().to_radians()),
        };
        let mut tendons = Vec::new();
        let mut spans = Vec::new();
        for rt in &rs.tendons {
            let t = rt.get_ref();
            let routing = match t.routing.get_ref().as_str() {
                "internal" => Routing::Internal,
                "external" => Routing::External,
                other => {
                    return Err(loc.error(
                        Some(t.routing.span()),
                        format!("unknown routing `{other}` (expected `internal` or `external`)"),
                    ))
                }
            };
            let deg = *t.anchor_angle_deg.get_ref();
            if !(deg > -180.0 && deg <= 180.0) {
                return Err(loc.error(
                    Some(t.anchor_angle_deg.span()),
                    format!("`anchor_angle_deg` must lie in (−180, 180], got {deg}"),
                ));
            }
            tendons.push(TendonSpec {
                terminal_segment: count(&loc, &t.terminal_segment, "terminal_segment")?,
                anchor_angle: wrap_angle(deg.to_radians()),
                external_radius: *t.external_radius.get_ref(),
                routing,
            });
            spans.push(rt);
        }
        let segment = SegmentSpec {
            bead_count,
            bead,
            hinge,
            tendons,
        };
        segment.validate().map_err(|e| {
            let span = match &e {
                Error::InvalidParameter { field, .. } => Some(match *field {
                    "bead_count" => rs.bead_count.span(),
                    "bead.length" => rs.bead.length.span(),
                    "bead.width" => rs.bead.width.span(),
                    "bead.mass" => rs.bead.mass.span(),
                    "bead.pitch" => rs.bead.pitch.span(),
                    "hinge.bending_stiffness" => rs.hinge.bending_stiffness.span(),
                    "hinge.axial_stiffness" => rs.hinge.axial_stiffness.span(),
                    "hinge.free_gap" => rs.hinge.free_gap.span(),
                    "hinge.height" => rs.hinge.height.span(),
                    "hinge.mass" => rs.hinge.mass.span(),
                    "hinge.angle_limit" => rs.hinge.angle_limit_deg.as_ref().map_or(rs.bead_count.span(), |a| a.span()),
                    _ => rs.bead_count.span(),
                }),
                _ => None,
            };
            loc.error(span, describe(&e))
        })?;
        segments.push(segment);
        tendon_spans.push(spans);
    }
    if segments.is_empty() {
        return Err(loc.error(Some(raw.segments.span()), "at least one segment required"));
    }

    let env = raw.environment.as_ref();
    let pick = |v: Option<&Spanned<f64>>, default: f64| v.map_or(default, |s| *s.get_ref());
    let gravity = match env.and_then(|e| e.gravity_orientation.as_ref()) {
        None => defaults.gravity,
        Some(g) => gravity_from_name(g.get_ref()).ok_or_else(|| {
            loc.error(
                Some(g.span()),
                format!("unknown gravity_orientation `{}` (expected vertical, horizontal or zero)", g.get_ref()),
            )
        })?,
    };
    let solver = raw.solver.as_ref();
    let max_iterations = match solver.and_then(|s| s.max_iterations.as_ref()) {
        None => defaults.solver.max_iterations,
        Some(v) => count(&loc, v, "solver.max_iterations")?,
    };
    let spec = ManipulatorSpec {
        segments,
        base_pose: Pose::identity(),
        gravity,
        friction_coefficient: pick(env.and_then(|e| e.friction_coefficient.as_ref()), defaults.friction_coefficient),
        contact_radius: pick(env.and_then(|e| e.contact_radius.as_ref()), defaults.contact_radius),
        out_of_plane_contact_factor: pick(
            env.and_then(|e| e.out_of_plane_contact_factor.as_ref()),
            defaults.out_of_plane_contact_factor,
        ),
        solver: SolverSettings {
            tolerance: pick(solver.and_then(|s| s.tolerance.as_ref()), defaults.solver.tolerance),
            max_iterations,
            fd_step: pick(solver.and_then(|s| s.fd_step.as_ref()), defaults.solver.fd_step),
        },
    };

    for (s, spans) in tendon_spans.iter().enumerate() {
        for (t, raw_t) in spec.segments[s].tendons.iter().zip(spans) {
            validate_tendon(&spec, s, t).map_err(|e| {
                let rt = raw_t.get_ref();
                let span = match &e {
                    Error::InvalidParameter { field: "external_radius", .. } => rt.external_radius.span(),
                    Error::InvalidParameter { field: "anchor_angle", .. } => rt.anchor_angle_deg.span(),
                    _ => rt.terminal_segment.span(),
                };
                loc.error(Some(span), describe(&e))
            })?;
        }
        validate_tendon_set(&spec, s).map_err(|e| {
            let span = spans.first().map(|t| t.span()).unwrap_or_else(|| raw.segments.span());
            loc.error(Some(span), describe(&e))
        })?;
    }
    spec.validate().map_err(|e| {
        let span = match &e {
            Error::InvalidParameter { field, .. } => match *field {
                "friction_coefficient" => env.and_then(|e| e.friction_coefficient.as_ref()).map(|v| v.span()),
                "contact_radius" => env.and_then(|e| e.contact_radius.as_ref()).map(|v| v.span()),
                "out_of_plane_contact_factor" => env.and_then(|e| e.out_of_plane_contact_factor.as_ref()).map(|v| v.span()),
                "solver.tolerance" => solver.and_then(|s| s.tolerance.as_ref()).map(|v| v.span()),
                "solver.fd_step" => solver.and_then(|s| s.fd_step.as_ref()).map(|v| v.span()),
                "solver.max_iterations" => solver.and_then(|s| s.max_iterations.as_ref()).map(|v| v.span()),
                _ => None,
            },
            _ => None,
        };
        loc.error(span, describe(&e))
    })?;
    Ok(spec)
}

/// Shortest round-tripping decimal, always with a fractional part or exponent.
fn num(v: f64) -> String {
    let s = format!("{v:?}");
    if s.contains(['.', 'e', 'E']) || s.contains("inf") || s.contains("NaN") {
        s
    } else {
        format!("{s}.0")
    }
}

fn degrees(rad: f64) -> String {
    num((rad.to_degrees() * 1e9).round() / 1e9 + 0.0)
}

/// Canonical text of `spec`. The base pose is not part of the format.
pub fn to_canonical(spec: &ManipulatorSpec) -> String {
    let mut out = String::from(HEADER);
    for seg in &spec.segments {
        let _ = write!(
            out,
            "\n[[segments]]\nbead_count = {}\n\n[segments.bead]\nlength = {}\nwidth = {}\nmass = {}\npitch = {}\n",
            seg.bead_count,
            num(seg.bead.length),
            num(seg.bead.width),
            num(seg.bead.mass),
            num(seg.bead.pitch),
        );
        let h = &seg.hinge;
        let _ = write!(
            out,
            "\n[segments.hinge]\nbending_stiffness = {}\naxial_stiffness = {}\nfree_gap = {}\nheight = {}\nmass = {}\nangle_limit_deg = {}\n",
            num(h.bending_stiffness),
            num(h.axial_stiffness),
            num(h.free_gap),
            num(h.height),
            num(h.mass),
            degrees(h.angle_limit),
        );
        for t in &seg.tendons {
            let _ = write!(
                out,
                "\n[[segments.tendons]]\nterminal_segment = {}\nanchor_angle_deg = {}\nexternal_radius = {}\nrouting = \"{}\"\n",
                t.terminal_segment,
                degrees(t.anchor_angle),
                num(t.external_radius),
                match t.routing {
                    Routing::Internal => "internal",
                    Routing::External => "external",
                },
            );
        }
    }
    let _ = write!(
        out,
        "\n[environment]\ngravity_orientation = \"{}\"\nfriction_coefficient = {}\ncontact_radius = {}\nout_of_plane_contact_factor = {}\n",
        spec.gravity.name(),
        num(spec.friction_coefficient),
        num(spec.contact_radius),
        num(spec.out_of_plane_contact_factor),
    );
    let _ = write!(
        out,
        "\n[solver]\ntolerance = {}\nmax_iterations = {}\nfd_step = {}\n",
        num(spec.solver.tolerance),
        spec.solver.max_iterations,
        num(spec.solver.fd_step),
    );
    out
}

/// The bundled prototype spec.
pub fn default_spec() -> ManipulatorSpec {
    parse_spec(DEFAULT_SPEC).expect("bundled spec is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_spec_is_canonical_and_matches_prototype() {
        let spec = parse_spec(DEFAULT_SPEC).unwrap();
        assert_eq!(to_canonical(&spec), DEFAULT_SPEC);
        assert_eq!(spec, ManipulatorSpec::prototype());
    }

    #[test]
    fn omitted_sections_take_defaults() {
        let text: String = DEFAULT_SPEC.split("\n[environment]").next().unwrap().to_string();
        let spec = parse_spec(&text).unwrap();
        assert_eq!(spec.solver.tolerance, 1e-6);
        assert_eq!(spec.solver.max_iterations, 5000);
        assert_eq!(spec.solver.fd_step, 1e-5);
        assert_eq!(spec.gravity, GravityOrientation::Vertical);
    }

    #[test]
    fn bead_count_one_names_the_invariant_and_line() {
        let text = DEFAULT_SPEC.replacen("bead_count = 10", "bead_count = 1", 1);
        let err = parse_spec(&text).unwrap_err();
        assert!(err.message.contains("bead_count ≥ 2"), "{err}");
        assert_eq!(err.location.map(|l| l.0), Some(4));
    }

    #[test]
    fn unknown_key_is_rejected_with_location() {
        let text = DEFAULT_SPEC.replacen("pitch = 20.0", "pitch = 20.0\ncolour = \"red\"", 1);
        let err = parse_spec(&text).unwrap_err();
        assert!(err.message.contains("colour"), "{err}");
        assert_eq!(err.location.map(|l| l.0), Some(11));
    }

    #[test]
    fn syntax_error_has_location() {
        let err = parse_spec("[[segments]\nbead_count = 3").unwrap_err();
        assert_eq!(err.location.map(|l| l.0), Some(1));
    }

    #[test]
    fn tendon_radius_bound_points_at_value() {
        let text = DEFAULT_SPEC.replacen("external_radius = 15.0", "external_radius = 25.0", 1);
        let err = parse_spec(&text).unwrap_err();
        assert!(err.message.contains("external_radius"), "{err}");
        let line = text.lines().position(|l| l == "external_radius = 25.0").unwrap() + 1;
        assert_eq!(err.location.map(|l| l.0), Some(line));
    }

    #[test]
    fn integers_are_accepted_for_floats() {
        let text = DEFAULT_SPEC.replace("length = 26.0", "length = 26");
        assert_eq!(parse_spec(&text).unwrap(), ManipulatorSpec::prototype());
    }

    #[test]
    fn canonical_text_round_trips_a_modified_spec() {
        let mut spec = ManipulatorSpec::prototype().with_routing(1, Routing::External);
        spec.gravity = GravityOrientation::Horizontal;
        spec.segments[0].hinge.free_gap = 0.125;
        let text = to_canonical(&spec);
        let back = parse_spec(&text).unwrap();
        assert_eq!(to_canonical(&back), text);
        assert_eq!(back.segments[1].tendons[0].routing, Routing::External);
    }
}
