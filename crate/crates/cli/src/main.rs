//! `beadjam`: kinematics, equilibria and experiment reports for bead-jamming manipulators.
//!
//! Angles on the command line are in degrees. Exit status is 0 on success, 1 on usage or
//! parse errors and 2 when a mandatory solve fails to converge.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use beadjam_core::experiments::{
    report, run_load, run_pcc_validation, run_stability, run_workspace, LoadMode, LoadProtocol,
    StabilityProtocol,
};
use beadjam_core::statics::{reach_pose, solve_flexible};
use beadjam_core::{
    arc_transform, default_spec, fit_arc, parse_spec, solve_equilibrium, tip_position, ArcParams,
    ChainState, Error, GravityOrientation, LoadCase, ManipulatorSpec, StiffnessCommand, TendonState,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::Vector3;

const OUT_DIR_VAR: &str = "BEADJAM_OUT_DIR";

#[derive(Parser)]
#[command(name = "beadjam", version, about = "Bead-jamming continuum manipulator simulator")]
struct Cli {
    /// Manipulator spec file; the bundled two-segment prototype when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    spec: Option<PathBuf>,

    /// Worker threads for experiment cells (1 runs serially).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tip pose of a constant-curvature segment.
    Fk(FkArgs),
    /// Solve one static equilibrium and print state, energy and convergence.
    Equilibrium(EquilibriumArgs),
    /// Proximal-tip deviation while the distal segment bends.
    Stability(StabilityArgs),
    /// Tip deviation against payload.
    Load(LoadArgs),
    /// Tip point cloud over a grid of segment configurations.
    Workspace(WorkspaceArgs),
    /// Single-arc fits of simulated poses, or of a measured point list.
    PccCheck(PccArgs),
    /// Print the spec in canonical form.
    Spec,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Orientation {
    Vertical,
    Horizontal,
    Zero,
}

impl From<Orientation> for GravityOrientation {
    fn from(o: Orientation) -> Self {
        match o {
            Orientation::Vertical => GravityOrientation::Vertical,
            Orientation::Horizontal => GravityOrientation::Horizontal,
            Orientation::Zero => GravityOrientation::Zero,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Flexible,
    Jammed,
}

impl From<Mode> for LoadMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Flexible => LoadMode::Flexible,
            Mode::Jammed => LoadMode::Jammed,
        }
    }
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,

    /// Report path. Defaults to `<command>.<ext>` in $BEADJAM_OUT_DIR or the working directory.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Seed for every random draw of the run.
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Args)]
struct FkArgs {
    /// Bending-plane angle, degrees.
    #[arg(long, allow_negative_numbers = true)]
    phi: f64,
    /// Curvature angle, degrees.
    #[arg(long, allow_negative_numbers = true)]
    theta: f64,
    /// Only this segment (all segments otherwise).
    #[arg(long)]
    segment: Option<usize>,
}

#[derive(Args)]
struct EquilibriumArgs {
    /// Comma-separated tension per tendon, N.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, conflicts_with = "pose")]
    tensions: Option<Vec<f64>>,
    /// Target `PHI,THETA` in degrees, one per segment in order; tensions are solved for it.
    #[arg(long, value_parser = parse_pair)]
    pose: Vec<(f64, f64)>,
    #[arg(long, value_enum, default_value = "flexible")]
    mode: Mode,
    /// Per-tendon jamming tension, N.
    #[arg(long, default_value_t = 30.0)]
    jam_tension: f64,
    /// Gravity direction; the spec's when omitted.
    #[arg(long, value_enum)]
    orientation: Option<Orientation>,
    /// Tip payload, g.
    #[arg(long, default_value_t = 0.0)]
    load: f64,
}

#[derive(Args)]
struct StabilityArgs {
    #[command(flatten)]
    report: ReportArgs,
    #[arg(long, default_value_t = 3)]
    repetitions: usize,
    /// Per-tendon jamming tension, N.
    #[arg(long, default_value_t = 30.0)]
    jam_tension: f64,
}

#[derive(Args)]
struct LoadArgs {
    #[command(flatten)]
    report: ReportArgs,
    /// Stiffness mode; repeatable, both when omitted.
    #[arg(long, value_enum)]
    mode: Vec<Mode>,
    /// Distal `PHI,THETA` in degrees; repeatable, (0,45) and (45,45) when omitted.
    #[arg(long, value_parser = parse_pair)]
    pose: Vec<(f64, f64)>,
    /// Gravity direction; repeatable, vertical and horizontal when omitted.
    #[arg(long, value_enum)]
    orientation: Vec<Orientation>,
    #[arg(long, default_value_t = 30.0)]
    jam_tension: f64,
    /// Largest payload, g.
    #[arg(long, default_value_t = 1000.0)]
    max_load: f64,
    /// Payload increment, g.
    #[arg(long, default_value_t = 50.0)]
    load_step: f64,
}

#[derive(Args)]
struct WorkspaceArgs {
    #[command(flatten)]
    report: ReportArgs,
    /// Gravity direction; the spec's when omitted.
    #[arg(long, value_enum)]
    orientation: Option<Orientation>,
    #[arg(long, value_enum, default_value = "flexible")]
    mode: Mode,
    /// Grid points per angle and segment (≥ 10).
    #[arg(long, default_value_t = 10)]
    density: usize,
}

#[derive(Args)]
struct PccArgs {
    #[command(flatten)]
    report: ReportArgs,
    /// `PHI,THETA` per segment in degrees, flattened; repeatable, a standard set when omitted.
    #[arg(long, value_delimiter = ';', value_parser = parse_list)]
    pose: Vec<Vec<f64>>,
    /// Tip payload applied after posing, g.
    #[arg(long, default_value_t = 0.0)]
    load: f64,
    #[arg(long, value_enum)]
    orientation: Option<Orientation>,
    /// Fit one arc to an ordered x,y,z point list (CSV, mm) instead of simulating.
    #[arg(long, value_name = "PATH", conflicts_with = "pose")]
    points: Option<PathBuf>,
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}")))
        .collect()
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    match parse_list(s)?.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err(format!("expected PHI,THETA, got `{s}`")),
    }
}

/// A failure with its exit status.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NotConverged(_) | Error::PoseNotReached { .. } => 2,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::usage(e.to_string())
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn load_spec(path: Option<&Path>) -> CliResult<ManipulatorSpec> {
    match path {
        None => Ok(default_spec()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::usage(format!("{}: {e}", p.display())))?;
            parse_spec(&text).map_err(|e| Failure::usage(format!("{}: {e}", p.display())))
        }
    }
}

fn arc(phi_deg: f64, theta_deg: f64, length: f64) -> CliResult<ArcParams> {
    Ok(ArcParams::new(phi_deg.to_radians(), theta_deg.to_radians(), length)?)
}

/// Fixed three-decimal text without negative zero.
fn f3(v: f64) -> String {
    let r = (v * 1e3).round() / 1e3 + 0.0;
    format!("{r:.3}")
}

fn vec3(v: &Vector3<f64>) -> String {
    format!("[{}, {}, {}]", f3(v.x), f3(v.y), f3(v.z))
}

fn report_path(command: &str, args: &ReportArgs) -> PathBuf {
    args.out.clone().unwrap_or_else(|| {
        let dir = std::env::var_os(OUT_DIR_VAR).map_or_else(|| PathBuf::from("."), PathBuf::from);
        dir.join(format!("{command}.{}", args.format.extension()))
    })
}

/// Writes the report through one buffered writer.
fn write_report(
    path: &Path,
    write: impl FnOnce(&mut BufWriter<File>) -> beadjam_core::Result<()>,
) -> CliResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut out = BufWriter::new(File::create(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?);
    write(&mut out)?;
    out.flush()?;
    Ok(())
}

fn flag(rows: usize) {
    if rows > 0 {
        eprintln!("warning: {rows} flagged rows");
    }
}

fn fk(spec: &ManipulatorSpec, args: &FkArgs) -> CliResult {
    let segments: Vec<usize> = match args.segment {
        Some(s) if s >= spec.segments.len() => {
            return Err(Failure::usage(format!("segment {s} out of range ({} segments)", spec.segments.len())))
        }
        Some(s) => vec![s],
        None => (0..spec.segments.len()).collect(),
    };
    for s in segments {
        let length = spec.segments[s].rest_length();
        let pose = arc_transform(&arc(args.phi, args.theta, length)?);
        let r = pose.rotation;
        println!("segment {s}: L = {} mm", f3(length));
        println!("  tip      {} mm", vec3(&pose.translation));
        for i in 0..3 {
            let label = if i == 0 { "  rotation" } else { "          " };
            println!("{label} [{}, {}, {}]", f3(r[(i, 0)]), f3(r[(i, 1)]), f3(r[(i, 2)]));
        }
    }
    Ok(())
}

fn equilibrium(spec: &ManipulatorSpec, args: &EquilibriumArgs) -> CliResult {
    let orientation = args.orientation.map_or(spec.gravity, Into::into);
    let load = LoadCase::oriented(spec, orientation, args.load)?;
    let command = match args.mode {
        Mode::Flexible => StiffnessCommand::flexible(spec),
        Mode::Jammed => StiffnessCommand::jammed(spec, args.jam_tension),
    };
    let zero = ChainState::zeros(spec.joint_count());
    let (tensions, initial) = if args.pose.is_empty() {
        let t = match &args.tensions {
            Some(t) => TendonState::new(t.clone())?,
            None => TendonState::slack(spec),
        };
        (t, zero)
    } else {
        if args.pose.len() != spec.segments.len() {
            return Err(Failure::usage(format!(
                "--pose given {} times for {} segments",
                args.pose.len(),
                spec.segments.len()
            )));
        }
        let targets = args
            .pose
            .iter()
            .zip(&spec.segments)
            .map(|(&(p, t), seg)| arc(p, t, seg.rest_length()).map(Some))
            .collect::<CliResult<Vec<_>>>()?;
        // Pose under the jamming tension too, then hand back only the posing share.
        let unloaded = load.without_payload();
        let base = command.apply(spec, &TendonState::slack(spec))?;
        let posed = reach_pose(spec, &targets, &base, &zero, |t, init| solve_flexible(spec, t, &unloaded, init))?;
        let extra = posed.tensions.tensions.iter().zip(&base.tensions).map(|(t, b)| (t - b).max(0.0)).collect();
        (TendonState::new(extra)?, posed.result.state)
    };
    let result = solve_equilibrium(spec, &tensions, &load, &command, &initial)?;

    let applied = command.apply(spec, &tensions)?;
    println!(
        "tensions_n   [{}]",
        applied.tensions.iter().map(|&t| f3(t)).collect::<Vec<_>>().join(", ")
    );
    println!("joint  angle_deg  compression_mm");
    for (j, (a, c)) in result.state.joint_angles.iter().zip(&result.state.hinge_compressions).enumerate() {
        println!("{j:>5}  {:>9}  {:>14}", f3(a.to_degrees()), f3(*c));
    }
    println!("tip_mm       {}", vec3(&tip_position(spec, &result.state)?));
    println!("energy_nmm   {:.6}", result.energy);
    println!("converged    {}", result.converged);
    println!("iterations   {}", result.iterations);
    println!("grad_norm    {:.3e}", result.gradient_norm);
    if let Some(jam) = &result.jamming {
        println!("releases     {}", jam.releases.len());
    }
    if !result.converged {
        return Err(Failure {
            code: 2,
            message: "equilibrium did not converge".into(),
        });
    }
    Ok(())
}

fn stability(spec: &ManipulatorSpec, args: &StabilityArgs) -> CliResult {
    let protocol = StabilityProtocol {
        repetitions: args.repetitions,
        jam_tension: args.jam_tension,
        ..StabilityProtocol::standard(args.report.seed)
    };
    let result = run_stability(spec, &protocol)?;
    let path = report_path("stability", &args.report);
    write_report(&path, |out| match args.report.format {
        Format::Csv => report::stability_csv(&result, out),
        Format::Json => report::stability_json(&result, out),
    })?;
    println!("scheme             theta2_deg  mean_mm   max_mm");
    for s in &result.summaries {
        println!(
            "{:<18} {:>10}  {:>7}  {:>7}",
            s.scheme.name(),
            f3(s.theta2.to_degrees()),
            f3(s.mean),
            f3(s.max)
        );
    }
    println!("report: {}", path.display());
    flag(result.excluded);
    Ok(())
}

fn load(spec: &ManipulatorSpec, args: &LoadArgs) -> CliResult {
    let standard = LoadProtocol::standard();
    if !(args.load_step > 0.0 && args.max_load >= 0.0) {
        return Err(Failure::usage("--load-step must be > 0 and --max-load ≥ 0"));
    }
    let steps = (args.max_load / args.load_step + 1e-9).floor() as usize;
    let protocol = LoadProtocol {
        poses: if args.pose.is_empty() {
            standard.poses
        } else {
            args.pose.iter().map(|&(p, t)| (p.to_radians(), t.to_radians())).collect()
        },
        orientations: if args.orientation.is_empty() {
            standard.orientations
        } else {
            args.orientation.iter().map(|&o| o.into()).collect()
        },
        modes: if args.mode.is_empty() {
            standard.modes
        } else {
            args.mode.iter().map(|&m| m.into()).collect()
        },
        jam_tension: args.jam_tension,
        loads: (0..=steps).map(|i| args.load_step * i as f64).collect(),
    };
    let result = run_load(spec, &protocol)?;
    let path = report_path("load", &args.report);
    write_report(&path, |out| match args.report.format {
        Format::Csv => report::load_csv(&result, out),
        Format::Json => report::load_json(&result, out),
    })?;
    println!("mode      orientation  phi_deg  theta_deg  threshold_g");
    for c in &result.curves {
        let threshold = match &c.outcome {
            Ok(s) => s.threshold.map_or_else(|| "none".to_string(), f3),
            Err(e) => format!("failed: {e}"),
        };
        println!(
            "{:<9} {:<12} {:>7}  {:>9}  {threshold}",
            c.mode.name(),
            c.orientation.name(),
            f3(c.phi.to_degrees()),
            f3(c.theta.to_degrees())
        );
    }
    println!("report: {}", path.display());
    flag(result.flagged());
    Ok(())
}

fn workspace(spec: &ManipulatorSpec, args: &WorkspaceArgs) -> CliResult {
    let orientation = args.orientation.map_or(spec.gravity, Into::into);
    let result = run_workspace(spec, orientation, args.mode.into(), args.density)?;
    let path = report_path("workspace", &args.report);
    write_report(&path, |out| match args.report.format {
        Format::Csv => report::workspace_csv(&result, out),
        Format::Json => report::workspace_json(&result, out),
    })?;
    println!("points       {}", result.points.len());
    println!("max_reach_mm {}", f3(result.max_reach));
    println!("report: {}", path.display());
    flag(result.excluded);
    Ok(())
}

fn read_points(path: &Path) -> CliResult<Vec<Vector3<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    let mut points = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
        let values: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match values {
            Ok(v) if v.len() == 3 => points.push(Vector3::new(v[0], v[1], v[2])),
            // A non-numeric first row is a header.
            Err(_) if i == 0 => {}
            _ => return Err(Failure::usage(format!("{}: row {} is not x,y,z", path.display(), i + 1))),
        }
    }
    Ok(points)
}

fn pcc_check(spec: &ManipulatorSpec, args: &PccArgs) -> CliResult {
    if let Some(path) = &args.points {
        let fit = fit_arc(&read_points(path)?)?;
        println!("phi_deg      {}", f3(fit.arc.phi().to_degrees()));
        println!("theta_deg    {}", f3(fit.arc.theta().to_degrees()));
        println!("length_mm    {}", f3(fit.arc.length()));
        println!("residual_mm  {:.6}", fit.residual);
        return Ok(());
    }
    let n = spec.segments.len();
    let raw: Vec<Vec<f64>> = if args.pose.is_empty() {
        [(0.0, 30.0), (45.0, 45.0), (90.0, 60.0), (-135.0, 20.0)]
            .iter()
            .map(|&(p, t)| (0..n).flat_map(|_| [p, t]).collect())
            .collect()
    } else {
        args.pose.clone()
    };
    let poses = raw
        .iter()
        .map(|v| {
            if v.len() != 2 * n {
                return Err(Failure::usage(format!("--pose needs {} values (PHI,THETA per segment), got {}", 2 * n, v.len())));
            }
            v.chunks(2)
                .zip(&spec.segments)
                .map(|(pt, seg)| arc(pt[0], pt[1], seg.rest_length()))
                .collect::<CliResult<Vec<_>>>()
        })
        .collect::<CliResult<Vec<_>>>()?;
    let load = if args.load == 0.0 && args.orientation.is_none() {
        LoadCase::weightless()
    } else {
        LoadCase::oriented(spec, args.orientation.map_or(spec.gravity, Into::into), args.load)?
    };
    let results = run_pcc_validation(spec, &poses, &load)?;
    let path = report_path("pcc-check", &args.report);
    write_report(&path, |out| match args.report.format {
        Format::Csv => report::pcc_csv(&results, out),
        Format::Json => report::pcc_json(&results, out),
    })?;
    for (i, r) in results.iter().enumerate() {
        println!("pose {i}: tip residual {} mm", f3(r.tip_residual));
    }
    println!("report: {}", path.display());
    flag(results.iter().filter(|r| !r.converged).count());
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    let spec = load_spec(cli.spec.as_deref())?;
    match &cli.command {
        Command::Fk(a) => fk(&spec, a),
        Command::Equilibrium(a) => equilibrium(&spec, a),
        Command::Stability(a) => stability(&spec, a),
        Command::Load(a) => load(&spec, a),
        Command::Workspace(a) => workspace(&spec, a),
        Command::PccCheck(a) => pcc_check(&spec, a),
        Command::Spec => {
            print!("{}", beadjam_core::to_canonical(&spec));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run(cli)),
            Err(e) => Err(Failure::usage(e.to_string())),
        },
        None => run(cli),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
