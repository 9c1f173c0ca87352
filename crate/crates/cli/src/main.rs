//! `usrec`: command-line front end for the freehand ultrasound toolkit.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use usrec_core::sim::{Direction, Orientation, Shape};

/// Exit status of a failed command.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags, unreadable or invalid input files.
    Input(String),
    /// Calibration did not converge; the result was still written.
    NonConvergence(String),
    /// The prediction could not be read; a failed report was written.
    PredictionUnreadable(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::NonConvergence(_) => 3,
            Failure::PredictionUnreadable(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::NonConvergence(m) | Failure::PredictionUnreadable(m) => m,
        }
    }
}

impl From<usrec_core::Error> for Failure {
    fn from(e: usrec_core::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "usrec",
    version,
    about = "Trackerless freehand 3D ultrasound: calibration, DDFs, metrics and ranking"
)]
struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic tracked scan.
    Simulate(SimulateArgs),
    /// Solve the pinhead spatial calibration.
    Calibrate(CalibrateArgs),
    /// Compute ground-truth DDFs from tracked poses.
    DdfGt(DdfGtArgs),
    /// Score a predicted DDF file against the ground truth.
    Evaluate(EvaluateArgs),
    /// Build a leaderboard from a directory of metric reports.
    Rank(RankArgs),
    /// Ranking stability, score distributions, correlation and power analysis.
    Stats(StatsArgs),
    /// Export the four frame-corner trajectories of a scan.
    Traj(TrajArgs),
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, value_parser = parse_shape)]
    pub shape: Shape,
    #[arg(long, default_value = "forward", value_parser = parse_direction)]
    pub direction: Direction,
    #[arg(long, default_value = "perpendicular", value_parser = parse_orientation)]
    pub orientation: Orientation,
    #[arg(long)]
    pub length_mm: f64,
    #[arg(long)]
    pub frames: usize,
    /// Arc curvature in 1/mm; 0 picks the default turn for the shape.
    #[arg(long, default_value_t = 0.0)]
    pub curvature: f64,
    #[arg(long, default_value_t = 0.0)]
    pub jitter_trans: f64,
    #[arg(long, default_value_t = 0.0)]
    pub jitter_rot: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output pose file.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the calibration used by the simulator.
    #[arg(long)]
    pub calib_out: Option<PathBuf>,
    /// Also write pinhead observations for that calibration.
    #[arg(long)]
    pub observations_out: Option<PathBuf>,
    #[arg(long, default_value_t = 30)]
    pub observation_count: usize,
    #[arg(long, default_value_t = 0.0)]
    pub pixel_noise: f64,
    /// Also write random landmarks.
    #[arg(long)]
    pub landmarks_out: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub landmarks_per_frame: usize,
    #[arg(long, default_value_t = 640)]
    pub width: u32,
    #[arg(long, default_value_t = 480)]
    pub height: u32,
    /// Also write a corrupted "predicted" pose file.
    #[arg(long)]
    pub pred_out: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    pub pred_sigma_rot: f64,
    #[arg(long, default_value_t = 0.0)]
    pub pred_sigma_trans: f64,
    /// Per-frame translation bias `x,y,z` in mm.
    #[arg(long, value_parser = parse_vec3, default_value = "0,0,0")]
    pub pred_bias: [f64; 3],
    #[arg(long, default_value_t = 1)]
    pub pred_seed: u64,
}

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub observations: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 8)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Use the analytic Jacobian instead of forward differences.
    #[arg(long)]
    pub analytic_jacobian: bool,
}

#[derive(Args, Debug)]
pub struct DdfGtArgs {
    #[arg(long)]
    pub poses: PathBuf,
    #[arg(long)]
    pub calib: PathBuf,
    /// Landmark file; no landmarks when omitted.
    #[arg(long)]
    pub landmarks: Option<PathBuf>,
    #[arg(long)]
    pub width: u32,
    #[arg(long)]
    pub height: u32,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub runtime_s: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "team")]
    pub team: String,
    /// Scan id; defaults to the ground-truth file stem.
    #[arg(long)]
    pub scan: Option<String>,
    #[arg(long, default_value_t = usrec_core::metrics::DEFAULT_RUNTIME_LIMIT)]
    pub time_limit_s: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PolicyArg {
    Keep,
    Fail,
}

#[derive(Args, Debug)]
pub struct RankArgs {
    #[arg(long)]
    pub reports_dir: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "keep")]
    pub overtime_policy: PolicyArg,
    /// Also write per-scan final scores (input for `stats`).
    #[arg(long)]
    pub scores_out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum StatsMode {
    Bootstrap,
    Clt,
    Pearson,
    Power,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum TailArg {
    One,
    Two,
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    #[arg(long, value_enum)]
    pub mode: StatsMode,
    /// Score table (`bootstrap`, `clt`) or two-column pairs (`pearson`).
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// JSON output; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = usrec_core::ranking::DEFAULT_RESAMPLES)]
    pub resamples: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Standardized effect size for `power`.
    #[arg(long)]
    pub effect_size: Option<f64>,
    /// Mean paired difference; with `--sd` gives the effect size.
    #[arg(long)]
    pub mean_diff: Option<f64>,
    #[arg(long)]
    pub sd: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.9)]
    pub power: f64,
    #[arg(long, value_enum, default_value = "one")]
    pub tail: TailArg,
}

#[derive(Args, Debug)]
pub struct TrajArgs {
    #[arg(long)]
    pub poses: PathBuf,
    #[arg(long)]
    pub calib: PathBuf,
    #[arg(long)]
    pub width: u32,
    #[arg(long)]
    pub height: u32,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_shape(s: &str) -> Result<Shape, String> {
    s.parse().map_err(|e: usrec_core::Error| e.to_string())
}

fn parse_direction(s: &str) -> Result<Direction, String> {
    s.parse().map_err(|e: usrec_core::Error| e.to_string())
}

fn parse_orientation(s: &str) -> Result<Orientation, String> {
    s.parse().map_err(|e: usrec_core::Error| e.to_string())
}

fn parse_vec3(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected x,y,z, got '{s}'"));
    }
    let mut out = [0.0; 3];
    for (dst, p) in out.iter_mut().zip(parts) {
        *dst = p.parse().map_err(|_| format!("'{p}' is not a number"))?;
    }
    Ok(out)
}

/// Usage line of the subcommand named on the command line, or of the tool.
fn usage() -> String {
    let mut cmd = Cli::command();
    cmd.build();
    let name = std::env::args()
        .skip(1)
        .find(|a| cmd.find_subcommand(a).is_some());
    match name.and_then(|n| cmd.find_subcommand_mut(&n).map(|c| c.render_usage())) {
        Some(u) => u.to_string(),
        None => cmd.render_usage().to_string(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let _ = e.print();
            eprintln!("\n{}", usage());
            return ExitCode::from(2);
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot configure thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Calibrate(a) => commands::calibrate(&a),
        Command::DdfGt(a) => commands::ddf_gt(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Rank(a) => commands::rank(&a),
        Command::Stats(a) => commands::stats(&a),
        Command::Traj(a) => commands::traj(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
