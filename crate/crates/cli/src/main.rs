// Guards are written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Event-based Mueller-matrix ellipsometry: simulation, calibration,
/// reconstruction and analysis.
#[derive(Debug, Parser)]
#[command(name = "ellipsometer", version, about)]
struct Cli {
    /// Worker threads for the compute stages (0 = all cores).
    #[arg(long, global = true, env = "ELLIPSOMETER_THREADS", default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a scene description into an event file plus ground truth.
    Simulate(SimulateArgs),
    /// Simulate linear-ramp stimuli for contrast-threshold calibration.
    SimulateRamps(SimulateRampsArgs),
    /// Fit contrast thresholds or plate offsets.
    Calibrate {
        #[command(subcommand)]
        mode: CalibrateMode,
    },
    /// Reconstruct a Mueller-matrix video from events.
    Reconstruct(ReconstructArgs),
    /// Write decomposition maps and Mueller mosaics of a video.
    Decompose(DecomposeArgs),
    /// Compare a reconstructed video against ground truth.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scene description (JSON).
    pub scene: PathBuf,
    /// Output event file.
    #[arg(short, long)]
    pub out: PathBuf,
    /// Ground-truth video; defaults to the output path with `.truth.emmv`.
    #[arg(long)]
    pub ground_truth: Option<PathBuf>,
    /// Also write the sensor's true calibration here.
    #[arg(long)]
    pub calibration_out: Option<PathBuf>,
    /// Record the offset-calibration target (depolarizer α behind a
    /// quarter-wave plate at 45°) instead of the scene regions.
    #[arg(long, value_name = "ALPHA")]
    pub reference: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateRampsArgs {
    #[arg(short, long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub width: u16,
    #[arg(long, default_value_t = 4)]
    pub height: u16,
    #[arg(long, default_value_t = 0.14)]
    pub c_on: f64,
    #[arg(long, default_value_t = 0.19)]
    pub c_off: f64,
    /// Refractory period in seconds.
    #[arg(long, default_value_t = 2e-6)]
    pub refractory: f64,
    /// Ratio between the brightest and darkest level of each ramp.
    #[arg(long, default_value_t = 20.0)]
    pub ratio: f64,
    /// Duration of a single ramp in seconds.
    #[arg(long, default_value_t = 0.05)]
    pub duration: f64,
    /// Number of up/down ramp pairs.
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    /// Simulation step in seconds.
    #[arg(long, default_value_t = 1e-7)]
    pub step: f64,
    /// Keep sub-microsecond timestamps in memory before writing.
    #[arg(long)]
    pub no_quantize: bool,
}

#[derive(Debug, Subcommand)]
enum CalibrateMode {
    /// Per-pixel contrast thresholds from ramp recordings.
    Threshold(ThresholdArgs),
    /// Plate offsets from a reference-target recording.
    Offsets(OffsetsArgs),
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    /// Ramp recordings.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(short, long)]
    pub out: PathBuf,
    /// Existing calibration whose plate offsets are kept.
    #[arg(long)]
    pub base: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OffsetsArgs {
    /// Reference recording.
    pub input: PathBuf,
    /// Calibration providing thresholds and refractory period.
    #[arg(long)]
    pub calibration: PathBuf,
    #[arg(short, long)]
    pub out: PathBuf,
    /// Grid spacing in degrees.
    #[arg(long, default_value_t = 0.5)]
    pub grid_step: f64,
    /// Upper bound on pooled intervals.
    #[arg(long, default_value_t = 4096)]
    pub max_samples: usize,
    /// Skip the golden-section polish of the best cell.
    #[arg(long)]
    pub no_refine: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AnchorArg {
    Midpoint,
    EventStart,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum WeightingArg {
    Residual,
    L1,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    /// Event file.
    pub events: PathBuf,
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    /// Output video.
    #[arg(short, long)]
    pub out: PathBuf,
    /// Also write the per-pixel stage output.
    #[arg(long)]
    pub initial_out: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub irls_iters: usize,
    /// Row reweighting rule of the per-pixel stage.
    #[arg(long, value_enum, default_value_t = WeightingArg::Residual)]
    pub irls_weighting: WeightingArg,
    #[arg(long, default_value_t = 10)]
    pub prop_iters: usize,
    /// Relative perturbation scale.
    #[arg(long, default_value_t = 0.01)]
    pub sigma: f64,
    /// Floor of the reweighting denominator.
    #[arg(long, default_value_t = 1e-6)]
    pub epsilon: f64,
    /// Minimum constraints per pixel-frame.
    #[arg(long, default_value_t = 16)]
    pub kmin: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Disable neighbour adoption in the refinement stage.
    #[arg(long)]
    pub skip_propagation: bool,
    /// Disable random perturbation in the refinement stage.
    #[arg(long)]
    pub skip_perturbation: bool,
    /// Disable the physical-validity projection.
    #[arg(long)]
    pub skip_cloude: bool,
    /// Time assigned to each inter-event interval.
    #[arg(long, value_enum, default_value_t = AnchorArg::Midpoint)]
    pub anchor: AnchorArg,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    pub video: PathBuf,
    /// Output directory (created if missing).
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    pub video: PathBuf,
    pub ground_truth: PathBuf,
    /// Print a JSON report instead of text.
    #[arg(long)]
    pub json: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("error: could not configure thread pool: {e}");
            return ExitCode::FAILURE;
        }
    }
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::SimulateRamps(a) => commands::simulate_ramps(&a),
        Command::Calibrate { mode } => match mode {
            CalibrateMode::Threshold(a) => commands::calibrate_threshold(&a),
            CalibrateMode::Offsets(a) => commands::calibrate_offsets(&a),
        },
        Command::Reconstruct(a) => commands::reconstruct(&a),
        Command::Decompose(a) => commands::decompose(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
