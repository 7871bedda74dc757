//! `imap`: run scenario batches, benchmark the perception pipeline and export
//! map images.

mod bench;
mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use intensity_map::inflation::InflationMode;

use settings::{RobotChoice, RunConfig};

#[derive(Parser)]
#[command(
    name = "imap",
    version,
    about = "Multi-layer intensity map navigation runner"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a batch of episodes and write trajectories, snapshots and a report.
    Run(RunArgs),
    /// Time the perception pipeline on random clouds of increasing size.
    Bench(BenchArgs),
    /// Run one episode and dump the maps of a single frame.
    Export(ExportArgs),
}

/// Flags shared by every command; each has a config-file field of the same
/// name (dashes become underscores).
#[derive(Args, Debug, Default)]
struct Common {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in scene name (scenario1..4, scenario1_control) or a scene file.
    #[arg(long)]
    scene: Option<String>,
    /// Robot profile: turtlebot or spot.
    #[arg(long)]
    robot: Option<String>,
    /// Inflation mode: adaptive or uniform.
    #[arg(long)]
    inflation: Option<InflationMode>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Classifier threshold as a fraction of the maximum intensity.
    #[arg(long)]
    gamma: Option<f64>,
    /// Inflation kernel edge in cells (odd).
    #[arg(long)]
    kernel_size: Option<usize>,
    /// Half-thickness of the adaptive inflation line in cells.
    #[arg(long)]
    padding: Option<usize>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    episodes: Option<usize>,
    /// Write a plan-map PPM every k frames.
    #[arg(long, value_name = "K")]
    snapshot_every: Option<usize>,
    /// Score each frame against ground truth (slower).
    #[arg(long)]
    f_score: bool,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[command(flatten)]
    common: Common,
    /// Cloud sizes to time.
    #[arg(long, value_delimiter = ',', default_value = "0,1000,10000,30000")]
    points: Vec<usize>,
    /// Timed frames per size, after warm-up.
    #[arg(long, default_value_t = 50)]
    frames: usize,
    #[arg(long, default_value_t = 10)]
    warmup: usize,
}

#[derive(Args, Debug)]
struct ExportArgs {
    #[command(flatten)]
    common: Common,
    /// Frame to dump; the last frame when omitted.
    #[arg(long)]
    frame: Option<usize>,
}

impl Common {
    fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.scene {
            c.scene = Some(v.clone());
        }
        if let Some(v) = &self.robot {
            c.robot = Some(RobotChoice::Named(v.clone()));
        }
        if let Some(v) = self.inflation {
            c.inflation = Some(v);
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = &self.out {
            c.out = v.clone();
        }
        if let Some(v) = self.gamma {
            c.gamma = Some(v);
        }
        if let Some(v) = self.kernel_size {
            c.kernel_size = Some(v);
        }
        if let Some(v) = self.padding {
            c.padding = Some(v);
        }
        Ok(c)
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run(args) => {
            let mut c = args.common.resolve()?;
            if let Some(v) = args.episodes {
                c.episodes = v;
            }
            if let Some(v) = args.snapshot_every {
                c.snapshot_every = Some(v);
            }
            c.f_score |= args.f_score;
            commands::run(&c)
        }
        Command::Bench(args) => {
            let c = args.common.resolve()?;
            bench::bench(&c, &args.points, args.frames, args.warmup)
        }
        Command::Export(args) => {
            let c = args.common.resolve()?;
            commands::export(&c, args.frame)
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
