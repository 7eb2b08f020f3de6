//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pointnav_core::perception::ScenarioTag;
use pointnav_core::pipeline::CommandMode;
use pointnav_core::RobotMode;

#[derive(Debug, Parser)]
#[command(name = "pointnav", version, about = "Pointing-gesture robot navigation toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compare forearm, index-finger and eye-finger pointing measures.
    CompareMeasures(CompareArgs),
    /// Run a simulated reach campaign.
    Simulate(SimulateArgs),
    /// Drive the pipeline from a recorded JSON Lines session.
    Replay(ReplayArgs),
    /// Compute IoU, RMSE/MAE and binned error curves from files.
    Metrics(MetricsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Jsonl,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Jsonl => "jsonl",
        }
    }
}

impl std::str::FromStr for OutputFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        <OutputFormat as ValueEnum>::from_str(s, true)
    }
}

/// Flags shared by every subcommand. Values given here override the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Master seed for all random streams.
    #[arg(long)]
    pub seed: Option<u64>,
    /// INI-style configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory for output files (created if missing).
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Format of tabular outputs.
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Simulated trials (each yields one sample per approach).
    #[arg(long)]
    pub trials: Option<usize>,
    /// Distance bin width for the summary, mm.
    #[arg(long)]
    pub bin_mm: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Robot platform: quadruped or rover.
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<RobotMode>,
    /// Number of trials in the campaign.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Perception noise row: nominal or an edge-case tag (gloves, occlusion, ...).
    #[arg(long, value_parser = parse_tag)]
    pub profile: Option<ScenarioTag>,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Session log, one JSON record per line.
    pub log: PathBuf,
    /// Command mode: direct_goal or floor_line.
    #[arg(long, value_parser = parse_command_mode)]
    pub mode: Option<CommandMode>,
    /// Camera mount height above the floor, mm.
    #[arg(long)]
    pub height_mm: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct MetricsArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Two plain PBM masks to compare.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    pub iou: Option<Vec<PathBuf>>,
    /// CSV with columns distance_mm,error.
    #[arg(long)]
    pub series: Option<PathBuf>,
    /// CSV of estimated against true pointing features.
    #[arg(long)]
    pub estimates: Option<PathBuf>,
    /// Distance bin width, mm.
    #[arg(long)]
    pub bin_mm: Option<f64>,
    /// Angle bin width for the polar histograms, degrees.
    #[arg(long)]
    pub bin_deg: Option<f64>,
}

pub fn parse_mode(s: &str) -> Result<RobotMode, String> {
    s.parse()
}

pub fn parse_tag(s: &str) -> Result<ScenarioTag, String> {
    s.parse()
}

pub fn parse_command_mode(s: &str) -> Result<CommandMode, String> {
    match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
        "direct_goal" => Ok(CommandMode::DirectGoal),
        "floor_line" => Ok(CommandMode::FloorLine),
        other => Err(format!("unknown command mode '{other}' (expected direct_goal or floor_line)")),
    }
}
