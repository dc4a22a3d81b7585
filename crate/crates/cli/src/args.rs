use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "pnc",
    version,
    about = "Predictive network control and MaxWeight simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one closed-loop simulation and write its trace.
    Simulate(SimulateArgs),
    /// Classify stability over a grid of arrival rates.
    Sweep(SweepArgs),
    /// Compare average queues of several policies on paired seeds.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// Scenario JSON file, `builtin:generic` or `builtin:natural`.
    #[arg(long)]
    pub scenario: String,

    /// Use alternating high/low arrivals (builtin:natural only).
    #[arg(long)]
    pub alternating: bool,

    /// Shift every arrival schedule by this many slots.
    #[arg(long, default_value_t = 0)]
    pub phase_offset: u64,
}

#[derive(Debug, Args)]
pub struct ConstraintArgs {
    /// Number of hard-constrained prediction steps [default: min(2, horizon)].
    #[arg(long, conflicts_with = "all_hard")]
    pub tau_hard: Option<usize>,

    /// Enforce every prediction step as a hard constraint.
    #[arg(long)]
    pub all_hard: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,

    /// mw, lpnc or qpnc.
    #[arg(long, default_value = "mw")]
    pub policy: String,

    #[arg(long, default_value_t = 1)]
    pub horizon: usize,

    #[command(flatten)]
    pub constraints: ConstraintArgs,

    #[arg(long, default_value_t = 100)]
    pub slots: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Override the mean arrival rate of buffer 1.
    #[arg(long)]
    pub a1: Option<f64>,

    /// Trace CSV destination.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// JSON summary destination.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,

    #[arg(long, default_value = "mw")]
    pub policy: String,

    #[arg(long, default_value_t = 1)]
    pub horizon: usize,

    #[command(flatten)]
    pub constraints: ConstraintArgs,

    /// Buffer-1 rates as `min:max:step`.
    #[arg(long)]
    pub a1: String,

    /// Buffer-2 rates as `min:max:step`.
    #[arg(long, default_value = "0:0:1")]
    pub a2: String,

    /// Arrival weight for the swept buffers
    /// [default: max(scenario weight, ceil(largest swept rate))].
    #[arg(long)]
    pub weight: Option<u32>,

    #[arg(long, default_value_t = 20_000)]
    pub slots: usize,

    /// Number of seeds per grid point (seeds 1..=K).
    #[arg(long, default_value_t = 5)]
    pub seeds: u64,

    /// Region CSV destination (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,

    /// Comma-separated `kind[:horizon]` list, e.g. `mw,qpnc:2,lpnc:3`.
    #[arg(long)]
    pub policies: String,

    #[command(flatten)]
    pub constraints: ConstraintArgs,

    #[arg(long, default_value_t = 2_000)]
    pub slots: usize,

    /// Number of paired seeds (seeds 1..=K).
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,

    /// Summary CSV destination (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}
