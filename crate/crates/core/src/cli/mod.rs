//! Command-line front end. Every run writes its artifacts plus a
//! `manifest.json` entry into the output directory.

mod commands;
mod manifest;
mod report;
mod svg;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::anfis::AnfisError;
use crate::feeder_model::FeederError;
use crate::pmu_placement::{Channels, PlacementError};
use crate::power_flow::PowerFlowError;
use crate::state_estimation::EstimationError;
use crate::upfc_control::UpfcError;

pub use manifest::{Manifest, ManifestEntry, MANIFEST_FILE};

#[derive(Debug, Parser, Serialize)]
#[command(
    name = "feederlab",
    version,
    about = "Distribution feeder power flow, PMU placement and state estimation"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct Global {
    /// Directory holding the feeder CSV tables.
    #[arg(long, global = true, value_name = "DIR")]
    pub feeder: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Convergence tolerance in per-unit.
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,
    #[arg(long = "max-iter", global = true)]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Parse the feeder and report topology findings.
    Validate,
    /// Forward/backward sweep power flow.
    Powerflow,
    /// Place PMUs and partition the feeder into zones.
    PlacePmu(PlaceArgs),
    /// Generate measurements from the power-flow solution.
    SimulateMeasurements(SimulateArgs),
    /// Estimate bus voltages from measurements.
    Estimate(EstimateArgs),
    /// Reference, compensation and power-balance simulation.
    UpfcSim(UpfcArgs),
    /// Train the dc-voltage ANFIS estimator.
    AnfisTrain(AnfisArgs),
    /// Summarize a run directory into tables and plots.
    Report(ReportArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Powerflow => "powerflow",
            Command::PlacePmu(_) => "place-pmu",
            Command::SimulateMeasurements(_) => "simulate-measurements",
            Command::Estimate(_) => "estimate",
            Command::UpfcSim(_) => "upfc-sim",
            Command::AnfisTrain(_) => "anfis-train",
            Command::Report(_) => "report",
        }
    }
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct PlaceArgs {
    /// Current channels per PMU, a count or `inf`.
    #[arg(long, default_value = "3")]
    pub channels: Channels,
    #[arg(long = "max-zone-size")]
    pub max_zone_size: Option<usize>,
    /// Exhaustive minimum placement (small networks only).
    #[arg(long)]
    pub oracle: bool,
    /// Use the zero-injection observability rule.
    #[arg(long = "zero-injection")]
    pub zero_injection: bool,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// Placement file; defaults to placement.json in the output directory.
    #[arg(long)]
    pub placement: Option<PathBuf>,
    #[arg(long = "sigma-v", default_value_t = 0.001)]
    pub sigma_v: f64,
    #[arg(long = "sigma-i", default_value_t = 0.002)]
    pub sigma_i: f64,
    /// Fraction of the rated per-phase load.
    #[arg(long = "sigma-pseudo", default_value_t = 0.1)]
    pub sigma_pseudo: f64,
    /// Write exact values; sigmas still set the weights.
    #[arg(long = "noise-free")]
    pub noise_free: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateMode {
    #[default]
    Parallel,
    Monolithic,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct EstimateArgs {
    /// Placement file; defaults to placement.json in the output directory.
    #[arg(long)]
    pub placement: Option<PathBuf>,
    /// Measurements file; defaults to measurements.csv in the output directory.
    #[arg(long)]
    pub measurements: Option<PathBuf>,
    #[arg(long, conflicts_with = "monolithic")]
    pub parallel: bool,
    #[arg(long)]
    pub monolithic: bool,
    /// Worker threads for zone solves.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Start Gauss-Newton from a flat profile instead of the phasor-only solve.
    #[arg(long = "flat-start")]
    pub flat_start: bool,
}

impl EstimateArgs {
    pub fn mode(&self) -> EstimateMode {
        if self.monolithic {
            EstimateMode::Monolithic
        } else {
            EstimateMode::Parallel
        }
    }
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct UpfcArgs {
    /// Scenario JSON.
    #[arg(long)]
    pub scenario: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WiringArg {
    Grid,
    Paired,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct AnfisArgs {
    /// Training CSV with columns x,y,target.
    #[arg(long)]
    pub data: PathBuf,
    /// Membership functions per input.
    #[arg(long, default_value_t = 2)]
    pub mfs: usize,
    #[arg(long, value_enum, default_value = "grid")]
    pub wiring: WiringArg,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long = "learn-rate", default_value_t = 0.01)]
    pub learn_rate: f64,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct ReportArgs {
    /// Run directory; defaults to the output directory.
    #[arg(long)]
    pub run: Option<PathBuf>,
}

/// Failure of one run, classified by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments, missing or malformed input files.
    #[error("{0}")]
    Input(String),
    /// The inputs are well formed but the computation cannot proceed.
    #[error("{0}")]
    Domain(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Domain(_) => 1,
        }
    }
}

impl From<FeederError> for CliError {
    fn from(e: FeederError) -> Self {
        match e {
            FeederError::TransformerConfigPassed(_)
            | FeederError::MergeCreatesCycle { .. }
            | FeederError::Topology(_) => CliError::Domain(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<PowerFlowError> for CliError {
    fn from(e: PowerFlowError) -> Self {
        match e {
            PowerFlowError::Feeder(f) => f.into(),
            other => CliError::Domain(other.to_string()),
        }
    }
}

impl From<PlacementError> for CliError {
    fn from(e: PlacementError) -> Self {
        match e {
            PlacementError::Feeder(f) => f.into(),
            PlacementError::BadFile(_) => CliError::Input(e.to_string()),
            other => CliError::Domain(other.to_string()),
        }
    }
}

impl From<EstimationError> for CliError {
    fn from(e: EstimationError) -> Self {
        match e {
            EstimationError::Feeder(f) => f.into(),
            EstimationError::Placement(p) => p.into(),
            EstimationError::Parse { .. } => CliError::Input(e.to_string()),
            other => CliError::Domain(other.to_string()),
        }
    }
}

impl From<AnfisError> for CliError {
    fn from(e: AnfisError) -> Self {
        match e {
            AnfisError::Parse { .. } => CliError::Input(e.to_string()),
            other => CliError::Domain(other.to_string()),
        }
    }
}

impl From<UpfcError> for CliError {
    fn from(e: UpfcError) -> Self {
        match e {
            UpfcError::BadScenario(_) => CliError::Input(e.to_string()),
            other => CliError::Domain(other.to_string()),
        }
    }
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code. Diagnostics go to stderr as single lines.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match commands::execute(&cli) {
        Ok(warnings) => {
            for w in warnings {
                eprintln!("warning: {w}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
