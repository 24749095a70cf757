//! The `meshfit` command-line front-end: one subcommand per pipeline stage,
//! each writing its outputs plus a JSON run manifest.

mod commands;
mod manifest;
mod plot;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

pub use manifest::RunManifest;
pub use plot::line_plot_svg;

use crate::deform::{DeformError, EnergyKind};
use crate::energies::EnergyError;
use crate::fitting::{FitError, MapUpdate, Optimizer};
use crate::mesh::MeshError;
use crate::quality::QualityError;
use crate::temporal::{SplineKind, TemporalError};

pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_DIVERGED: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Solver(String),
    #[error("{0}")]
    Diverged(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => EXIT_VALIDATION,
            Self::Solver(_) => EXIT_SOLVER,
            Self::Diverged(_) => EXIT_DIVERGED,
        }
    }

    pub(crate) fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        Self::Validation(format!("{}: {e}", path.display()))
    }
}

impl From<MeshError> for CliError {
    fn from(e: MeshError) -> Self {
        Self::Validation(e.to_string())
    }
}

impl From<DeformError> for CliError {
    fn from(e: DeformError) -> Self {
        match e {
            DeformError::Singular(_) | DeformError::ComponentWithoutHandle { .. } => Self::Solver(e.to_string()),
            _ => Self::Validation(e.to_string()),
        }
    }
}

impl From<EnergyError> for CliError {
    fn from(e: EnergyError) -> Self {
        Self::Validation(e.to_string())
    }
}

impl From<QualityError> for CliError {
    fn from(e: QualityError) -> Self {
        Self::Validation(e.to_string())
    }
}

impl From<TemporalError> for CliError {
    fn from(e: TemporalError) -> Self {
        match e {
            TemporalError::Singular => Self::Solver(e.to_string()),
            _ => Self::Validation(e.to_string()),
        }
    }
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        match e {
            FitError::Diverged { .. } => Self::Diverged(e.to_string()),
            FitError::Deform(d) => d.into(),
            _ => Self::Validation(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "meshfit", version, about = "Template-based surface fitting with biharmonic handle deformation")]
pub struct Cli {
    /// Seed for every random choice (handle starts, surface samples).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to all cores. Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample handles and write the biharmonic map as BHC1.
    Precompute(PrecomputeArgs),
    /// Fit a tagged template to a target surface.
    Fit(FitArgs),
    /// Write a mesh-quality report, optionally against a reference.
    Evaluate(EvaluateArgs),
    /// Spline a frame sequence to a finer time step.
    Interpolate(InterpolateArgs),
    /// Deform a template with handle positions through a stored map.
    Deform(DeformArgs),
    /// Write farthest-point handle indices and positions.
    SampleHandles(SampleHandlesArgs),
    /// Carry a stored map over to another template surface.
    Transfer(TransferArgs),
}

#[derive(Debug, Args)]
pub struct PrecomputeArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    #[arg(long)]
    pub tags: Option<PathBuf>,
    #[arg(long)]
    pub handles_count: usize,
    #[arg(long, default_value = "cotan")]
    pub energy: EnergyKind,
    /// First handle vertex; derived from the seed when absent.
    #[arg(long)]
    pub start: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub template: PathBuf,
    #[arg(long)]
    pub tags: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    /// Structure tags of the target; defaults to the template tags when the
    /// face counts agree, else the target is the template's only structure.
    #[arg(long)]
    pub target_tags: Option<PathBuf>,
    /// TOML file with `[fit]` and `[loss]` tables.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub schedule: Option<Vec<usize>>,
    #[arg(long)]
    pub iters_per_block: Option<usize>,
    #[arg(long)]
    pub step_size: Option<f64>,
    #[arg(long, value_parser = parse_optimizer)]
    pub optimizer: Option<Optimizer>,
    #[arg(long)]
    pub energy: Option<EnergyKind>,
    #[arg(long, value_parser = parse_map_update)]
    pub map_update: Option<MapUpdate>,
    /// Target samples per structure.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Draw target points as surface samples or take the target vertices.
    #[arg(long, value_enum, default_value_t = TargetPoints::Surface)]
    pub target_points: TargetPoints,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub inlet_weight: Option<f64>,
    /// Voxel spacing for the Dice entry of the quality report.
    #[arg(long)]
    pub spacing: Option<f64>,
    /// Also write `loss.svg`.
    #[arg(long)]
    pub plot: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetPoints {
    Surface,
    Vertices,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    #[arg(long)]
    pub tags: Option<PathBuf>,
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Voxel spacing for Dice; requires closed meshes.
    #[arg(long)]
    pub spacing: Option<f64>,
    #[arg(long, default_value_t = 20_000)]
    pub samples: usize,
    /// Also report the centroid-axis orthogonality variant.
    #[arg(long)]
    pub centroid_cwo: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct InterpolateArgs {
    #[arg(long)]
    pub frames_dir: PathBuf,
    #[arg(long)]
    pub dt: f64,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// End conditions for aperiodic sequences.
    #[arg(long, default_value = "natural", value_parser = parse_spline_kind)]
    pub kind: SplineKind,
    /// Tags of the frame connectivity, for a per-structure volume trace.
    #[arg(long, requires = "structure")]
    pub tags: Option<PathBuf>,
    #[arg(long, requires = "tags")]
    pub structure: Option<String>,
    /// Also write `volume.svg`.
    #[arg(long)]
    pub plot: bool,
}

#[derive(Debug, Args)]
pub struct DeformArgs {
    #[arg(long)]
    pub map: PathBuf,
    /// Rest surface the map rows belong to.
    #[arg(long)]
    pub template: PathBuf,
    /// Surface whose vertices give the rest handle positions; defaults to
    /// the template. Needed after `transfer`.
    #[arg(long)]
    pub rest: Option<PathBuf>,
    /// JSON `{"indices": [...], "positions": [[x, y, z], ...]}`.
    #[arg(long)]
    pub handles: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SampleHandlesArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    #[arg(long)]
    pub count: usize,
    #[arg(long)]
    pub start: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TransferArgs {
    #[arg(long)]
    pub map: PathBuf,
    #[arg(long)]
    pub source: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

fn snake_enum<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_"))).map_err(|e| e.to_string())
}

fn parse_optimizer(s: &str) -> Result<Optimizer, String> {
    match s {
        "adam" => Ok(Optimizer::AdaptiveMoments),
        "momentum" | "gd" => Ok(Optimizer::GradientDescentMomentum),
        _ => snake_enum(s),
    }
}

fn parse_map_update(s: &str) -> Result<MapUpdate, String> {
    snake_enum(s)
}

fn parse_spline_kind(s: &str) -> Result<SplineKind, String> {
    snake_enum(s)
}

/// Parse `args`, run the command and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { 0 };
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    let result = match cli.threads {
        Some(0) => Err(CliError::Validation("--threads must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Validation(e.to_string()))
            .and_then(|pool| pool.install(|| commands::dispatch(&cli))),
        None => commands::dispatch(&cli),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
