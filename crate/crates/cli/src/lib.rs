//! Command-line frontend: generate datasets, derive ground truth, run the
//! correlation matcher, evaluate predictions and visualize maps.

pub mod colormap;
mod config;
mod estimate;
mod evaluate;
mod generate;
mod inspect;
mod visualize;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

pub use config::{config_path_for_file, write_json};

#[derive(Debug, Parser)]
#[command(
    name = "sfgen",
    version,
    about = "Synthetic stereo video with scene-flow ground truth"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Flyingthings,
    Driving,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FilterArg {
    Nearest,
    Bilinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MapKind {
    /// `.flo` files are flow, `.pfm` files are disparity.
    Auto,
    Flow,
    Disparity,
    Dispchange,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    All,
    Epe,
    D1all,
}

/// `W x H` image size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Size {
    pub width: u32,
    pub height: u32,
}

impl std::str::FromStr for Size {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (w, h) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("expected WxH, got {s:?}"))?;
        let parse = |v: &str| v.trim().parse::<u32>().map_err(|e| format!("{v:?}: {e}"));
        let size = Size {
            width: parse(w)?,
            height: parse(h)?,
        };
        if size.width == 0 || size.height == 0 {
            return Err(format!("size {s:?} must be positive"));
        }
        Ok(size)
    }
}

#[derive(Debug, Clone, clap::Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum, default_value = "flyingthings")]
    pub preset: Preset,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub frames: u32,
    #[arg(long, default_value = "960x540")]
    pub size: Size,
    /// Output directory; the scene is written to `OUT/{scene name}`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 35.0)]
    pub focal_mm: f64,
    #[arg(long, default_value_t = 32.0)]
    pub sensor_mm: f64,
    #[arg(long, default_value_t = 1.0)]
    pub baseline: f64,
    /// Fixed count of moving objects (foreground objects or oncoming cars).
    #[arg(long)]
    pub objects: Option<u32>,
    /// Count of static background objects (parked cars for driving).
    #[arg(long)]
    pub background: Option<u32>,
    #[arg(long, value_enum, default_value = "train")]
    pub split: SplitArg,
    /// Directory of extra `.obj` meshes and `.ppm` textures.
    #[arg(long)]
    pub assets_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "nearest")]
    pub texture_filter: FilterArg,
    /// Render passes only; run `derive` later for the ground truth.
    #[arg(long)]
    pub no_groundtruth: bool,
    /// Resolve, log and print the configuration without rendering.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Clone, clap::Args)]
pub struct DeriveArgs {
    /// Scene directory holding `manifest.json`.
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long, default_value_t = 1.5)]
    pub min_flow_difference: f64,
    #[arg(long, default_value_t = 10)]
    pub min_area: usize,
}

#[derive(Debug, Clone, clap::Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub left: PathBuf,
    #[arg(long)]
    pub right: PathBuf,
    /// Output disparity map (`.pfm`).
    #[arg(long)]
    pub out: PathBuf,
    /// Number of disparity hypotheses, clamped to the image width.
    #[arg(long, default_value_t = 160)]
    pub max_disp: usize,
    #[arg(long, default_value_t = 1)]
    pub radius: usize,
    /// Skip the unit-length scaling of patch features.
    #[arg(long)]
    pub no_normalize: bool,
    /// Output integer winner-take-all disparities.
    #[arg(long)]
    pub no_refine: bool,
    /// Optional confidence map (`.pfm`).
    #[arg(long)]
    pub confidence: Option<PathBuf>,
}

#[derive(Debug, Clone, clap::Args)]
pub struct EvaluateArgs {
    /// Predicted maps, paired in order with `--gt`.
    #[arg(long, required = true, num_args = 1..)]
    pub pred: Vec<PathBuf>,
    #[arg(long, required = true, num_args = 1..)]
    pub gt: Vec<PathBuf>,
    /// Occlusion masks (`.pgm`), one per pair; adds non-occluded columns.
    #[arg(long, num_args = 1..)]
    pub occlusion: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "auto")]
    pub kind: MapKind,
    #[arg(long, value_enum, default_value = "all")]
    pub metric: MetricArg,
    #[arg(long, default_value = "pred")]
    pub method: String,
    #[arg(long, default_value = "data")]
    pub dataset: String,
    /// JSON report path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, clap::Args)]
pub struct VisualizeArgs {
    /// `.flo` flow or single-channel `.pfm` map.
    #[arg(long)]
    pub input: PathBuf,
    /// Output image (`.ppm`).
    #[arg(long)]
    pub out: PathBuf,
    /// Flow magnitude shown at full saturation; defaults to the largest finite magnitude.
    #[arg(long)]
    pub max_flow: Option<f64>,
    /// Value shown at full intensity; defaults to the largest finite absolute value.
    #[arg(long)]
    pub max_disp: Option<f64>,
    /// Map `[-max, max]` instead of `[0, max]` (disparity change).
    #[arg(long)]
    pub signed: bool,
}

#[derive(Debug, Clone, clap::Args)]
pub struct InspectArgs {
    /// Scene directory or a single map file.
    pub path: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate, render and annotate a seeded scene.
    Generate(GenerateArgs),
    /// Derive ground truth from stored render passes.
    Derive(DeriveArgs),
    /// Estimate disparity with the correlation matcher.
    Estimate(EstimateArgs),
    /// Score predictions against ground truth.
    Evaluate(EvaluateArgs),
    /// Color-code a flow or disparity map.
    Visualize(VisualizeArgs),
    /// Summarize and validate a scene directory or a map file.
    Inspect(InspectArgs),
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Generate(a) => generate::run(&a),
        Command::Derive(a) => generate::run_derive(&a),
        Command::Estimate(a) => estimate::run(&a),
        Command::Evaluate(a) => evaluate::run(&a),
        Command::Visualize(a) => visualize::run(&a),
        Command::Inspect(a) => inspect::run(&a),
    }
}

/// Worker count from `SFGEN_THREADS`; `None` when unset.
pub fn threads_from_env() -> anyhow::Result<Option<usize>> {
    match std::env::var("SFGEN_THREADS") {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .map_err(|e| anyhow::anyhow!("cli: SFGEN_THREADS={v:?}: {e}"))?;
            anyhow::ensure!(n > 0, "cli: SFGEN_THREADS must be positive");
            Ok(Some(n))
        }
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(anyhow::anyhow!("cli: SFGEN_THREADS: {e}")),
    }
}
