use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use soba_core::association::PairStrategy;
use soba_core::augment::AugmentStrategy;
use soba_core::eval::EvalModes;

#[derive(Debug, Parser)]
#[command(name = "soba", version, about = "Instance shadow detection toolkit")]
pub struct Cli {
    /// Worker threads (default: all cores). Never changes numeric output.
    #[arg(long, global = true, env = "SOBA_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert SOBA COCO-style annotation files into a manifest.
    ImportSoba(ImportArgs),
    /// Check annotation consistency; exits 2 when violations are found.
    Validate(ValidateArgs),
    /// Image, pair and area counts.
    Stats(StatsArgs),
    /// SOAP and association/instance AP of predictions against a manifest.
    Eval(EvalArgs),
    /// Turn raw detections into scored shadow-object triples.
    Pair(PairArgs),
    /// Shadow-aware copy-and-paste augmentation.
    Augment(AugmentArgs),
    /// Finite-difference and reference checks of the loss kernels.
    LossCheck(LossCheckArgs),
    /// Image-plane light direction from shadow-object pairs.
    Light(LightArgs),
    /// Shadow-aware photo editing.
    #[command(subcommand)]
    Edit(EditCommand),
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Write the JSON report here (atomically).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Print the JSON report to stdout instead of the summary.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ImportArgs {
    /// COCO-style instance file with shadow and object categories.
    #[arg(long)]
    pub instances: PathBuf,
    /// Matching association file; without it associations are mask unions.
    #[arg(long)]
    pub associations: Option<PathBuf>,
    /// Replace object masks by association minus shadow.
    #[arg(long)]
    pub derive_objects: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub report: ReportArgs,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// One or more manifests; totals are reported over all of them.
    #[arg(long, required = true, num_args = 1..)]
    pub manifest: Vec<PathBuf>,
    #[command(flatten)]
    pub report: ReportArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Segm,
    Bbox,
    Both,
}

impl From<ModeArg> for EvalModes {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Segm => EvalModes::Segm,
            ModeArg::Bbox => EvalModes::Bbox,
            ModeArg::Both => EvalModes::Both,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PairStrategyArg {
    #[value(alias = "associated_mask")]
    AssociatedMask,
    #[value(alias = "offset_pairing")]
    OffsetPairing,
    #[value(alias = "main_plus_associated")]
    MainPlusAssociated,
}

impl From<PairStrategyArg> for PairStrategy {
    fn from(s: PairStrategyArg) -> Self {
        match s {
            PairStrategyArg::AssociatedMask => PairStrategy::AssociatedMask,
            PairStrategyArg::OffsetPairing => PairStrategy::OffsetPairing,
            PairStrategyArg::MainPlusAssociated => PairStrategy::MainPlusAssociated,
        }
    }
}

fn unit_interval(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} is not in (0, 1)"))
    }
}

fn probability(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is not in [0, 1]"))
    }
}

#[derive(Debug, Args)]
pub struct PairingArgs {
    #[arg(long, value_enum, default_value = "associated-mask")]
    pub strategy: PairStrategyArg,
    #[arg(long, default_value_t = 0.3, value_parser = unit_interval)]
    pub score_threshold: f64,
    #[arg(long, default_value_t = 0.5, value_parser = unit_interval)]
    pub nms_threshold: f64,
    #[arg(long, default_value_t = 0.5, value_parser = unit_interval)]
    pub binarize_threshold: f64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Ground-truth manifest.
    #[arg(long)]
    pub gt: PathBuf,
    /// Predictions: a prediction bundle, a detection bundle (paired first)
    /// or a manifest (replayed as score-1 predictions).
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    pub mode: ModeArg,
    #[command(flatten)]
    pub pairing: PairingArgs,
    #[command(flatten)]
    pub report: ReportArgs,
    /// Same as `--report`.
    #[arg(long, conflicts_with = "report")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PairArgs {
    #[arg(long, visible_alias = "bundle")]
    pub detections: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub pairing: PairingArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AugmentStrategyArg {
    Full,
    #[value(alias = "object_only")]
    ObjectOnly,
    #[value(alias = "above_layering")]
    AboveLayering,
    #[value(alias = "multiple_associations")]
    MultipleAssociations,
}

impl From<AugmentStrategyArg> for AugmentStrategy {
    fn from(s: AugmentStrategyArg) -> Self {
        match s {
            AugmentStrategyArg::Full => AugmentStrategy::Full,
            AugmentStrategyArg::ObjectOnly => AugmentStrategy::ObjectOnly,
            AugmentStrategyArg::AboveLayering => AugmentStrategy::AboveLayering,
            AugmentStrategyArg::MultipleAssociations => AugmentStrategy::MultipleAssociations,
        }
    }
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    /// Input manifest.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Image directory (default: the manifest's directory).
    #[arg(long)]
    pub images: Option<PathBuf>,
    /// Output directory; receives manifest.json and the images.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "full")]
    pub strategy: AugmentStrategyArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.5, value_parser = probability)]
    pub prob: f64,
    #[command(flatten)]
    pub report: ReportArgs,
}

#[derive(Debug, Args)]
pub struct LossCheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub report: ReportArgs,
}

#[derive(Debug, Args)]
pub struct LightArgs {
    /// Prediction bundle or manifest.
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub image_id: u64,
    #[command(flatten)]
    pub report: ReportArgs,
}

#[derive(Debug, Subcommand)]
pub enum EditCommand {
    /// Emit the mask of an object and its shadow for inpainting.
    Remove(RemoveArgs),
    /// Move an object and its shadow into another photo.
    Transfer(TransferArgs),
}

#[derive(Debug, Args)]
pub struct RemoveArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Association id.
    #[arg(long)]
    pub assoc: u64,
    #[arg(long, default_value_t = 0)]
    pub dilate: u32,
    /// Removal mask as PNG (255 = remove).
    #[arg(long)]
    pub out_mask: PathBuf,
    /// Filled image as PNG. Uses `--inpaint-cmd` when given, otherwise a
    /// nearest-colour placeholder fill.
    #[arg(long)]
    pub out_image: Option<PathBuf>,
    /// Command template run through `sh -c`, with `{image}`, `{mask}` and
    /// `{output}` replaced by paths.
    #[arg(long, requires = "out_image")]
    pub inpaint_cmd: Option<String>,
    #[arg(long)]
    pub images: Option<PathBuf>,
    #[command(flatten)]
    pub report: ReportArgs,
}

fn point(s: &str) -> Result<(f64, f64), String> {
    let (x, y) = s.split_once(',').ok_or_else(|| format!("expected x,y, got {s:?}"))?;
    let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
    Ok((parse(x)?, parse(y)?))
}

#[derive(Debug, Args)]
pub struct TransferArgs {
    /// Manifest holding the source association.
    #[arg(long)]
    pub src: PathBuf,
    #[arg(long)]
    pub src_assoc: u64,
    #[arg(long)]
    pub src_images: Option<PathBuf>,
    /// Manifest holding the destination image.
    #[arg(long)]
    pub dst: PathBuf,
    #[arg(long)]
    pub dst_image_id: u64,
    #[arg(long)]
    pub dst_images: Option<PathBuf>,
    /// Destination light angle in degrees, overriding the estimate from
    /// the destination's own pairs.
    #[arg(long)]
    pub dst_light_angle: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    /// Destination position of the object's contact point, `x,y`.
    #[arg(long, value_parser = point, allow_hyphen_values = true)]
    pub at: (f64, f64),
    #[arg(long)]
    pub out_image: PathBuf,
    #[command(flatten)]
    pub report: ReportArgs,
}
