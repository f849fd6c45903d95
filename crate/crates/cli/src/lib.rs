//! Batch commands behind the `graspkit` binary.
//!
//! Every command is a plain function returning a summary or a [`CliError`]
//! that carries the process exit code:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | internal error |
//! | 2 | unreadable or malformed input, bad flags |
//! | 3 | degenerate input (nothing to measure) |
//! | 4 | ids do not line up across files |
//! | 5 | a requested target is not in the scene |

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

pub mod commands;

pub use commands::{cmd_eval, cmd_prune, cmd_qa, cmd_split, cmd_tokens, cmd_validate};

pub const EXIT_INTERNAL: u8 = 1;
pub const EXIT_FORMAT: u8 = 2;
pub const EXIT_DEGENERATE: u8 = 3;
pub const EXIT_ID_MISMATCH: u8 = 4;
pub const EXIT_UNKNOWN_TARGET: u8 = 5;

/// Environment variable that caps the worker pool size.
pub const THREADS_ENV: &str = "GRASPKIT_THREADS";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<graspkit::Error> for CliError {
    fn from(e: graspkit::Error) -> Self {
        use graspkit::Error as E;
        let code = match &e {
            E::Format { .. }
            | E::Io { .. }
            | E::Parse { .. }
            | E::UnknownDescriptor { .. }
            | E::Validation(_)
            | E::Range { .. }
            | E::Dimension(_)
            | E::DuplicateId(_)
            | E::MissingConfidence
            | E::Encoding(_) => EXIT_FORMAT,
            E::DegenerateScene(_) | E::EmptyPrediction | E::EmptyGroundTruth => EXIT_DEGENERATE,
            E::EmptyTargets => EXIT_UNKNOWN_TARGET,
            _ => EXIT_INTERNAL,
        };
        CliError::new(code, e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub(crate) fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::new(EXIT_FORMAT, format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::new(EXIT_FORMAT, format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeArg {
    Uniform,
    Top,
}

impl From<ModeArg> for graspkit::dataset::SelectionMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Uniform => graspkit::dataset::SelectionMode::Uniform,
            ModeArg::Top => graspkit::dataset::SelectionMode::TopConfidence,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "graspkit", version, about = "Grasp dataset processing and evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a scene from virtual views and write 3D visual tokens.
    Tokens(TokensArgs),
    /// Cap grasp labels per object with farthest-point sampling.
    Prune(PruneArgs),
    /// Score predictions against annotations, scene by scene.
    Eval(EvalArgs),
    /// Write the CoT QA records and the instruction prompt for a scene.
    Qa(QaArgs),
    /// Check that instructions do not name their targets.
    Validate(ValidateArgs),
    /// Split scene ids into train and eval sets.
    Split(SplitArgs),
}

#[derive(Debug, Clone, Args)]
pub struct TokensArgs {
    /// Scene point cloud (`.ply`).
    pub scene: PathBuf,
    /// Output token file (JSON Lines).
    #[arg(short, long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = graspkit::view::DEFAULT_VIEWS)]
    pub views: usize,
    /// Square image side in pixels.
    #[arg(long, default_value_t = graspkit::view::DEFAULT_RESOLUTION)]
    pub resolution: usize,
    #[arg(long, default_value_t = graspkit::view::DEFAULT_PATCH_SIZE)]
    pub patch: usize,
    /// Voxel edge for pooling; defaults to the scene diagonal / 32.
    #[arg(long)]
    pub voxel: Option<f64>,
    /// Splat footprint in pixels (odd).
    #[arg(long, default_value_t = graspkit::view::DEFAULT_SPLAT_PX)]
    pub splat: usize,
}

#[derive(Debug, Clone, Args)]
pub struct PruneArgs {
    /// Annotation file (`.anno.jsonl`).
    pub anno: PathBuf,
    #[arg(short, long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = graspkit::pruning::DEFAULT_CAP)]
    pub cap: usize,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Prediction file (`.pred.jsonl`).
    #[arg(long)]
    pub pred: PathBuf,
    /// Annotation file (`.anno.jsonl`).
    #[arg(long)]
    pub anno: PathBuf,
    /// Directory holding `<scene_id>.ply` and `<scene_id>.meta.json`.
    #[arg(long)]
    pub scenes: PathBuf,
    /// Report path; printed to stdout when omitted.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    /// Comma-separated coverage thresholds.
    #[arg(long, value_delimiter = ',', default_values_t = [0.4, 0.3, 0.2])]
    pub thresholds: Vec<f64>,
    #[arg(long, value_enum, default_value_t = ModeArg::Top)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = graspkit::dataset::DEFAULT_CANDIDATES)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Include the width term in pose distances.
    #[arg(long)]
    pub include_width: bool,
}

#[derive(Debug, Clone, Args)]
pub struct QaArgs {
    /// Scene metadata (`.meta.json`).
    pub meta: PathBuf,
    /// Comma-separated target categories.
    #[arg(long, value_delimiter = ',', required = true)]
    pub targets: Vec<String>,
    /// Output directory for `<scene_id>.qa.jsonl` and `<scene_id>.prompt.txt`.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Descriptor library (JSON); the built-in one when omitted.
    #[arg(long)]
    pub library: Option<PathBuf>,
    /// Model answers, one line per QA record, to parse back into slots.
    #[arg(long)]
    pub answers: Option<PathBuf>,
    /// Reject descriptors that are not in the library.
    #[arg(long)]
    pub strict_descriptors: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    /// Instruction file (JSON Lines).
    pub instructions: PathBuf,
    /// Scene metadata (`.meta.json`).
    #[arg(long)]
    pub meta: PathBuf,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SplitArgs {
    /// Directory of `*.meta.json` files; scene ids are read from them.
    pub scenes: PathBuf,
    #[arg(short, long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = graspkit::dataset::DEFAULT_TRAIN_RATIO)]
    pub ratio: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Runs one parsed command, printing its summary to stdout.
pub fn run(cli: Cli) -> CliResult<()> {
    let summary = match cli.command {
        Command::Tokens(a) => cmd_tokens(&a)?.to_string(),
        Command::Prune(a) => cmd_prune(&a)?.to_string(),
        Command::Eval(a) => {
            let report = cmd_eval(&a)?;
            match &a.out {
                Some(_) => report.summary(),
                None => report.to_json(),
            }
        }
        Command::Qa(a) => cmd_qa(&a)?.to_string(),
        Command::Validate(a) => {
            let report = cmd_validate(&a)?;
            match &a.out {
                Some(_) => report.summary(),
                None => report.to_json(),
            }
        }
        Command::Split(a) => cmd_split(&a)?.to_string(),
    };
    print!("{summary}");
    if !summary.ends_with('\n') {
        println!();
    }
    Ok(())
}

/// Worker count from [`THREADS_ENV`], if set.
pub fn threads_from_env() -> CliResult<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::new(
                EXIT_FORMAT,
                format!("{THREADS_ENV} must be a positive integer, got {v:?}"),
            )),
        },
    }
}
