//! `facelab` command-line front end. Each subcommand is one pipeline phase;
//! phases communicate only through the workspace directory.

pub mod commands;
pub mod keyvalue;
pub mod workspace;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "facelab", version, about = "Face-swap pipeline on synthetic or prepared footage")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SideArg {
    Src,
    Dst,
}

impl From<SideArg> for workspace::Side {
    fn from(s: SideArg) -> Self {
        match s {
            SideArg::Src => workspace::Side::Src,
            SideArg::Dst => workspace::Side::Dst,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    HalfFace,
    FullFace,
    WholeFace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StructureArg {
    Df,
    Liae,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirectionArg {
    Src2dst,
    Dst2src,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ColorArg {
    None,
    Rct,
    Idt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BlendArg {
    Alpha,
    Poisson,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render one side of a workspace from a procedural identity.
    Synth(SynthArgs),
    /// Smooth landmarks, align faces and write aligned crops with metadata.
    Extract(ExtractArgs),
    /// Train the swap autoencoder on both aligned sides.
    Train(TrainArgs),
    /// Swap faces into the target side's frames.
    Convert(ConvertArgs),
    /// Compare two frame directories.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub identity_seed: u64,
    #[arg(long, default_value_t = 16)]
    pub frames: usize,
    /// Workspace root.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub side: SideArg,
    /// Seed of the head-motion walk (defaults to the identity seed).
    #[arg(long)]
    pub motion_seed: Option<u64>,
    #[arg(long, default_value_t = facelab_core::datasim::FRAME_SIZE)]
    pub size: usize,
    /// Identity parameters as JSON, overriding --identity-seed.
    #[arg(long)]
    pub identity_file: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub workspace: PathBuf,
    #[arg(long, value_enum)]
    pub side: SideArg,
    #[arg(long, value_enum, default_value = "full-face")]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 96)]
    pub size: usize,
    /// Odd temporal window for landmark smoothing; 1 disables it.
    #[arg(long, default_value_t = 1)]
    pub smooth_window: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub workspace: PathBuf,
    #[arg(long, value_enum)]
    pub structure: Option<StructureArg>,
    #[arg(long)]
    pub hd: bool,
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Total iteration count to reach.
    #[arg(long)]
    pub iterations: Option<u64>,
    #[arg(long)]
    pub base_channels: Option<usize>,
    #[arg(long)]
    pub ae_dims: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `key = value` settings; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Continue from the checkpoint in the workspace model directory.
    #[arg(long)]
    pub resume: bool,
    /// Discard an existing model instead of refusing to start.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[arg(long)]
    pub workspace: PathBuf,
    #[arg(long, value_enum)]
    pub direction: Option<DirectionArg>,
    #[arg(long, value_enum)]
    pub color: Option<ColorArg>,
    #[arg(long, value_enum)]
    pub blend: Option<BlendArg>,
    #[arg(long)]
    pub sharpen: Option<f64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub dir_a: PathBuf,
    #[arg(long)]
    pub dir_b: PathBuf,
    /// Frames sampled uniformly per video.
    #[arg(long, default_value_t = 100)]
    pub sample: usize,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

/// Parses `args` and runs the command, returning the process exit code:
/// 0 on success, 1 on runtime errors, 2 on usage errors.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}
