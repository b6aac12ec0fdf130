//! Command-line front end: dataset preparation, sampling, reconstruction,
//! training, evaluation and figures.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

pub use commands::run;

#[derive(Debug, Parser)]
#[command(name = "ckm", version, about = "Channel knowledge map reconstruction by super-resolution")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Seed for every random choice the command makes.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Codec name (radiomapseer_pathloss, ckmimagenet_pathloss, ckmimagenet_aoa).
    /// Defaults to the manifest's codec where a manifest is given.
    #[arg(long, global = true)]
    pub codec: Option<String>,
    /// Super-resolution factor k; measurements keep 1/k^2 of the cells.
    #[arg(long, global = true, default_value_t = 4)]
    pub factor: usize,
}

fn parse_phase(s: &str) -> Result<(usize, usize), String> {
    let (r, c) = s.split_once(',').ok_or("expected ROW,COL")?;
    let num = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("`{t}`: {e}"));
    Ok((num(r)?, num(c)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Nearest,
    Bicubic,
    Srresnet,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Nearest => "nearest",
            Method::Bicubic => "bicubic",
            Method::Srresnet => "srresnet",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LayoutArg {
    RadiomapseerDpm,
    CkmimagenetPathloss,
    CkmimagenetAoa,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DisjointnessArg {
    Transmitter,
    Scene,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// 3 input channels, 16 residual blocks, 64 features.
    Reference,
    /// 1 input channel, 5 residual blocks, 64 features.
    Economy,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Scan a public dataset directory into a manifest.
    Ingest {
        #[arg(long)]
        root: PathBuf,
        #[arg(long, value_enum)]
        layout: LayoutArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Assign train/test tags to a manifest.
    Split {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        train: usize,
        #[arg(long)]
        test: usize,
        #[arg(long, value_enum, default_value = "transmitter")]
        disjoint: DisjointnessArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic path-loss / AoA dataset with manifests.
    GenerateSynthetic {
        #[arg(long, default_value_t = 24)]
        scenes: usize,
        #[arg(long, default_value_t = 10)]
        transmitters: usize,
        /// Map side length in cells.
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long, default_value_t = 8)]
        buildings: usize,
        #[arg(long, default_value_t = 3.0)]
        exponent: f64,
        #[arg(long, default_value_t = -50.0, allow_hyphen_values = true)]
        reference_loss: f64,
        #[arg(long, default_value_t = 10.0)]
        wall_loss: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Keep every k-th cell of each image.
    Downsample {
        #[arg(long, required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        /// Sampling phase as ROW,COL (each below k).
        #[arg(long, value_parser = parse_phase, default_value = "0,0")]
        phase: (usize, usize),
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct k-times larger maps from low-resolution images.
    Upsample {
        #[arg(long, required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "bicubic")]
        method: Method,
        /// Model checkpoint, required for srresnet.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train an SRResNet on the manifest's train split.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        iterations: usize,
        #[arg(long, default_value_t = 32)]
        batch_size: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        #[arg(long, value_enum, default_value = "reference")]
        preset: Preset,
        #[arg(long)]
        blocks: Option<usize>,
        /// Save an intermediate checkpoint every this many updates.
        #[arg(long)]
        checkpoint_every: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score reconstructed images against ground truth, matched by file name.
    Evaluate {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        reconstructed: PathBuf,
        /// Leave building cells out of the physical RMSE.
        #[arg(long)]
        mask_buildings: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Downsample every test map, reconstruct with each method and tabulate metrics.
    Compare {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "nearest,bicubic")]
        methods: Vec<Method>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        mask_buildings: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Physical RMSE of each method across several factors.
    Sweep {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "2,4,8,16")]
        factors: Vec<usize>,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "nearest,bicubic")]
        methods: Vec<Method>,
        /// FACTOR=PATH model checkpoints for srresnet, one per factor.
        #[arg(long = "checkpoint")]
        checkpoints: Vec<String>,
        #[arg(long)]
        mask_buildings: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Side-by-side figure: nearest-upsampled input, reconstructions, ground truth.
    Montage {
        #[arg(long)]
        truth: PathBuf,
        /// LABEL=PATH reconstructed image, repeatable.
        #[arg(long = "panel")]
        panels: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
}
