use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::LevelFilter;
use rdim::bounds::{EpsChoice, RdConfig};
use rdim::io::ReportFormat;
use rdim::network::SketchRule;
use rdim::pipeline::AnalysisConfig;
use rdim::trainer::SyntheticSpec;

#[derive(Parser, Debug)]
#[command(name = "rdim", version, about = "Riemannian Dimension bounds for ReLU networks")]
pub struct Cli {
    /// More log output (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

impl Cli {
    pub fn verbosity(&self) -> LevelFilter {
        match self.verbose {
            0 => LevelFilter::Warn,
            1 => LevelFilter::Info,
            2 => LevelFilter::Debug,
            _ => LevelFilter::Trace,
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Compute the Riemannian Dimension report for a stored model.
    Analyze(AnalyzeArgs),
    /// Tabulate d_R and the one-shot bound over a log-spaced ε grid.
    Sweep(SweepArgs),
    /// Train small networks on synthetic blobs and report along the way.
    TrainDemo(TrainDemoArgs),
    /// Numerical checks of the Grassmannian geometry.
    Geometry {
        #[command(subcommand)]
        command: GeometryCommand,
    },
    /// Subspace-isomorphism certificate between two samples.
    IsoCheck(IsoCheckArgs),
}

#[derive(Subcommand, Debug)]
pub enum GeometryCommand {
    Verify(GeometryArgs),
}

#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// IDX image file (requires --idx-labels).
    #[arg(long, requires = "idx_labels", conflicts_with = "synthetic")]
    pub idx_images: Option<PathBuf>,

    /// IDX label file.
    #[arg(long, requires = "idx_images", conflicts_with = "synthetic")]
    pub idx_labels: Option<PathBuf>,

    /// Synthetic blobs as `n,d0,classes,spread`.
    #[arg(long, value_name = "N,D0,CLASSES,SPREAD")]
    pub synthetic: Option<SyntheticSpec>,
}

#[derive(Args, Debug, Clone)]
pub struct BoundArgs {
    /// Fixed resolution; skips the search.
    #[arg(long)]
    pub eps: Option<f64>,

    #[arg(long, default_value_t = 500)]
    pub eps_steps: usize,

    /// Lipschitz constant of the loss.
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,

    /// Confidence level of the reported concentration term.
    #[arg(long, default_value_t = 0.01)]
    pub delta: f64,

    #[arg(long, default_value_t = 8192)]
    pub sketch_threshold: usize,

    #[arg(long, default_value_t = 8)]
    pub sketch_divisor: usize,

    /// Drop the ½·ln(d·n) terms from d_R.
    #[arg(long)]
    pub no_log_terms: bool,
}

impl BoundArgs {
    pub fn analysis_config(&self) -> AnalysisConfig {
        AnalysisConfig {
            rd: RdConfig {
                beta: self.beta,
                eps: self.eps.map_or(EpsChoice::Auto, EpsChoice::Fixed),
                eps_search_steps: self.eps_steps,
                include_log_terms: !self.no_log_terms,
                delta: self.delta,
                ..RdConfig::default()
            },
            sketch: SketchRule {
                threshold: self.sketch_threshold,
                divisor: self.sketch_divisor,
            },
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Json => ReportFormat::Json,
            Format::Csv => ReportFormat::Csv,
        }
    }
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    /// RDMB bundle with `W1..WL` and a `widths` row.
    #[arg(long)]
    pub model: PathBuf,

    #[command(flatten)]
    pub data: DataArgs,

    #[command(flatten)]
    pub bounds: BoundArgs,

    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,

    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long)]
    pub model: PathBuf,

    #[command(flatten)]
    pub data: DataArgs,

    #[command(flatten)]
    pub bounds: BoundArgs,

    /// Grid points across the search range.
    #[arg(long, default_value_t = 64)]
    pub points: usize,

    #[arg(long)]
    pub out: Option<PathBuf>,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct TrainDemoArgs {
    /// Hidden width; repeat for a sweep.
    #[arg(long = "width", default_values_t = [64])]
    pub widths: Vec<usize>,

    #[arg(long, default_value_t = 4)]
    pub hidden_layers: usize,

    #[arg(long, default_value = "1000,16,2,0.5")]
    pub synthetic: SyntheticSpec,

    #[arg(long, default_value_t = 40)]
    pub epochs: usize,

    /// Snapshot interval in epochs; epoch 0 and the last epoch are always kept.
    #[arg(long, default_value_t = 1)]
    pub snapshot_every: usize,

    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,

    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,

    #[arg(long, default_value_t = 5e-3)]
    pub weight_decay: f64,

    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,

    #[command(flatten)]
    pub bounds: BoundArgs,

    /// Directory for per-snapshot reports, the time series and final models.
    #[arg(long, default_value = "train-demo")]
    pub out_dir: PathBuf,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct GeometryArgs {
    #[arg(long, default_value_t = 4)]
    pub d: usize,

    #[arg(long, default_value_t = 2)]
    pub r: usize,

    #[arg(long, default_value_t = 0.9)]
    pub eps: f64,

    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct IsoCheckArgs {
    #[arg(long)]
    pub model: PathBuf,

    /// The observed sample S.
    #[command(flatten)]
    pub data: DataArgs,

    /// IDX images for the ghost sample S'.
    #[arg(long, requires = "prime_idx_labels", conflicts_with_all = ["prime_synthetic", "halves"])]
    pub prime_idx_images: Option<PathBuf>,

    #[arg(long, requires = "prime_idx_images")]
    pub prime_idx_labels: Option<PathBuf>,

    /// Synthetic spec for S'.
    #[arg(long, conflicts_with = "halves")]
    pub prime_synthetic: Option<SyntheticSpec>,

    /// Seed for a synthetic S'; defaults to --seed + 1.
    #[arg(long)]
    pub prime_seed: Option<u64>,

    /// Split the sample into halves and use them as S and S'.
    #[arg(long)]
    pub halves: bool,

    /// Resolution; the searched ε* of S when absent.
    #[arg(long)]
    pub eps: Option<f64>,

    #[arg(long)]
    pub out: Option<PathBuf>,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}
