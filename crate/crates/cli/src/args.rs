use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nystrom_filter::LandmarkStrategy;

#[derive(Debug, Parser)]
#[command(
    name = "nyfilter",
    version,
    about = "Fast bilateral, joint bilateral and non-local means filtering",
    long_about = "Fast bilateral, joint bilateral and non-local means filtering.\n\n\
                  Machine-readable results go to standard output or to --report; \
                  a human summary goes to standard error.\n\n\
                  Exit status: 0 success, 1 usage or invalid parameters, 2 I/O or format errors, \
                  3 numerical failure."
)]
pub struct Cli {
    /// Worker threads. Results do not depend on this value.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fast bilateral filter; joint bilateral with --guide.
    Blf(BlfArgs),
    /// Fast PCA non-local means denoising.
    #[command(alias = "denoise")]
    Nlm(NlmArgs),
    /// Brute-force reference filter.
    Oracle(OracleArgs),
    /// Prints `psnr_db,ssim,mse` for two images.
    Compare(CompareArgs),
    /// Times the fast filter against the brute-force filter over a parameter sweep.
    Bench(BenchArgs),
    /// Landmark and low-rank diagnostics for a guide image.
    Diag(DiagArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SpatialChoice {
    /// Truncated Gaussian with S = ceil(3 sigma), direct convolution.
    Fir,
    /// Recursive Gaussian, cost independent of sigma.
    Recursive,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Dynamic range R of the samples. Defaults to 255.
    #[arg(long, value_name = "R")]
    pub range_max: Option<f64>,
}

#[derive(Debug, Args)]
pub struct LandmarkArgs {
    /// Number of landmarks.
    #[arg(long)]
    pub m0: Option<usize>,

    /// Seed for k-means++ seeding and uniform sampling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Landmark selection: kmeans or uniform.
    #[arg(long, default_value_t = LandmarkStrategy::KMeans)]
    pub strategy: LandmarkStrategy,

    /// Maximum Lloyd iterations.
    #[arg(long, default_value_t = 50)]
    pub max_iter: usize,

    /// Eigenvalues below eps_drop times the largest are discarded.
    #[arg(long, default_value_t = 1e-8)]
    pub eps_drop: f64,
}

#[derive(Debug, Args)]
pub struct BilateralArgs {
    /// Spatial Gaussian width. Defaults to 5, or 3 for inputs with more than three channels.
    #[arg(long)]
    pub sigma: Option<f64>,

    /// Range Gaussian width. Defaults to 50, or 100 for inputs with more than three channels.
    #[arg(long)]
    pub theta: Option<f64>,

    /// Guide image for joint bilateral filtering.
    #[arg(long, value_name = "PATH")]
    pub guide: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BlfArgs {
    pub input: PathBuf,
    pub output: PathBuf,

    #[command(flatten)]
    pub bilateral: BilateralArgs,

    /// Spatial convolution used by the fast filter.
    #[arg(long, value_enum, default_value_t = SpatialChoice::Recursive)]
    pub spatial: SpatialChoice,

    /// Landmark count defaults to 15, or 32 for inputs with more than three channels.
    #[command(flatten)]
    pub landmarks: LandmarkArgs,

    #[command(flatten)]
    pub input_args: InputArgs,

    /// Writes a run report; `.json` gives JSON, anything else CSV.
    #[arg(long, value_name = "PATH")]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct NlmShape {
    /// Standard deviation of the noise, in sample units.
    #[arg(long)]
    pub noise: f64,

    /// Range width; defaults to three times the noise level.
    #[arg(long)]
    pub theta: Option<f64>,

    /// Half-width S of the box search window.
    #[arg(long, default_value_t = 10)]
    pub search_radius: usize,

    /// Patch half-width r.
    #[arg(long, default_value_t = 3)]
    pub patch_radius: usize,

    /// Number of principal components kept from each patch.
    #[arg(long, default_value_t = 25)]
    pub pca_dim: usize,
}

#[derive(Debug, Args)]
pub struct NlmArgs {
    pub input: PathBuf,
    pub output: PathBuf,

    #[command(flatten)]
    pub shape: NlmShape,

    /// Landmark count defaults to 31.
    #[command(flatten)]
    pub landmarks: LandmarkArgs,

    #[command(flatten)]
    pub input_args: InputArgs,

    /// Writes a run report; `.json` gives JSON, anything else CSV.
    #[arg(long, value_name = "PATH")]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    pub input: PathBuf,
    pub output: PathBuf,

    #[command(flatten)]
    pub bilateral: BilateralArgs,

    /// Runs the non-local means reference with this noise level instead of the bilateral filter.
    #[arg(long, conflicts_with_all = ["sigma", "guide"])]
    pub noise: Option<f64>,

    /// Range width for --noise; defaults to three times the noise level.
    #[arg(long, requires = "noise")]
    pub nlm_theta: Option<f64>,

    /// Search window half-width for --noise.
    #[arg(long, default_value_t = 10)]
    pub search_radius: usize,

    /// Patch half-width for --noise.
    #[arg(long, default_value_t = 3)]
    pub patch_radius: usize,

    /// Principal components for --noise.
    #[arg(long, default_value_t = 25)]
    pub pca_dim: usize,

    #[command(flatten)]
    pub input_args: InputArgs,

    /// Writes a run report; `.json` gives JSON, anything else CSV.
    #[arg(long, value_name = "PATH")]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    pub a: PathBuf,
    pub b: PathBuf,

    #[command(flatten)]
    pub input_args: InputArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    pub input: PathBuf,

    /// Guide image for joint bilateral filtering.
    #[arg(long, value_name = "PATH")]
    pub guide: Option<PathBuf>,

    /// Spatial widths to sweep; each sets S = ceil(3 sigma).
    #[arg(long, value_delimiter = ',', default_value = "5")]
    pub sigma: Vec<f64>,

    /// Range width.
    #[arg(long, default_value_t = 50.0)]
    pub theta: f64,

    /// Landmark counts to sweep.
    #[arg(long, value_delimiter = ',', default_value = "15")]
    pub m0: Vec<usize>,

    /// Landmark strategies to sweep.
    #[arg(long, value_delimiter = ',', default_value = "kmeans")]
    pub strategy: Vec<LandmarkStrategy>,

    /// Spatial convolution used by the fast filter.
    #[arg(long, value_enum, default_value_t = SpatialChoice::Recursive)]
    pub spatial: SpatialChoice,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[command(flatten)]
    pub input_args: InputArgs,
}

#[derive(Debug, Args)]
pub struct DiagArgs {
    /// Image whose pixels form the range list.
    pub guide: PathBuf,

    /// Range Gaussian width. Defaults to 50, or 100 for inputs with more than three channels.
    #[arg(long)]
    pub theta: Option<f64>,

    /// Landmark count defaults to 15, or 32 for inputs with more than three channels.
    #[command(flatten)]
    pub landmarks: LandmarkArgs,

    #[command(flatten)]
    pub input_args: InputArgs,
}
