use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use herald_core::analysis::FigureId;
use herald_core::source::DEFAULT_EPSILON;
use herald_core::{DetectorConfig, Efficiency, Result};

#[derive(Debug, Parser)]
#[command(
    name = "herald",
    version,
    about = "Photon-number statistics of heralded Fock states from an OPA with a time-multiplexed detector",
    args_override_self = true
)]
pub struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Write the result here instead of standard output.
    #[arg(long, global = true, value_name = "PATH")]
    pub output: Option<PathBuf>,

    /// Worker thread cap for parallel sweeps and simulations.
    #[arg(long, global = true, env = "HERALD_THREADS", value_name = "N")]
    pub threads: Option<usize>,

    /// File of `key = value` lines supplying default flag values.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Click distribution for a fixed photon number, or mean/std bands.
    DetectorResponse(DetectorResponseArgs),
    /// Posterior over the signal photon number given the click count.
    Posterior(HeraldArgs),
    /// ML estimate, its error, conditional moments, Q and herald rate.
    HeraldStats(HeraldArgs),
    /// Mandel Q over a (g, eta) grid at a fixed target estimate.
    Qmap(QmapArgs),
    /// Numeric table behind one of the standard figures.
    Figure(FigureArgs),
    /// Compare analytic results with an event-level simulation.
    McValidate(McArgs),
    /// Smallest efficiency giving a sub-Poissonian herald at a given rate.
    Thresholds(ThresholdArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::DetectorResponse(_) => "detector-response",
            Command::Posterior(_) => "posterior",
            Command::HeraldStats(_) => "herald-stats",
            Command::Qmap(_) => "qmap",
            Command::Figure(_) => "figure",
            Command::McValidate(_) => "mc-validate",
            Command::Thresholds(_) => "thresholds",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct StagesArgs {
    /// Splitter stages; the detector has 2^m time bins.
    #[arg(long = "m", value_name = "STAGES", default_value_t = 5)]
    pub stages: u32,

    /// Number of time bins, a power of two (alternative to --m).
    #[arg(long = "M", value_name = "BINS", conflicts_with = "stages")]
    pub bins: Option<u64>,
}

impl StagesArgs {
    pub fn stages(&self) -> Result<u32> {
        match self.bins {
            Some(bins) => Ok(DetectorConfig::from_bins(bins, Efficiency::new(1.0)?)?.stages()),
            None => Ok(self.stages),
        }
    }

    pub fn detector(&self, eta: Efficiency) -> Result<DetectorConfig> {
        DetectorConfig::new(self.stages()?, eta)
    }
}

#[derive(Debug, Clone, Args)]
pub struct DetectorResponseArgs {
    #[command(flatten)]
    pub stages: StagesArgs,

    /// Detection efficiency, decimal or exact ratio such as 33/50.
    #[arg(long, default_value = "1")]
    pub eta: Efficiency,

    /// Incident photon number; emits the click distribution for it.
    #[arg(long = "N", value_name = "PHOTONS", conflicts_with = "n_max")]
    pub photons: Option<u64>,

    /// Emits mean and standard deviation of the clicks for N = 0..=n-max.
    #[arg(long, default_value_t = 100)]
    pub n_max: u64,
}

#[derive(Debug, Clone, Args)]
pub struct SourceArgs {
    /// OPA gain.
    #[arg(long, default_value_t = 1.0)]
    pub g: f64,

    /// Number of independent thermal modes.
    #[arg(long, default_value_t = 1)]
    pub mu: u32,

    /// Truncation tolerance for the pair-number law and posterior.
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub eps: f64,
}

#[derive(Debug, Clone, Args)]
pub struct HeraldArgs {
    #[command(flatten)]
    pub stages: StagesArgs,

    /// Detection efficiency, decimal or exact ratio such as 33/50.
    #[arg(long, default_value = "0.66")]
    pub eta: Efficiency,

    #[command(flatten)]
    pub source: SourceArgs,

    /// Idler click count that heralds the signal.
    #[arg(long)]
    pub n_i: u64,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    /// Points per axis; the grid covers g in (0, g-max] and eta in (0, 1].
    #[arg(long, default_value_t = 200)]
    pub resolution: usize,

    /// Upper end of the gain axis.
    #[arg(long, default_value_t = 1.5)]
    pub g_max: f64,

    /// Truncation tolerance.
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub eps: f64,
}

#[derive(Debug, Clone, Args)]
pub struct QmapArgs {
    #[command(flatten)]
    pub stages: StagesArgs,

    /// Number of independent thermal modes.
    #[arg(long, default_value_t = 1)]
    pub mu: u32,

    /// Target ML estimate.
    #[arg(long, default_value_t = 5)]
    pub target: u64,

    #[command(flatten)]
    pub grid: GridArgs,

    /// Emit herald-probability contour polylines at these levels instead
    /// of the cells.
    #[arg(long, value_delimiter = ',', value_name = "LEVELS")]
    pub contours: Vec<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ThresholdArgs {
    #[command(flatten)]
    pub stages: StagesArgs,

    /// Number of independent thermal modes.
    #[arg(long, default_value_t = 1)]
    pub mu: u32,

    /// Target ML estimate.
    #[arg(long, default_value_t = 5)]
    pub target: u64,

    /// Minimum heralding probability per pulse.
    #[arg(long, default_value_t = 0.05)]
    pub rate: f64,

    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Clone, Args)]
pub struct FigureArgs {
    /// fig2 to fig6.
    #[arg(long)]
    pub id: FigureId,

    /// Splitter stages.
    #[arg(long = "m", value_name = "STAGES")]
    pub stages: Option<u32>,

    /// Efficiencies for fig2 and fig4.
    #[arg(long, value_delimiter = ',')]
    pub etas: Vec<f64>,

    /// Gains for fig4.
    #[arg(long, value_delimiter = ',')]
    pub gains: Vec<f64>,

    /// Largest photon number in fig2.
    #[arg(long)]
    pub max_photons: Option<u64>,

    /// Largest click count in fig4.
    #[arg(long)]
    pub max_clicks: Option<u64>,

    /// fig3 efficiency.
    #[arg(long)]
    pub eta: Option<f64>,

    /// fig3 gain.
    #[arg(long)]
    pub g: Option<f64>,

    /// fig3 click count.
    #[arg(long)]
    pub n_i: Option<u64>,

    /// Target estimate for fig5 and fig6.
    #[arg(long)]
    pub target: Option<u64>,

    /// Grid points per axis for fig5 and fig6.
    #[arg(long)]
    pub resolution: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct McArgs {
    #[command(flatten)]
    pub stages: StagesArgs,

    /// Detection efficiency, decimal or exact ratio such as 33/50.
    #[arg(long, default_value = "0.66")]
    pub eta: Efficiency,

    #[command(flatten)]
    pub source: SourceArgs,

    /// Click count to herald on.
    #[arg(long, default_value_t = 4, conflicts_with = "photons")]
    pub n_i: u64,

    /// Check the detector alone with this many incident photons.
    #[arg(long)]
    pub photons: Option<u64>,

    #[arg(long, default_value_t = 1_000_000)]
    pub trials: u64,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// Fewer kept trials than this is reported as insufficient statistics.
    #[arg(long, default_value_t = 100)]
    pub min_kept: u64,
}
