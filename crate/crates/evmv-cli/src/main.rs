//! `evmv` — batch event-stream conversion, temporal-warp augmentation,
//! translation-invariance verification, encoder benchmarking, and a
//! fusion math demo.
//!
//! Exit codes are stable API: 0 success, 1 usage error, 2 parse or I/O
//! error, 3 domain violation.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_PARSE_IO: u8 = 2;
pub const EXIT_DOMAIN: u8 = 3;

/// A failure carrying its process exit code.
pub struct CliError {
    pub code: u8,
    pub msg: String,
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            msg: msg.into(),
        }
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Self {
            code: EXIT_DOMAIN,
            msg: msg.into(),
        }
    }
}

impl From<evmv_core::Error> for CliError {
    fn from(e: evmv_core::Error) -> Self {
        use evmv_core::Error::*;
        let code = match e {
            Io(_) | Parse { .. } | Format(_) => EXIT_PARSE_IO,
            Contract(_) | Config(_) | Degenerate(_) | Numeric(_) => EXIT_DOMAIN,
        };
        CliError {
            code,
            msg: e.to_string(),
        }
    }
}

pub type CliResult = Result<(), CliError>;

#[derive(Parser)]
#[command(
    name = "evmv",
    about = "Event-camera multi-view toolkit: dense conversion, temporal warping, invariance checks",
    version
)]
struct Cli {
    /// Seed for every random choice this invocation makes.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads for multi-input conversion.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    /// Emit machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

/// Sensor geometry, needed when the input is CSV (binary files carry it).
#[derive(Args, Clone, Copy)]
struct SensorDims {
    /// Sensor width in pixels (csv inputs only).
    #[arg(long)]
    width: Option<u16>,

    /// Sensor height in pixels (csv inputs only).
    #[arg(long)]
    height: Option<u16>,
}

impl SensorDims {
    fn pair(&self) -> Option<(u16, u16)> {
        match (self.width, self.height) {
            (Some(w), Some(h)) => Some((w, h)),
            _ => None,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Convert event files into dense view-map files.
    ///
    /// The last path is the output: a map file for a single input, a
    /// directory when several inputs are given.
    Convert {
        /// Input event file(s) followed by the output path.
        #[arg(required = true, num_args = 2..)]
        paths: Vec<PathBuf>,

        /// View projection: th, tw, or hw.
        #[arg(long, default_value = "th")]
        view: String,

        /// Channel selector: `compact`, `invariant`, or a comma-separated
        /// list like `global/count/sum,binned2/z/max`.
        #[arg(long, default_value = "compact")]
        specs: String,

        /// Time-axis resolution of the map.
        #[arg(long, default_value_t = 224)]
        t_bins: u32,

        /// Nearest-neighbor resample of the encoded map, as `ROWSxCOLS`.
        #[arg(long)]
        resize: Option<String>,

        /// Also export channel 0 of the (first) map as a PGM image.
        #[arg(long)]
        pgm: Option<PathBuf>,

        #[command(flatten)]
        dims: SensorDims,
    },

    /// Apply seeded temporal warping to an event file.
    Augment {
        input: PathBuf,
        output: PathBuf,

        /// Number of disjoint warp intervals.
        #[arg(long, default_value_t = 4)]
        l: u32,

        /// Magnitude range `a,b` sampled uniformly per interval.
        #[arg(long, default_value = "0.5,2.0")]
        mag_range: String,

        /// Rescale the warped stream back to the input's total duration.
        #[arg(long)]
        preserve_duration: bool,

        #[command(flatten)]
        dims: SensorDims,
    },

    /// Check encoder specs against controlled shifts of a stream.
    #[command(name = "verify-invariance")]
    VerifyInvariance {
        input: PathBuf,

        /// View projection: th or tw.
        #[arg(long, default_value = "th")]
        view: String,

        /// Comma-separated shift deltas, e.g. `1,2,-5`.
        #[arg(long)]
        deltas: String,

        /// Channel selector (see `convert`).
        #[arg(long, default_value = "invariant")]
        specs: String,

        #[arg(long, default_value_t = 224)]
        t_bins: u32,

        #[command(flatten)]
        dims: SensorDims,
    },

    /// Time the sparse-to-dense conversion.
    Bench {
        /// Event file to encode; omit to use a synthetic stream.
        input: Option<PathBuf>,

        /// Generate this many synthetic events instead of reading a file.
        #[arg(long, conflicts_with = "input")]
        synthetic: Option<usize>,

        #[arg(long, default_value = "compact")]
        specs: String,

        #[arg(long, default_value = "th")]
        view: String,

        #[arg(long, default_value_t = 224)]
        t_bins: u32,

        /// Timed repetitions.
        #[arg(long, default_value_t = 5)]
        repeat: usize,

        /// Synthetic sensor width.
        #[arg(long, default_value_t = 346)]
        width: u16,

        /// Synthetic sensor height.
        #[arg(long, default_value_t = 260)]
        height: u16,
    },

    /// Build random branches and a weighting head, run the fused forward
    /// pass on a synthetic stream, and verify gradients.
    #[command(name = "fuse-demo")]
    FuseDemo {
        /// Semantic feature dimension.
        #[arg(long, default_value_t = 16)]
        dim: usize,

        #[arg(long, default_value_t = 5)]
        classes: usize,

        #[arg(long, default_value_t = 2)]
        heads: usize,

        /// Fusion strategy registry name (average, view-weighted,
        /// class-weighted, sample-weighted).
        #[arg(long, default_value = "sample-weighted")]
        strategy: String,
    },
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Convert {
            paths,
            view,
            specs,
            t_bins,
            resize,
            pgm,
            dims,
        } => commands::convert(commands::ConvertArgs {
            paths,
            view,
            specs,
            t_bins,
            resize,
            pgm,
            csv_dims: dims.pair(),
            threads: cli.threads.max(1),
            json: cli.json,
        }),
        Command::Augment {
            input,
            output,
            l,
            mag_range,
            preserve_duration,
            dims,
        } => commands::augment(commands::AugmentArgs {
            input,
            output,
            l,
            mag_range,
            preserve_duration,
            csv_dims: dims.pair(),
            seed: cli.seed,
            json: cli.json,
        }),
        Command::VerifyInvariance {
            input,
            view,
            deltas,
            specs,
            t_bins,
            dims,
        } => commands::verify_invariance(commands::VerifyArgs {
            input,
            view,
            deltas,
            specs,
            t_bins,
            csv_dims: dims.pair(),
            json: cli.json,
        }),
        Command::Bench {
            input,
            synthetic,
            specs,
            view,
            t_bins,
            repeat,
            width,
            height,
        } => commands::bench(commands::BenchArgs {
            input,
            synthetic,
            specs,
            view,
            t_bins,
            repeat,
            width,
            height,
            seed: cli.seed,
            json: cli.json,
        }),
        Command::FuseDemo {
            dim,
            classes,
            heads,
            strategy,
        } => commands::fuse_demo(commands::FuseDemoArgs {
            dim,
            classes,
            heads,
            strategy,
            seed: cli.seed,
            json: cli.json,
        }),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.msg);
            ExitCode::from(e.code)
        }
    }
}
