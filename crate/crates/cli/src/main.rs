//! `rlnc`: parameter sweeps, file coding, and bound cross-checks on top
//! of rlnc-core. Exit codes: 0 success, 1 usage error, 2 runtime or
//! data error, 3 cross-check failure.

mod commands;
mod parse;

use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

const RANGE_HELP: &str = "\
Grid-valued flags accept a single value, a comma list, or a range:
  floats    start:stop:step      e.g. --delta0 0:0.9:0.05
  integers  start:stop[:step]    e.g. --m 3:8 or --m 3:9:2
  pairs     n:m[,n:m...]         e.g. --nm 1:2,9:10,11:12 (--nm only)
Both range ends are inclusive. A --config file holds flat key=value
lines mirroring long flag names; explicit flags win over it.";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
    CrosscheckFailed(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::CrosscheckFailed(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) | CliError::Runtime(msg) | CliError::CrosscheckFailed(msg) => {
                write!(out, "{msg}")
            }
        }
    }
}

#[derive(Parser)]
#[command(
    name = "rlnc",
    version,
    about = "Random linear network coding over erasure relays: codec, simulator, decoding bounds",
    after_help = RANGE_HELP
)]
struct Cli {
    /// Flat key=value file with defaults for long flags; flags win.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form decoding-probability surface as CSV.
    Bounds(BoundsArgs),
    /// Monte Carlo delivery-ratio sweep over the two-hop relay mesh as CSV.
    Sim(SimArgs),
    /// Encode a file into coded packets, or decode packets back.
    #[command(subcommand)]
    Codec(CodecCommand),
    /// Compare simulated decode success against the analytical lower
    /// bound on a shared grid; exits 3 if any point falls below it.
    Crosscheck(CrosscheckArgs),
}

#[derive(Subcommand)]
enum CodecCommand {
    Encode(CodecEncodeArgs),
    Decode(CodecDecodeArgs),
}

#[derive(Args)]
pub struct BoundsArgs {
    /// Fragments per generation [default: 3]
    #[arg(long = "n", value_name = "N")]
    n: Option<String>,
    /// First-hop relay count [default: 3]
    #[arg(long = "N", value_name = "COUNT")]
    big_n: Option<String>,
    /// Field order, a power of two [default: 256]
    #[arg(long = "q", value_name = "Q")]
    q: Option<String>,
    /// Relay-to-relay erasure rate [default: 0.01]
    #[arg(long, value_name = "RATE")]
    delta1: Option<String>,
    /// Relay-to-sink erasure rate [default: 0.01]
    #[arg(long, value_name = "RATE")]
    delta2: Option<String>,
    /// Coded packets per generation, list/range [default: 3:8]
    #[arg(long = "m", value_name = "LIST")]
    m: Option<String>,
    /// Second-hop relay count, list/range [default: 2,4]
    #[arg(long = "M", value_name = "LIST")]
    big_m: Option<String>,
    /// Source-to-relay erasure rate, list/range [default: 0:0.9:0.05]
    #[arg(long, value_name = "LIST")]
    delta0: Option<String>,
    /// Output CSV path; stdout when omitted
    #[arg(long, value_name = "PATH")]
    out: Option<String>,
}

#[derive(Args)]
pub struct SimArgs {
    /// Strategies: frag, nc (recode), nc-forward [default: frag,nc]
    #[arg(long, value_name = "LIST")]
    strategies: Option<String>,
    /// Generation shapes as n:m pairs [default: 9:10]
    #[arg(long, value_name = "PAIRS")]
    nm: Option<String>,
    /// Field orders, powers of two [default: 256]
    #[arg(long = "q", value_name = "LIST")]
    q: Option<String>,
    /// Per-link erasure rates applied to both relay tiers [default: 0.05:0.4:0.05]
    #[arg(long, value_name = "LIST")]
    erasure: Option<String>,
    /// Total source packet budget per run [default: 2000]
    #[arg(long, value_name = "COUNT")]
    packets: Option<String>,
    /// Sink count [default: 2]
    #[arg(long, value_name = "COUNT")]
    sinks: Option<String>,
    /// Replications per grid point [default: 30]
    #[arg(long, value_name = "COUNT")]
    reps: Option<String>,
    /// Master seed; reruns with the same seed are byte-identical [default: 0]
    #[arg(long, value_name = "SEED")]
    seed: Option<String>,
    /// First-hop relay count [default: 3]
    #[arg(long = "N", value_name = "COUNT")]
    big_n: Option<String>,
    /// Second-hop relay count [default: 5]
    #[arg(long = "M", value_name = "COUNT")]
    big_m: Option<String>,
    /// Source-to-relay erasure rate, fixed across the sweep [default: 0.001]
    #[arg(long, value_name = "RATE")]
    delta0: Option<String>,
    /// Fragment payload bytes [default: 1]
    #[arg(long, value_name = "BYTES")]
    fragment_size: Option<String>,
    /// Output CSV path; stdout when omitted
    #[arg(long, value_name = "PATH")]
    out: Option<String>,
}

#[derive(Args)]
pub struct CodecEncodeArgs {
    /// File to encode
    #[arg(long, value_name = "PATH")]
    input: Option<String>,
    /// Packet container to write
    #[arg(long, value_name = "PATH")]
    output: Option<String>,
    /// Fragments per generation [default: 9]
    #[arg(long = "n", value_name = "N")]
    n: Option<String>,
    /// Coded packets per generation [default: 10]
    #[arg(long = "m", value_name = "M")]
    m: Option<String>,
    /// Field width in bits [default: 8]
    #[arg(long = "f", value_name = "BITS")]
    f: Option<String>,
    /// Fragment payload bytes [default: 1024]
    #[arg(long, value_name = "BYTES")]
    fragment_size: Option<String>,
    /// Coefficient seed [default: 0]
    #[arg(long, value_name = "SEED")]
    seed: Option<String>,
}

#[derive(Args)]
pub struct CodecDecodeArgs {
    /// Packet container to read
    #[arg(long, value_name = "PATH")]
    input: Option<String>,
    /// Reconstructed file to write
    #[arg(long, value_name = "PATH")]
    output: Option<String>,
}

#[derive(Args)]
pub struct CrosscheckArgs {
    /// Fragments per generation [default: 3]
    #[arg(long = "n", value_name = "N")]
    n: Option<String>,
    /// First-hop relay count [default: 3]
    #[arg(long = "N", value_name = "COUNT")]
    big_n: Option<String>,
    /// Field order, a power of two [default: 256]
    #[arg(long = "q", value_name = "Q")]
    q: Option<String>,
    /// Relay-to-relay erasure rate [default: 0.01]
    #[arg(long, value_name = "RATE")]
    delta1: Option<String>,
    /// Relay-to-sink erasure rate [default: 0.01]
    #[arg(long, value_name = "RATE")]
    delta2: Option<String>,
    /// Coded packets per generation, list/range [default: 3,4,5]
    #[arg(long = "m", value_name = "LIST")]
    m: Option<String>,
    /// Second-hop relay count, list/range [default: 2,4]
    #[arg(long = "M", value_name = "LIST")]
    big_m: Option<String>,
    /// Source-to-relay erasure rate, list/range [default: 0.1,0.3,0.5]
    #[arg(long, value_name = "LIST")]
    delta0: Option<String>,
    /// Replications per grid point [default: 30]
    #[arg(long, value_name = "COUNT")]
    reps: Option<String>,
    /// Generations simulated per replication [default: 200]
    #[arg(long, value_name = "COUNT")]
    gens_per_rep: Option<String>,
    /// Master seed [default: 0]
    #[arg(long, value_name = "SEED")]
    seed: Option<String>,
    /// Output CSV path; stdout when omitted
    #[arg(long, value_name = "PATH")]
    out: Option<String>,
    /// Multiplies the bound's source exponent; anything but 1.0
    /// corrupts the bound on purpose (harness fixture for verifying the
    /// comparison actually bites).
    #[arg(long, value_name = "FACTOR", default_value_t = 1.0, hide = true)]
    exponent_scale: f64,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            std::process::exit(code);
        }
    };

    let result = run(&cli);
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(path) => parse::FileConfig::load(path).map_err(CliError::Usage)?,
        None => parse::FileConfig::default(),
    };
    match &cli.command {
        Command::Bounds(args) => commands::run_bounds(args, &cfg),
        Command::Sim(args) => commands::run_sim(args, &cfg),
        Command::Codec(CodecCommand::Encode(args)) => commands::run_codec_encode(args, &cfg),
        Command::Codec(CodecCommand::Decode(args)) => commands::run_codec_decode(args, &cfg),
        Command::Crosscheck(args) => commands::run_crosscheck(args, &cfg),
    }
}
