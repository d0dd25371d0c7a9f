//! `advsched` command-line entry point.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

mod commands;
mod manifest;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "advsched", version, about = "Online advance-admission scheduling: bounds, policies and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic instance.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
    /// Simulate policies on an instance with common random numbers.
    Simulate(SimulateArgs),
    /// Compute competitive-ratio bounds for capacity k.
    Bound(BoundArgs),
    /// Expand an instance with overbooking virtual slots.
    Overbook(OverbookArgs),
    /// Solve the offline matching LP for given or sampled demand.
    OfflineOpt(OfflineArgs),
}

#[derive(Subcommand)]
enum GenKind {
    /// Random instance with piecewise-constant rates.
    Random(RandomArgs),
    /// Clinic instance: sessions as resources, (arrival day, availability mask) as types.
    Clinic(ClinicArgs),
}

#[derive(Args)]
struct RandomArgs {
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(1..))]
    resources: u32,
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u32).range(1..))]
    types: u32,
    /// Smallest capacity; capacities are drawn from [k, 2k].
    #[arg(long = "min-capacity", short = 'k', default_value_t = 2, value_parser = clap::value_parser!(u32).range(1..))]
    min_capacity: u32,
    #[arg(long, default_value_t = 1.0)]
    horizon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ClinicArgs {
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(1..))]
    weeks: u32,
    #[arg(long = "sessions-per-week", default_value_t = 8, value_parser = clap::value_parser!(u32).range(1..=14))]
    sessions_per_week: u32,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..))]
    capacity: u32,
    /// Probability that a customer can attend any given session.
    #[arg(long = "availability", default_value_t = 1.0)]
    availability: f64,
    /// Show probability by wait in days, e.g. "0:0.95,7:0.8,14:0.7".
    #[arg(long = "reward-table", value_parser = commands::parse_reward_table)]
    reward_table: commands::RewardTable,
    /// Expected arrivals as a multiple of capacity.
    #[arg(long, default_value_t = 1.0)]
    load: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolicyChoice {
    Separation,
    Maa,
    Greedy,
    Bidprice,
    All,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum, default_value_t = PolicyChoice::All)]
    policy: PolicyChoice,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    reps: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also solve the offline LP on every realised demand vector.
    #[arg(long)]
    offline: bool,
    /// Results CSV; the summary goes to stdout either way.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    jobs: u64,
    /// Reward-function time step (default: min(1e-3 T, stability bound)).
    #[arg(long)]
    dt: Option<f64>,
    /// Write reward-function grids to this CSV.
    #[arg(long = "dump-hjb")]
    dump_hjb: Option<PathBuf>,
    /// Slot map written by `overbook`; adds net-of-overbooking-cost columns.
    #[arg(long)]
    slots: Option<PathBuf>,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    k: u64,
    /// Compute every capacity from k to kmax.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    kmax: Option<u64>,
    /// Integration step (default: min(1e-4 k, 1e-3)).
    #[arg(long)]
    h: Option<f64>,
    /// Bisection tolerance on beta.
    #[arg(long, default_value_t = advsched::bounds::BETA_TOL)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OverbookArgs {
    #[arg(long)]
    instance: PathBuf,
    /// No-show probability of every resource.
    #[arg(long)]
    p: f64,
    /// Denial cost of every resource.
    #[arg(long)]
    d: f64,
    /// Virtual slots per resource.
    #[arg(long)]
    kmax: u32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OfflineArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Demand per type, e.g. "2,0,1"; otherwise demand is sampled.
    #[arg(long, value_delimiter = ',')]
    delta: Option<Vec<u64>>,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    reps: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
                    if e.exit_code() == 0 =>
                {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match cli.command {
        Command::Gen { kind: GenKind::Random(a) } => commands::gen_random(a),
        Command::Gen { kind: GenKind::Clinic(a) } => commands::gen_clinic(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Bound(a) => commands::bound(a),
        Command::Overbook(a) => commands::overbook(a),
        Command::OfflineOpt(a) => commands::offline_opt(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(commands::Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(commands::Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
