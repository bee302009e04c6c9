//! `ncvx-sdp`: generate instances, run the rank-constrained solvers, and
//! sweep experiment grids to CSV.

mod experiments;
mod rows;
mod solve;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::solve::SolverArgs;

#[derive(Parser)]
#[command(name = "ncvx-sdp", version, about = "Rank-constrained MaxCut / Orthogonal-Cut SDP experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance and write it in matrix text format
    Gen(GenArgs),
    /// Solve a single instance read from a matrix file
    Solve(SolveArgs),
    /// Round local maximizers of random Erdős–Rényi MaxCut instances
    Maxcut(MaxcutArgs),
    /// Correlation sweep for Z2 synchronization (spiked Wigner model)
    Z2sync(Z2Args),
    /// Correlation sweep for the two-community stochastic block model
    Sbm(SbmArgs),
    /// Curvature versus optimality gap along PGA trajectories on GOE(n)
    Landscape(LandscapeArgs),
    /// Orthogonal-Cut gaps on GOE(n) with d×d blocks
    Ocsdp(OcsdpArgs),
    /// Run the Grothendieck-type certificate on a saved configuration
    Check(CheckArgs),
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Model {
    Goe,
    Spiked,
    Sbm,
    Er,
    Regular,
}

#[derive(Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub model: Model,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Spike strength (spiked)
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Within-community degree parameter (sbm)
    #[arg(long)]
    pub a: Option<f64>,
    /// Across-community degree parameter (sbm)
    #[arg(long)]
    pub b: Option<f64>,
    /// Average (er) or exact (regular) degree
    #[arg(long)]
    pub degree: Option<f64>,
    /// Attach a block dimension to the output (for ocsdp-style solves)
    #[arg(long)]
    pub blocks: Option<usize>,
    /// Write `−A_G` instead of the adjacency (er, regular)
    #[arg(long)]
    pub maxcut: bool,
    /// Subtract the mean degree `d/n` (regular)
    #[arg(long)]
    pub centered: bool,
    #[arg(long)]
    pub out: PathBuf,
    /// Planted labels, one per line (spiked, sbm)
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Args)]
pub struct SolveArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Shorthand for `--solver rtr-a` / `--solver rtr-b`
    #[arg(long, value_enum, conflicts_with = "solver")]
    pub mode: Option<ModeArg>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Where to write the final configuration
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-iteration trace CSV
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ModeArg {
    A,
    B,
}

#[derive(Args)]
pub struct Grid {
    /// Seeds: `0..10`, `0..=9` or `1,4,7`
    #[arg(long, value_parser = parse_list, default_value = "0..10")]
    pub seeds: UintList,
    /// Output CSV (stdout when omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct MaxcutArgs {
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 50.0)]
    pub degree: f64,
    #[arg(long, value_parser = parse_list, default_value = "2..=10")]
    pub k_list: UintList,
    /// Also solve at the SDP-exact rank ⌈√(2n)⌉ + 1
    #[arg(long)]
    pub high_rank: bool,
    /// Hyperplane samples per rounding
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[command(flatten)]
    pub grid: Grid,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Args)]
pub struct Z2Args {
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.5,0.75,1,1.25,1.5,2,3,4")]
    pub lambdas: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[command(flatten)]
    pub grid: Grid,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Args)]
pub struct SbmArgs {
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// `a:b` pairs, e.g. `12:4,10:6`
    #[arg(long, value_delimiter = ',', value_parser = parse_pair, default_value = "12:4")]
    pub ab: Vec<(f64, f64)>,
    #[arg(long, default_value_t = 8)]
    pub k: usize,
    #[command(flatten)]
    pub grid: Grid,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Args)]
pub struct LandscapeArgs {
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, value_parser = parse_list, default_value = "2..=10")]
    pub k_list: UintList,
    /// PGA iterations between curvature probes
    #[arg(long, default_value_t = 50)]
    pub record_every: usize,
    /// Trajectory CSV (curvature, normalized gap) pairs
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
    /// Lift the n ≤ 2000 guard
    #[arg(long)]
    pub allow_large: bool,
    #[command(flatten)]
    pub grid: Grid,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Args)]
pub struct OcsdpArgs {
    #[arg(long, default_value_t = 300)]
    pub n: usize,
    #[arg(long, default_value_t = 3)]
    pub d: usize,
    #[arg(long, value_parser = parse_list, default_value = "3,6,9,12,15")]
    pub k_list: UintList,
    #[command(flatten)]
    pub grid: Grid,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Args)]
pub struct CheckArgs {
    #[arg(long)]
    pub in_config: PathBuf,
    #[arg(long)]
    pub in_matrix: PathBuf,
    /// ε the configuration was certified at; measured with the power method when omitted
    #[arg(long)]
    pub eps: Option<f64>,
    /// Seed for the SDP estimate
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Exit with status 3 if the inequality fails
    #[arg(long)]
    pub strict: bool,
}

#[derive(Clone, Debug)]
pub struct UintList(pub Vec<u64>);

fn parse_list(s: &str) -> Result<UintList, String> {
    let bad = |p: &str| format!("invalid list element `{p}`");
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((lo, hi)) = part.split_once("..") {
            let lo: u64 = lo.parse().map_err(|_| bad(part))?;
            let hi = match hi.strip_prefix('=') {
                Some(h) => h.parse::<u64>().map_err(|_| bad(part))? + 1,
                None => hi.parse().map_err(|_| bad(part))?,
            };
            out.extend(lo..hi);
        } else {
            out.push(part.parse().map_err(|_| bad(part))?);
        }
    }
    Ok(UintList(out))
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected a:b, got `{s}`"))?;
    let p = |v: &str| v.trim().parse::<f64>().map_err(|_| format!("invalid number `{v}`"));
    Ok((p(a)?, p(b)?))
}

/// Invalid arguments detected after parsing; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// A run did not converge under `--strict`; exits with status 3.
#[derive(Debug)]
pub struct NotConverged(pub String);

impl fmt::Display for NotConverged {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for NotConverged {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => experiments::gen(&a),
        Command::Solve(a) => experiments::solve_one(&a),
        Command::Maxcut(a) => experiments::maxcut(&a),
        Command::Z2sync(a) => experiments::z2sync(&a),
        Command::Sbm(a) => experiments::sbm(&a),
        Command::Landscape(a) => experiments::landscape(&a),
        Command::Ocsdp(a) => experiments::ocsdp(&a),
        Command::Check(a) => experiments::check(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let invalid = matches!(
                e.downcast_ref::<ncvx_sdp::Error>(),
                Some(ncvx_sdp::Error::InvalidParameter(_) | ncvx_sdp::Error::InvalidBlockDim { .. })
            );
            if invalid || e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else if e.downcast_ref::<NotConverged>().is_some() {
                ExitCode::from(3)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
