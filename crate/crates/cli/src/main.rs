//! `dcplus`: AC / DC+ / DC load flows, N-1 scans, line modification factors
//! and busbar split/merge what-if studies on MATPOWER cases.

mod commands;
mod fail;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dcplus_core::gridio::BranchKey;

use crate::fail::CliError;
use crate::output::Format;

#[derive(Parser, Debug)]
#[command(name = "dcplus", version, about = "Voltage-sensitive linear load flow and topology screening")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// AC, DC+ and DC solutions side by side (busses, branches, summary).
    Loadflow(Common),
    /// Every single-branch outage with DC+, DC and the AC oracle.
    N1 {
        #[command(flatten)]
        common: Common,
        /// Scan a seeded random sample of this many branches instead of all.
        #[arg(long)]
        sample: Option<usize>,
    },
    /// 2×2 line modification distribution factor between two branches.
    Lmdf {
        #[command(flatten)]
        common: Common,
        /// Monitored branch, `FROM-TO` or `FROM-TO#ORDINAL`.
        #[arg(long)]
        monitored: BranchArg,
        /// Modified branch.
        #[arg(long)]
        modified: BranchArg,
        /// Series conductance change, pu (default: outage).
        #[arg(long, requires = "db", allow_negative_numbers = true)]
        dg: Option<f64>,
        /// Series susceptance change, pu (default: outage).
        #[arg(long, requires = "dg", allow_negative_numbers = true)]
        db: Option<f64>,
        /// Admissible |θ̂_ft| before a warning is issued, rad.
        #[arg(long, default_value_t = 0.05)]
        max_angle: f64,
        /// Admissible |v̂_f − v̂_t| before a warning is issued, pu.
        #[arg(long, default_value_t = 0.02)]
        max_voltage_gap: f64,
    },
    /// Open a busbar coupler: split one PQ bus into two busbars.
    Split {
        #[command(flatten)]
        common: Common,
        /// JSON file assigning every incident branch (and the injection) to busbar A or B.
        #[arg(long)]
        assignment: PathBuf,
        /// Bus to split; must match the assignment file when given.
        #[arg(long)]
        bus: Option<u32>,
    },
    /// Close a coupler between two PQ buses.
    Merge {
        #[command(flatten)]
        common: Common,
        /// Bus that keeps its id.
        #[arg(long)]
        bus: u32,
        /// Bus joined into `--bus`.
        #[arg(long)]
        absorb: u32,
    },
    /// Simultaneous outage of several branches.
    MultiOutage {
        #[command(flatten)]
        common: Common,
        /// Outaged branch; repeat for each one.
        #[arg(long = "branch", required = true)]
        branches: Vec<BranchArg>,
    },
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// MATPOWER case file.
    pub case: PathBuf,
    /// Linearization point: flat voltages or the solved AC state.
    #[arg(long = "ref", value_enum, default_value_t = RefArg::Hot)]
    pub reference: RefArg,
    /// AC convergence tolerance on the power mismatch, pu.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 30)]
    pub max_iter: usize,
    /// Output directory (created if missing).
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Seed for sampling and the self-test vectors.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Run the rebuild-oracle self-test on the case before the command.
    #[arg(long)]
    pub selftest: bool,
    /// Disable the data-parallel scan.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RefArg {
    Cold,
    Hot,
}

/// `FROM-TO` or `FROM-TO#ORDINAL`, matched in either orientation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BranchArg(pub BranchKey);

impl std::str::FromStr for BranchArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (pair, ordinal) = match s.split_once('#') {
            Some((p, o)) => (p, o.parse::<u32>().map_err(|e| format!("bad ordinal in {s:?}: {e}"))?),
            None => (s, 1),
        };
        let (from, to) = pair.split_once('-').ok_or_else(|| format!("expected FROM-TO, got {s:?}"))?;
        let parse = |x: &str| x.trim().parse::<u32>().map_err(|e| format!("bad bus id in {s:?}: {e}"));
        Ok(BranchArg(BranchKey { from: parse(from)?, to: parse(to)?, ordinal }))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            eprintln!("{}", e.diagnostic());
            ExitCode::from(e.code)
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::input(e.to_string())
    }
}
