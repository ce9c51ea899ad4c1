//! `gridflex`: validate feeders, solve single cases, sweep the four study
//! configurations over EV penetration levels, and generate EV demand.

mod evgen;
mod output;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gridflex_core::model::{BessBinaries, Branching, SolverConfig};
use gridflex_core::network::{Configuration, HORIZON};
use gridflex_core::study::{DEFAULT_DESIGNATED_LINE, DEFAULT_PENETRATIONS, DEFAULT_SEED};

/// Exit code for unreadable inputs or unwritable outputs.
const EXIT_IO: u8 = 2;
/// Exit code for any other tool failure.
const EXIT_FAILURE: u8 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "gridflex",
    version,
    about = "Feeder dispatch, line switching and EV demand studies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check an instance file. Exit 0 if valid, 1 if not, 2 if unreadable.
    Validate {
        #[arg(long)]
        instance: PathBuf,
    },
    /// Solve one configuration. Exit 0 feasible, 3 infeasible, 4 limit reached.
    Solve(SolveArgs),
    /// Solve all four configurations at each penetration level.
    Sweep(SweepArgs),
    /// Generate an EV demand profile, or many scenarios with --scenarios.
    Evgen(evgen::EvgenArgs),
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Instance JSON; the bundled 33-bus feeder when omitted.
    #[arg(long)]
    instance: Option<PathBuf>,
    /// 100%-penetration EV profile CSV (bus_id,hour,demand_mw). Generated
    /// from --seed with the default pipeline when omitted.
    #[arg(long)]
    ev_profile: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
enum SolverKind {
    /// Branch-and-bound on the full model.
    Bnb,
    /// Per-hour enumeration of radial topologies; storage-free cases only.
    Enum,
}

#[derive(Debug, Args)]
struct SolverArgs {
    /// Model hours 1..=N only.
    #[arg(long, default_value_t = HORIZON as u16, value_parser = clap::value_parser!(u16).range(1..=HORIZON as i64))]
    hours: u16,
    #[arg(long, default_value = "exact")]
    bess_binaries: BessBinaries,
    #[arg(long, value_enum, default_value = "bnb")]
    solver: SolverKind,
    #[arg(long, default_value = "most-fractional")]
    branching: Branching,
    #[arg(long)]
    node_limit: Option<usize>,
    #[arg(long)]
    time_limit_ms: Option<u64>,
    /// Global big-M replacing the per-line values.
    #[arg(long)]
    big_m: Option<f64>,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        let mut cfg = SolverConfig::default().with_horizon(self.hours as usize);
        cfg.bess_binaries = self.bess_binaries;
        cfg.branching = self.branching;
        cfg.time_limit_ms = self.time_limit_ms;
        cfg.big_m = self.big_m;
        if let Some(n) = self.node_limit {
            cfg.node_limit = n;
        }
        cfg
    }
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    config: Configuration,
    #[arg(long, default_value_t = 0.0, value_parser = penetration)]
    penetration: f64,
    #[command(flatten)]
    solver: SolverArgs,
    /// Also write the model as free-format MPS.
    #[arg(long)]
    export_mps: Option<PathBuf>,
    /// Results JSON; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_delimiter = ',', value_parser = penetration, default_values_t = DEFAULT_PENETRATIONS)]
    penetrations: Vec<f64>,
    #[command(flatten)]
    solver: SolverArgs,
    /// Line whose switching schedule is tabulated.
    #[arg(long, default_value_t = DEFAULT_DESIGNATED_LINE)]
    line: u32,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

fn penetration(s: &str) -> Result<f64, String> {
    let p: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(format!("penetration {p} outside [0, 1]"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Validate { instance } => run::validate(&instance),
        Command::Solve(args) => run::solve(&args),
        Command::Sweep(args) => run::sweep(&args),
        Command::Evgen(args) => evgen::evgen(&args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let io = e.chain().any(|c| c.downcast_ref::<std::io::Error>().is_some());
            ExitCode::from(if io { EXIT_IO } else { EXIT_FAILURE })
        }
    }
}
