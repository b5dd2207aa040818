//! `inferno`: run structure learning, agents and empathy scenarios from
//! config files.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "inferno", version, about = "Discrete active inference with structure learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand.
#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Config file (TOML, schema `inferno-config/1`).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the config's step budget.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Overrides the number of structure particles.
    #[arg(long)]
    pub particles: Option<usize>,
    /// Also write one CSV per curve under `<out>/plotdata`.
    #[arg(long)]
    pub emit_plotdata: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a structure posterior from a recorded history.
    StructureLearn {
        #[command(flatten)]
        common: Common,
        /// History in the `inferno-data/1` format.
        #[arg(long)]
        data: PathBuf,
    },
    /// Run a single-agent scenario.
    Agent {
        #[command(flatten)]
        common: Common,
    },
    /// Run a First-Law (rescue or obedience) scenario.
    Empathy {
        #[command(flatten)]
        common: Common,
    },
    /// Compare closed-form model reduction with its Monte-Carlo estimate.
    BmrDemo {
        #[command(flatten)]
        common: Common,
        /// Randomized Dirichlet cases.
        #[arg(long, default_value_t = 10)]
        cases: usize,
        /// Monte-Carlo samples per case.
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
    /// Check config, data, model, posterior and trace files.
    Validate {
        #[command(flatten)]
        common: Common,
        files: Vec<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::StructureLearn { common, data } => commands::structure_learn(&common, &data),
        Command::Agent { common } => commands::scenario(&common, false),
        Command::Empathy { common } => commands::scenario(&common, true),
        Command::BmrDemo { common, cases, samples } => commands::bmr_demo(&common, cases, samples),
        Command::Validate { common, files } => commands::validate(&common, &files),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("inferno: {e}");
            ExitCode::from(e.code())
        }
    }
}
