//! `instgen`: generate, check, grade and tune planning instances from
//! domains augmented with instance constraints.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use instgen::model::Encoding;

#[derive(Debug, Parser)]
#[command(name = "instgen", version, about = "Valid planning-instance generation from augmented PDDL")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Seed for every random choice.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 0 picks one per core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a domain (and optionally a problem) and print a summary.
    Parse {
        domain: PathBuf,
        problem: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compile the instance constraints into a constraint model.
    Translate {
        domain: PathBuf,
        /// Parameter assignment, `name=value,...`, or a JSON config file.
        #[arg(long)]
        params: String,
        #[arg(long, default_value = "high")]
        encoding: Encoding,
        /// Print the full constraint listing instead of the summary.
        #[arg(long)]
        listing: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample problem files.
    Generate {
        domain: PathBuf,
        #[arg(long)]
        params: String,
        #[arg(long, default_value = "high")]
        encoding: Encoding,
        #[arg(long, default_value_t = 1)]
        count: usize,
        /// Per-instance solver limit in milliseconds.
        #[arg(long)]
        time_limit: Option<u64>,
        #[arg(long, default_value = "instances")]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Check a problem against the domain's instance constraints.
    Validate {
        domain: PathBuf,
        problem: PathBuf,
        /// Expected parameters; inferred from the objects when absent.
        #[arg(long)]
        params: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plan for a problem and report solvability and effort.
    Grade {
        domain: PathBuf,
        problem: PathBuf,
        #[arg(long)]
        max_expansions: Option<u64>,
        /// Search limit in milliseconds.
        #[arg(long)]
        time_limit: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Race generator configurations against a target.
    Tune {
        domain: PathBuf,
        /// `{"params": ..., "target": ..., "budget": N, "seed": S}`.
        config: PathBuf,
        #[arg(long, default_value = "high")]
        encoding: Encoding,
        /// Overrides the seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time generation per grid size and encoding, as CSV.
    Bench {
        domain: PathBuf,
        /// Sizes as `a..b` (inclusive) or `a,b,c`.
        #[arg(long, default_value = "2..10")]
        sizes: String,
        /// `low`, `high` or `both`.
        #[arg(long, default_value = "both")]
        encodings: String,
        /// Remaining parameters; unset counts default to 1.
        #[arg(long, default_value = "")]
        params: String,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        /// Per-row limit in milliseconds.
        #[arg(long, default_value_t = 300_000)]
        time_limit: u64,
        /// Report constraint counts without solving.
        #[arg(long)]
        count_only: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let argv: Vec<String> = std::env::args().collect();
    match commands::run(cli.command, &argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
