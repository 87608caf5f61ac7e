// SPDX-License-Identifier: Apache-2.0

//! `mebench`: ingestion, fold plans, guarded training runs, studies, audits
//! and merged reports.

mod commands;
mod config;
mod merge;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::ProtocolKind;

/// Exit statuses other than 0 (success) and 1 (runtime error).
pub mod status {
    pub const CONFIG: u8 = 2;
    pub const TAINTED: u8 = 3;
    pub const INCOMPLETE: u8 = 4;
}

#[derive(Parser, Debug)]
#[command(name = "mebench", version, about = "Micro-expression AU benchmark runner")]
struct Cli {
    /// Worker threads for folds and seeds. Defaults to all cores.
    #[arg(long, global = true, env = "MEBENCH_JOBS")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

/// Where the input tables come from: a config file, or a single annotation
/// sheet with its schema.
#[derive(Args, Debug, Clone)]
pub struct Inputs {
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Annotation sheet (or normalized table when --schema is absent).
    #[arg(conflicts_with = "config")]
    pub annotations: Vec<PathBuf>,
    #[arg(long, requires = "annotations")]
    pub schema: Option<String>,
    /// Directory of schema TOML files.
    #[arg(long, default_value = "schemas")]
    pub schemas: PathBuf,
}

#[derive(Args, Debug, Clone, Default)]
pub struct LeakFlags {
    /// Run leak-prone configurations as a labelled demonstration.
    #[arg(long)]
    pub leak_demo: bool,
    /// Second half of the leak-demo opt-in.
    #[arg(long)]
    pub allow_test_leakage: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Normalize annotation sheets into table files.
    Ingest {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, short, env = "MEBENCH_OUT")]
        out: Option<PathBuf>,
    },
    /// Per-dataset sample, subject and AU statistics.
    Stats {
        #[command(flatten)]
        inputs: Inputs,
        /// Print full statistics as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Build and write a fold plan.
    Plan {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, value_enum)]
        protocol: Option<ProtocolKind>,
        /// Holdout test dataset code.
        #[arg(long)]
        test: Option<String>,
        #[arg(long, short, env = "MEBENCH_OUT")]
        out: Option<PathBuf>,
    },
    /// Train and score one model under the configured protocol.
    Run {
        #[arg(long, short)]
        config: PathBuf,
        #[command(flatten)]
        leak: LeakFlags,
        #[arg(long, short, env = "MEBENCH_OUT")]
        out: Option<PathBuf>,
    },
    /// Run one of the predefined studies.
    Study {
        #[arg(long, short)]
        config: Option<PathBuf>,
        /// Study name; overrides the config's `study.study`.
        #[arg(long)]
        study: Option<String>,
        #[command(flatten)]
        leak: LeakFlags,
        #[arg(long, short, env = "MEBENCH_OUT")]
        out: Option<PathBuf>,
    },
    /// Recompute the leak verdict of a stored run.
    Audit {
        run: PathBuf,
        /// Also write the verdict as JSON.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Merge run and study outputs into one set of tables.
    Report {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, short, env = "MEBENCH_OUT")]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: --jobs: {e}");
            return ExitCode::from(status::CONFIG);
        }
    }
    let result = match cli.command {
        Command::Ingest { inputs, out } => commands::ingest(&inputs, out),
        Command::Stats { inputs, json } => commands::stats(&inputs, json),
        Command::Plan { inputs, protocol, test, out } => commands::plan(&inputs, protocol, test, out),
        Command::Run { config, leak, out } => commands::run(&config, &leak, out),
        Command::Study { config, study, leak, out } => commands::study(config.as_deref(), study, &leak, out),
        Command::Audit { run, out } => commands::audit(&run, out),
        Command::Report { inputs, out } => merge::report(&inputs, out),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = if e.downcast_ref::<config::ConfigError>().is_some() { status::CONFIG } else { 1 };
            ExitCode::from(code)
        }
    }
}
