//! `timelens` command-line front end.
//!
//! On success prints one JSON line on stdout; on failure one JSON line on
//! stderr and exits with the category's code.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use timelens::harness::{execute, Command, ErrorCategory, HarnessError, SweepRange};

#[derive(Parser, Debug)]
#[command(name = "timelens", version, about = "Temporal imaging simulator")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Propagate the scenario input through its imaging system.
    Simulate {
        scenario: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate design bounds from the scenario's [design] section.
    Design {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run the scenario over a parameter range.
    Sweep {
        scenario: PathBuf,
        /// Dotted parameter path, e.g. analysis.analyzer_phase.
        #[arg(long)]
        param: String,
        /// start:end:count, end excluded.
        #[arg(long, allow_hyphen_values = true)]
        range: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<String, HarnessError> {
    let (name, command, path, out) = match cli.command {
        Cmd::Simulate { scenario, out } => ("simulate", Command::Simulate, scenario, out),
        Cmd::Design { scenario, out } => ("design", Command::Design, scenario, out),
        Cmd::Sweep { scenario, param, range, out } => {
            let range: SweepRange = range.parse()?;
            ("sweep", Command::Sweep { param, range }, scenario, out)
        }
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| HarnessError::new(ErrorCategory::Io, format!("{}: {e}", path.display())))?;
    let env_out = std::env::var("TIMELENS_OUT_DIR").ok();
    let summary = execute(&command, &text, out.as_deref(), env_out.as_deref())?;
    Ok(summary.to_json(name))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let err = HarnessError::new(ErrorCategory::Usage, e.to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(line) => {
            println!("{line}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
