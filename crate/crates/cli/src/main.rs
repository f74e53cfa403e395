//! `gausstopo` command-line front end.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::CliError;
use crate::config::{split_overrides, RunConfig};
use crate::output::Provenance;

/// Dissipative SSH chain: spectra, winding traces, phase diagrams.
///
/// Any config value can be overridden with `--section.key=value`,
/// e.g. `--model.u=1.3 --grid.n_k=512`.
#[derive(Parser, Debug)]
#[command(name = "gausstopo", version)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output.directory`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Eigenvalues of every Bloch damping block with its PT label.
    Spectrum,
    /// Winding number against time plus the refined transition list.
    Trace,
    /// Region labels over the configured (u, w) grid.
    PhaseDiagram,
    /// Cross-engine and structural consistency report.
    Validate,
}

fn run() -> Result<Vec<PathBuf>, CliError> {
    let (args, overrides) = split_overrides(std::env::args().collect())?;
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let cfg = RunConfig::load(cli.config.as_deref(), &overrides, cli.out.as_deref())?;
    let prov = Provenance { config_sha256: cfg.hash() };
    match cli.command {
        Command::Spectrum => commands::spectrum(&cfg, &prov),
        Command::Trace => commands::trace(&cfg, &prov),
        Command::PhaseDiagram => commands::phase_diagram(&cfg, &prov),
        Command::Validate => commands::validate(&cfg, &prov),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("gausstopo: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
