use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

mod commands;
mod error;
mod manifest;
mod output;
mod source;

use error::CliError;
use manifest::RunManifest;

#[derive(Parser, Debug)]
#[command(
    name = "gfol",
    version,
    about = "Weak metric structures and partial Ricci flow on Lie foliation models"
)]
struct Cli {
    /// Write a run manifest (inputs, config, outputs, seed) to this path.
    #[arg(long, global = true, value_name = "PATH")]
    manifest: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List the built-in model families.
    Models(commands::models::Args),
    /// Classify a framed structure on a model.
    Verify(commands::verify::Args),
    /// Connection, curvature and foliation tensors of a model.
    Geometry(commands::geometry::Args),
    /// Integrate the partial Ricci flow.
    Flow(commands::flow::Args),
    /// Evaluate the scalar closed forms.
    ClosedForm(commands::closed_form::Args),
}

/// Exit status reported by a command that ran to completion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Ok = 0,
    ExpectationFailed = 1,
    NotConverged = 2,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(64),
            };
        }
    };
    match run(cli) {
        Ok(status) => ExitCode::from(status as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<Status, CliError> {
    let name = match &cli.command {
        Command::Models(_) => "models",
        Command::Verify(_) => "verify",
        Command::Geometry(_) => "geometry",
        Command::Flow(_) => "flow",
        Command::ClosedForm(_) => "closed-form",
    };
    let mut manifest = RunManifest::start(name, std::env::args().collect());
    let status = match &cli.command {
        Command::Models(args) => commands::models::run(args, &mut manifest),
        Command::Verify(args) => commands::verify::run(args, &mut manifest),
        Command::Geometry(args) => commands::geometry::run(args, &mut manifest),
        Command::Flow(args) => commands::flow::run(args, &mut manifest),
        Command::ClosedForm(args) => commands::closed_form::run(args, &mut manifest),
    }?;
    if let Some(path) = &cli.manifest {
        manifest.write(path)?;
    }
    Ok(status)
}
