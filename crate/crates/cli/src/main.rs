//! `depthnav`: render, fill, trial and serve subcommands over files.

mod error;
mod fill;
mod render;
mod serve;
mod trial;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use depthnav::config::load_config;
use depthnav::PipelineConfig;

use crate::error::{exit, CliError, CliResult, EXIT_CODES_HELP};

#[derive(Debug, Parser)]
#[command(name = "depthnav", version, about = "Depth-camera navigation aid: simulate, correct, encode, evaluate", after_help = EXIT_CODES_HELP)]
struct Cli {
    /// Pipeline configuration (TOML); missing keys take their defaults.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Print the fully resolved configuration and exit.
    #[arg(long, global = true)]
    print_config: bool,
    /// Do not echo the resolved configuration to stderr.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Raycast a scene into DNV1 depth and guidance streams.
    Render(render::RenderArgs),
    /// Correct a depth stream and report per-frame fill metrics.
    Fill(fill::FillArgs),
    /// Run the scripted (or random) walker over the generated paths.
    Trial(trial::TrialArgs),
    /// Serve interactive sessions over TCP (NDJSON) and WebSocket.
    Serve(serve::ServeArgs),
}

fn run(cli: Cli) -> CliResult<()> {
    let config = load_config(cli.config.as_deref())?;
    if cli.print_config {
        print!("{}", config.to_toml());
        return Ok(());
    }
    let Some(command) = cli.command else {
        return Err(CliError::Usage("no subcommand given (see --help)".into()));
    };
    if !cli.quiet {
        echo_config(&config);
    }
    match command {
        Command::Render(args) => render::run(&args, &config),
        Command::Fill(args) => fill::run(&args, &config),
        Command::Trial(args) => trial::run(&args, &config),
        Command::Serve(args) => serve::run(&args, &config),
    }
}

/// Records the exact parameters of a run alongside its output.
fn echo_config(config: &PipelineConfig) {
    eprintln!("# resolved configuration");
    for line in config.to_toml().lines() {
        eprintln!("# {line}");
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::from(exit::OK),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
