//! `spectemp` command line: training, forecasting, ablations, theory checks,
//! the signed-relation experiment and temporal 1-WL tests.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use serde_json::json;

use commands::Run;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Command {
    Train,
    Ablate,
    Theory,
    Twl,
    Synth,
    Forecast,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Train => "train",
            Command::Ablate => "ablate",
            Command::Theory => "theory",
            Command::Twl => "twl",
            Command::Synth => "synth",
            Command::Forecast => "forecast",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "spectemp", version, about = "Spectral-temporal graph forecasting experiments")]
struct Cli {
    command: Command,
    /// JSON config; omitted sections keep their defaults.
    #[arg(long)]
    config: PathBuf,
    /// Dotted-key override such as `model.degree=3`; values are read as JSON when they parse.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Error carrying the process exit code: 2 usage or config, 3 data, 4 numerical.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub msg: String,
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self { code: 2, msg: msg.into() }
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Self { code: 3, msg: msg.into() }
    }
}

impl From<spectemp::Error> for CliError {
    fn from(e: spectemp::Error) -> Self {
        use spectemp::Error as E;
        let code = match &e {
            E::Config(_) | E::Parameter(_) | E::Json(_) => 2,
            E::Shape(_) | E::Parse { .. } | E::Data(_) | E::Io(_) | E::Csv(_) => 3,
            E::NonConvergence(_) | E::Numerical(_) => 4,
        };
        Self { code, msg: e.to_string() }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = config::resolve(&cli.config, &cli.overrides)?;
    std::fs::create_dir_all(&cli.out)
        .map_err(|e| CliError::data(format!("cannot create output directory {}: {e}", cli.out.display())))?;
    let manifest = json!({
        "command": cli.command.name(),
        "seed": cli.seed,
        "config_file": cli.config,
        "overrides": cli.overrides,
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
    });
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::data(e.to_string()))? + "\n";
    std::fs::write(cli.out.join("manifest.json"), text)
        .map_err(|e| CliError::data(format!("cannot write manifest: {e}")))?;
    let ctx = Run { cfg: &cfg, seed: cli.seed, out: &cli.out };
    match cli.command {
        Command::Train => commands::train(&ctx),
        Command::Forecast => commands::forecast(&ctx),
        Command::Ablate => commands::ablate(&ctx),
        Command::Theory => commands::theory(&ctx),
        Command::Synth => commands::synth(&ctx),
        Command::Twl => commands::twl(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.msg);
            ExitCode::from(e.code)
        }
    }
}
