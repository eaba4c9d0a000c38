//! `gendim`: batch runs of the gendim toolkit driven by one TOML file.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 insufficient
//! data, 4 estimation failure, 5 a property test failed.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gendim::Error;

use commands::{Ctx, Format};
use config::RunConfig;
use report::{CmdResult, Outputs, Provenance};

#[derive(Parser)]
#[command(
    name = "gendim",
    version,
    about = "Generalized dimensions of flows and their sections"
)]
struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configuration seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Format of the primary tabular artifact.
    #[arg(long, global = true, value_enum, default_value = "json")]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Integrate a flow and write its trajectory.
    Simulate,
    /// Poincaré section, return map, roof and optional 1-D map diagnostics.
    Section,
    /// Generalized dimensions of a point cloud read from a file.
    Dq,
    /// Suspension additivity and roof invariance on synthetic measures.
    SuspensionTest,
    /// Singular section densities and their suspensions.
    SingularTest,
    /// Dimension lower bounds for the Lorenz attractor.
    LorenzCheck,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Section => "section",
            Command::Dq => "dq",
            Command::SuspensionTest => "suspension-test",
            Command::SingularTest => "singular-test",
            Command::LorenzCheck => "lorenz-check",
        }
    }
}

fn load_config(cli: &Cli) -> CmdResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            let mut cfg = RunConfig::from_toml(&text)?;
            // input paths are relative to the configuration file
            if let (Some(input), Some(dir)) = (&cfg.dq.input, path.parent()) {
                if input.is_relative() {
                    cfg.dq.input = Some(dir.join(input));
                }
            }
            cfg
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> CmdResult<String> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let cfg = load_config(cli)?;
    let resolved = serde_json::to_value(&cfg)?;
    let canonical = serde_json::to_vec(&resolved)?;
    let provenance = Provenance::new(cli.command.name(), cfg.seed, resolved, &canonical);
    let mut ctx = Ctx {
        cfg,
        out: Outputs {
            dir: cli.out.clone(),
            provenance,
        },
        format: cli.format,
    };
    match cli.command {
        Command::Simulate => commands::simulate(&ctx),
        Command::Section => commands::section(&ctx),
        Command::Dq => commands::dq(&mut ctx),
        Command::SuspensionTest => commands::suspension_test(&ctx),
        Command::SingularTest => commands::singular_test(&ctx),
        Command::LorenzCheck => commands::lorenz_check(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(line) => {
            println!("{line}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("gendim {}: {e}", cli.command.name());
            ExitCode::from(e.exit_code())
        }
    }
}
