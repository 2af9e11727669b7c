mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{parse_override, RunConfig};
use error::CliError;

/// Time-periodic breathers by the dual variational method.
#[derive(Debug, Parser)]
#[command(name = "breather", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Assumption checks, solve with deflation, verification and artifacts.
    Solve(Common),
    /// Re-verify a stored solution directory.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Directory holding V.field (and optionally U.field).
        #[arg(long)]
        solution: PathBuf,
    },
    /// Operator-norm decay of the weighted resolvent as CSV.
    ResolventBench(Common),
    /// Repeated solves along `sweep.axis` over `sweep.values`.
    Sweep(Common),
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// `key=value`, applied after the file; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Common {
    fn load(&self) -> Result<RunConfig, CliError> {
        let mut overrides = self
            .overrides
            .iter()
            .map(|o| parse_override(o))
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(out) = &self.out {
            overrides.push(("output.dir".into(), out.display().to_string().into()));
        }
        if let Some(seed) = self.seed {
            overrides.push(("run.seed".into(), toml::Value::Integer(seed as i64)));
        }
        if let Some(threads) = self.threads {
            overrides.push(("run.threads".into(), toml::Value::Integer(threads as i64)));
        }
        let config = RunConfig::load(&self.config, &overrides)?;
        commands::init_threads(config.run.threads);
        Ok(config)
    }
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Solve(c) => commands::solve(&c.load()?),
        Command::Verify { common, solution } => {
            let config = common.load()?;
            commands::verify(&config, &solution, common.out.as_deref())
        }
        Command::ResolventBench(c) => commands::resolvent_bench(&c.load()?),
        Command::Sweep(c) => commands::sweep(&c.load()?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
