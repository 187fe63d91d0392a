use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use unified_prox_cli::commands::{cmd_run, cmd_tradeoff, cmd_verify};
use unified_prox_cli::config::{read_json, RunConfig, TradeoffConfig, VerifyConfig};
use unified_prox_cli::{reason_line, CliError, Outcome, EXIT_FAILED, EXIT_USAGE};

#[derive(Parser, Debug)]
#[command(version, about = "Run, verify and sweep decentralized proximal-gradient experiments")]
struct Args {
    #[command(subcommand)]
    command: Command,

    /// JSON config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Overrides the seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Run one method and certify its rate.
    Run,
    /// Check the contraction inequalities on random samples.
    Verify,
    /// Tabulate communication rounds per gradient step.
    Tradeoff,
}

fn base_dir(config: &Option<PathBuf>) -> PathBuf {
    config
        .as_deref()
        .and_then(Path::parent)
        .map(Path::to_path_buf)
        .unwrap_or_default()
}

fn dispatch(args: &Args) -> Result<Outcome, CliError> {
    let base = base_dir(&args.config);
    match args.command {
        Command::Run => {
            let path = args
                .config
                .as_deref()
                .ok_or_else(|| CliError::Config("run needs --config".into()))?;
            let cfg: RunConfig = read_json(path)?;
            cmd_run(&cfg, &base, &args.out, args.seed)
        }
        Command::Verify => {
            let cfg = match &args.config {
                Some(path) => read_json(path)?,
                None => VerifyConfig::default(),
            };
            cmd_verify(&cfg, &base, &args.out, args.seed)
        }
        Command::Tradeoff => {
            let cfg = match &args.config {
                Some(path) => read_json(path)?,
                None => TradeoffConfig::default(),
            };
            cmd_tradeoff(&cfg, &base, &args.out, args.seed)
        }
    }
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or_default();
            eprintln!("{}", reason_line(EXIT_USAGE, "usage", first));
            return ExitCode::from(EXIT_USAGE as u8);
        }
    };
    match dispatch(&args) {
        Ok(Outcome { pass: true, .. }) => ExitCode::SUCCESS,
        Ok(Outcome { reason, .. }) => {
            let reason = reason.unwrap_or_default();
            eprintln!("{}", reason_line(EXIT_FAILED, "check_failed", &reason));
            ExitCode::from(EXIT_FAILED as u8)
        }
        Err(e) => {
            let code = e.exit_code();
            eprintln!("{}", reason_line(code, e.kind(), &e.to_string()));
            ExitCode::from(code as u8)
        }
    }
}
