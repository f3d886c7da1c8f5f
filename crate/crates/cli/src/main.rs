//! `fde-decay`: run scenarios, classify them, check σ, estimate decay rates.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "fde-decay",
    version,
    about = "Decay rates of delay and max-functional equations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Override the solver horizon.
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Output root; files go to `<out>/<id>/`. `FDE_DECAY_OUT` takes precedence.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override the relative tolerance used for pass/fail.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate and write trajectory, observable series and manifest.
    Simulate(Common),
    /// Print the regime report as JSON.
    Classify(Common),
    /// Check the σ conditions and print the report as JSON.
    SigmaCheck(Common),
    /// Integrate, estimate the rate and compare it with the prediction.
    Rate(Common),
    /// Print λ₁..λₙ and the gaps Λ − λₙ.
    LambdaSeq {
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
        #[arg(long)]
        q: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = 20)]
        n: usize,
    },
    /// Run `rate` over every scenario matching a glob and merge the summary rows.
    Sweep {
        /// Glob pattern for scenario files.
        #[arg(long)]
        config: String,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, default_value_t = 1)]
        parallel: usize,
    },
}

fn main() -> ExitCode {
    // clap exits with 2 on usage errors, which is reserved for stalls here
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let res = match cli.command {
        Command::Simulate(c) => commands::simulate(&c),
        Command::Classify(c) => commands::classify(&c),
        Command::SigmaCheck(c) => commands::sigma_check(&c),
        Command::Rate(c) => commands::rate(&c),
        Command::LambdaSeq { a, b, q, beta, n } => commands::lambda_seq(a, b, q, beta, n),
        Command::Sweep {
            config,
            t_end,
            out,
            tol,
            parallel,
        } => commands::sweep(&config, t_end, out, tol, parallel),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
