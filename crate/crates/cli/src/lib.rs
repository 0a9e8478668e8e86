//! Command-line front end: `ksdr simulate|fit|cv|benchmark|predict`.
//!
//! Settings come from built-in defaults, then an optional flat
//! `key = value` file given by `--config`, then flags. `--print-config`
//! prints the merged settings in config-file form and exits.

pub mod commands;
pub mod config;
pub mod data_io;
pub mod error;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "ksdr", version, about = "Nonlinear sufficient dimension reduction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Flat `key = value` settings file; flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Print the merged settings and exit.
    #[arg(long, global = true)]
    print_config: bool,
    #[command(flatten)]
    settings: Settings,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
enum Command {
    /// Generate a simulation design as CSV.
    Simulate,
    /// Estimate the reduction on a data file.
    Fit,
    /// Choose the penalty by cross-validation.
    Cv,
    /// Replicate simulation designs and summarize accuracy.
    Benchmark,
    /// Cross-validated prediction error of regression on the reduction.
    Predict,
}

#[derive(Debug, Args)]
struct Settings {
    /// Input CSV with a header row.
    #[arg(long, global = true)]
    input: Option<String>,
    /// Output directory (created if missing).
    #[arg(long, global = true)]
    output: Option<String>,
    /// Name of the response column.
    #[arg(long, global = true)]
    response: Option<String>,
    /// gsksir1, gsksir2, gsksave or ksir.
    #[arg(long, global = true)]
    method: Option<String>,
    /// Comma-separated methods for benchmark.
    #[arg(long, global = true)]
    methods: Option<String>,
    /// Reduced dimension.
    #[arg(long, global = true)]
    q: Option<String>,
    #[arg(long, global = true)]
    lambda: Option<String>,
    /// Comma-separated penalties for cv.
    #[arg(long, global = true)]
    lambda_grid: Option<String>,
    /// Response bandwidth, a number or `auto`.
    #[arg(long, global = true)]
    h1: Option<String>,
    /// Projected-feature bandwidth, a number or `auto`.
    #[arg(long, global = true)]
    h2: Option<String>,
    /// Second response bandwidth, a number or `auto`.
    #[arg(long, global = true)]
    h3: Option<String>,
    /// `adaptive` re-selects an automatic h2 at every step, `frozen`
    /// fixes it at the starting point.
    #[arg(long, global = true)]
    h2_mode: Option<String>,
    #[arg(long, global = true)]
    folds: Option<String>,
    #[arg(long, global = true)]
    reps: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    /// Benchmark threads.
    #[arg(long, global = true)]
    workers: Option<String>,
    /// kcca or prediction.
    #[arg(long, global = true)]
    criterion: Option<String>,
    /// case1, case2, case3 or all.
    #[arg(long, global = true)]
    case: Option<String>,
    /// Simulated sample size.
    #[arg(long, global = true)]
    n: Option<String>,
    /// Simulated predictor count (at least 10).
    #[arg(long, global = true)]
    p: Option<String>,
    #[arg(long, global = true)]
    kcca_reg: Option<String>,
    #[arg(long, global = true)]
    ridge_reg: Option<String>,
    #[arg(long, global = true)]
    max_iters: Option<String>,
    #[arg(long, global = true)]
    tol: Option<String>,
    #[arg(long, global = true)]
    n_slices: Option<String>,
}

impl Settings {
    fn pairs(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("input", &self.input),
            ("output", &self.output),
            ("response", &self.response),
            ("method", &self.method),
            ("methods", &self.methods),
            ("q", &self.q),
            ("lambda", &self.lambda),
            ("lambda-grid", &self.lambda_grid),
            ("h1", &self.h1),
            ("h2", &self.h2),
            ("h3", &self.h3),
            ("h2-mode", &self.h2_mode),
            ("folds", &self.folds),
            ("reps", &self.reps),
            ("seed", &self.seed),
            ("workers", &self.workers),
            ("criterion", &self.criterion),
            ("case", &self.case),
            ("n", &self.n),
            ("p", &self.p),
            ("kcca-reg", &self.kcca_reg),
            ("ridge-reg", &self.ridge_reg),
            ("max-iters", &self.max_iters),
            ("tol", &self.tol),
            ("n-slices", &self.n_slices),
        ]
    }
}

fn resolve(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    for (key, value) in cli.settings.pairs() {
        if let Some(v) = value {
            cfg.apply(key, v)?;
        }
    }
    Ok(cfg)
}

fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let cfg = resolve(cli)?;
    if cli.print_config {
        out.write_all(cfg.render().as_bytes())?;
        return Ok(());
    }
    match cli.command {
        Command::Simulate => commands::cmd_simulate(&cfg, out),
        Command::Fit => commands::cmd_fit(&cfg, out, err),
        Command::Cv => commands::cmd_cv(&cfg, out, err),
        Command::Benchmark => commands::cmd_benchmark(&cfg, out),
        Command::Predict => commands::cmd_predict(&cfg, out, err),
    }
}

/// Runs the command line `args` (program name first) and returns the exit
/// code: 0 success, 1 usage or configuration error, 2 data error, 3
/// numeric failure.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            let failure = CliError::Usage(e.kind().to_string());
            let _ = write!(err, "{e}");
            let _ = writeln!(err, "{}", failure.machine_line());
            return failure.exit_code();
        }
    };
    match dispatch(&cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            let _ = writeln!(err, "{}", e.machine_line());
            e.exit_code()
        }
    }
}
