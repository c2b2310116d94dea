//! `papverify`: batch runs of the numerical checks with JSON or CSV output.
//!
//! Exit status is 0 when every check passes, 1 when a check fails or a
//! computation errors out, and 2 for invalid configuration.

mod commands;
mod report;
mod suites;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use report::{Format, Report};

#[derive(Parser, Debug)]
#[command(name = "papverify", version, about = "Reproducible checks for the KAK, spectral, sinh-system, certificate and witness toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// KAK round trips on random or given chamber points.
    Kak,
    /// Operator-norm sweeps against their bounds.
    Spectra,
    /// Ray coordinates from the sinh systems.
    Sinh,
    /// Plan and check a decay certificate between two chamber points.
    Certify,
    /// Multiplier pairings along the escape sequence.
    Demo,
    /// Constant tables.
    Constants,
    /// Every suite at batch size --samples.
    VerifyAll,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GroupArg {
    Sl3,
    Sp2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OpArg {
    Theta,
    T,
    S,
}

#[derive(clap::Args, Debug, Clone)]
pub struct Opts {
    /// Group: sl3 or sp2.
    #[arg(long, global = true, value_enum)]
    pub group: Option<GroupArg>,
    /// Exponent p > 1.
    #[arg(long, global = true, default_value_t = 2.0)]
    pub p: f64,
    /// Chamber point as comma-separated reals: r,s,t or beta,gamma.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub from: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub to: Option<String>,
    /// Number of grid points in a spectral sweep.
    #[arg(long, global = true, default_value_t = 64)]
    pub delta_grid: usize,
    /// Spectral cutoff, or sequence length for `demo`.
    #[arg(long, global = true)]
    pub cutoff: Option<u32>,
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Write the output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Spectral operator for `spectra`.
    #[arg(long, global = true, value_enum)]
    pub op: Option<OpArg>,
    /// Sp(2,R) constant C1; defaults to the fitted value.
    #[arg(long = "c1-sp2", global = true)]
    pub c1_sp2: Option<f64>,
    /// Sp(2,R) constant C2; defaults to the fitted value.
    #[arg(long = "c2-sp2", global = true)]
    pub c2_sp2: Option<f64>,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl From<pap_core::Error> for CliError {
    fn from(e: pap_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn validate(opts: &Opts) -> CliResult<()> {
    let bad = |m: String| Err(CliError::Config(m));
    if !(opts.p > 1.0) || !opts.p.is_finite() {
        return bad(format!("--p must be a finite real > 1, got {}", opts.p));
    }
    if opts.cutoff == Some(0) {
        return bad("--cutoff must be >= 1".into());
    }
    if opts.delta_grid == 0 {
        return bad("--delta-grid must be >= 1".into());
    }
    if opts.samples == Some(0) {
        return bad("--samples must be >= 1".into());
    }
    if let Some(t) = opts.tol {
        if !(t > 0.0) || !t.is_finite() {
            return bad(format!("--tol must be positive, got {t}"));
        }
    }
    for (name, v) in [("--c1-sp2", opts.c1_sp2), ("--c2-sp2", opts.c2_sp2)] {
        if let Some(v) = v {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
    }
    if opts.c1_sp2.is_some() != opts.c2_sp2.is_some() {
        return bad("--c1-sp2 and --c2-sp2 must be given together".into());
    }
    Ok(())
}

fn run(command: Command, opts: &Opts) -> CliResult<(Report, Format)> {
    validate(opts)?;
    let (report, default_format) = match command {
        Command::Kak => (commands::kak(opts)?, Format::Json),
        Command::Spectra => (commands::spectra(opts)?, Format::Csv),
        Command::Sinh => (commands::sinh(opts)?, Format::Json),
        Command::Certify => (commands::certify(opts)?, Format::Json),
        Command::Demo => (commands::demo(opts)?, Format::Csv),
        Command::Constants => (commands::constants(opts)?, Format::Json),
        Command::VerifyAll => (suites::verify_all(opts)?, Format::Json),
    };
    Ok((report, opts.format.unwrap_or(default_format)))
}

fn emit(text: &str, out: Option<&PathBuf>) -> std::io::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()
        }
    }
}

fn error_report(kind: &str, message: &str) {
    let body = json!({ "error": kind, "message": message });
    eprintln!("{body}");
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = std::panic::catch_unwind(|| run(cli.command, &cli.opts));
    match outcome {
        Ok(Ok((report, format))) => {
            if let Err(e) = emit(&report.render(format), cli.opts.out.as_ref()) {
                error_report("io", &e.to_string());
                return ExitCode::from(2);
            }
            for c in report.checks.iter().filter(|c| !c.passed) {
                eprintln!("check {} failed: {}", c.name, c.detail);
            }
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Ok(Err(CliError::Config(m))) => {
            error_report("config", &m);
            ExitCode::from(2)
        }
        Ok(Err(CliError::Runtime(m))) => {
            error_report("runtime", &m);
            ExitCode::from(1)
        }
        Err(_) => {
            error_report("runtime", "internal error");
            ExitCode::from(1)
        }
    }
}
