//! `pulse-dde` command-line front end.
//!
//! Exit codes: 0 success, 2 validation error, 1 internal error or failed
//! verification.

mod commands;
mod config;
mod output;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use config::{AmplitudeSpec, CrossingSel, TimeSpec};
use output::Format;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Internal(String),
    /// Verification ran but some checks failed.
    Failed(usize),
}

impl From<pulse_dde::Error> for CliError {
    fn from(e: pulse_dde::Error) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Internal(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(format!("i/o: {e}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirArg {
    Inc,
    Dec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ParamArg {
    A,
    Sigma,
    BetaU,
    Tau,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ContinuationArg {
    Warm,
    Cold,
}

#[derive(Debug, Parser)]
#[command(name = "pulse-dde", version, about = "Pulse-perturbed piecewise-constant delay feedback model")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    pub format: Format,
    /// Grid size for clm, sweep and embed.
    #[arg(long, global = true)]
    pub mesh: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub direction: Option<DirArg>,
    /// Seed for the randomized verification cases.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Run grid commands on one thread.
    #[arg(long, global = true)]
    pub sequential: bool,

    #[arg(long, global = true)]
    pub tau: Option<f64>,
    #[arg(long = "beta-u", global = true)]
    pub beta_u: Option<f64>,
    #[arg(long = "beta-l", global = true)]
    pub beta_l: Option<f64>,
    /// First pulse onset: a number, `z1`, `z2` or `t_max`.
    #[arg(long, global = true)]
    pub delta0: Option<TimeSpec>,
    #[arg(long, global = true)]
    pub sigma: Option<f64>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Pulse amplitude.
    #[arg(long, global = true)]
    pub a: Option<f64>,

    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Integrate and write the trajectory.
    Simulate {
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Closed-form unperturbed cycle.
    LimitCycle,
    /// Case label, thresholds and response of one pulse.
    Classify {
        #[arg(long)]
        delta: Option<TimeSpec>,
    },
    /// Cycle-length map and resetting time over a grid of onsets.
    Clm,
    /// Closed-form cycle under periodic forcing.
    ForcedCycle,
    /// Frequency locking ratio of a forced run.
    Lock {
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        t_lo: Option<f64>,
    },
    /// Dosing schedules and the neutrophil model.
    #[command(subcommand)]
    Treat(TreatCmd),
    /// Orbit diagram by one-parameter continuation.
    Sweep {
        #[arg(long, value_enum)]
        parameter: Option<ParamArg>,
        #[arg(long)]
        lo: Option<f64>,
        #[arg(long)]
        hi: Option<f64>,
        #[arg(long, value_enum)]
        continuation: Option<ContinuationArg>,
    },
    /// Projected Poincaré section.
    Poincare {
        #[arg(long)]
        level: Option<f64>,
        #[arg(long, value_enum)]
        crossing: Option<CrossingSel>,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        t_lo: Option<f64>,
    },
    /// Delay embedding `(x(t - tau), x(t))`.
    Embed {
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        t_lo: Option<f64>,
    },
    /// Residual and analytic-vs-numeric oracle suite.
    Verify {
        #[arg(long)]
        random_cases: Option<usize>,
    },
}

#[derive(Debug, Subcommand)]
pub enum TreatCmd {
    /// Shortest rest between doses keeping the minimum at `x_norm`.
    MinRestInterval {
        #[arg(long)]
        x_norm: Option<f64>,
    },
    /// Dose and rest placing the forced cycle in a band.
    FitBand {
        #[arg(long)]
        x_norm: Option<f64>,
        #[arg(long)]
        f_min: Option<f64>,
        #[arg(long)]
        f_max: Option<f64>,
    },
    /// Daily G-CSF dosing on the mapped neutrophil model.
    Gcsf {
        /// Dose: a number, `a1` or `physiological`.
        #[arg(long)]
        amplitude: Option<AmplitudeSpec>,
        #[arg(long)]
        start_day: Option<f64>,
        #[arg(long)]
        end_day: Option<f64>,
    },
    /// Nadir and amplitude over a grid of chemotherapy periods.
    ChemoScan {
        #[arg(long)]
        window_lo: Option<f64>,
        #[arg(long)]
        window_hi: Option<f64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Internal(m)) => {
            eprintln!("internal error: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Failed(n)) => {
            eprintln!("verification failed: {n} check(s) out of tolerance");
            ExitCode::from(1)
        }
    }
}
