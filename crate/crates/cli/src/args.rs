//! Command-line arguments and value parsing.

use std::f64::consts::PI;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use obe_steady::{AngularMomentum, Frame};

#[derive(Debug, Parser)]
#[command(
    name = "obe-steady",
    version,
    about = "Steady states of Jg -> Je transitions in elliptically polarized light"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Steady state for one transition and field.
    Steady(SteadyArgs),
    /// Ellipticity and saturation scan of the absorption.
    Scan(ScanArgs),
    /// Dark states of the ground level.
    Dark(DarkArgs),
    /// Run the verification matrix.
    Verify(VerifyArgs),
    /// Steady state in a phase-diffusing field.
    Broadband(BroadbandArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Args)]
pub struct Transition {
    /// Ground angular momentum, e.g. 3/2 or 1.5.
    #[arg(long, allow_hyphen_values = true)]
    pub jg: String,
    /// Excited angular momentum.
    #[arg(long, allow_hyphen_values = true)]
    pub je: String,
}

#[derive(Debug, Args)]
pub struct Field {
    /// Ellipticity in radians; accepts `0.25pi` or `pi/8`.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    pub epsilon: String,
    /// Saturation parameter S.
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    pub saturation: String,
    /// Detuning in units of gamma.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    pub detuning: String,
    /// Rabi frequency magnitude in units of gamma; overrides --saturation.
    #[arg(long, allow_hyphen_values = true)]
    pub rabi: Option<String>,
    /// Phase of the Rabi frequency in radians.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    pub rabi_phase: String,
    /// Frame: natural-plus, natural-minus or conventional.
    #[arg(long, default_value = "natural-plus")]
    pub frame: String,
}

#[derive(Debug, Args)]
pub struct Output {
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Write to this file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SteadyArgs {
    #[command(flatten)]
    pub transition: Transition,
    #[command(flatten)]
    pub field: Field,
    /// Bandwidth mu in units of gamma; nonzero switches to the broadband solution.
    #[arg(long, default_value = "0")]
    pub bandwidth: String,
    /// Initial ground state for J -> J-1: `mixed` or a projection such as `1` or `-1/2`.
    #[arg(long, allow_hyphen_values = true)]
    pub initial: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub transition: Transition,
    /// Ellipticity grid: value, comma list, or `start:stop:count`.
    #[arg(long, default_value = "0:pi/4:17", allow_hyphen_values = true)]
    pub epsilon: String,
    /// Saturation grid, same syntax.
    #[arg(long, default_value = "0.001", allow_hyphen_values = true)]
    pub saturation: String,
    /// Accepted for symmetry; populations depend on the field only through S.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    pub detuning: String,
    #[arg(long, default_value = "0")]
    pub bandwidth: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct DarkArgs {
    #[command(flatten)]
    pub transition: Transition,
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    pub epsilon: String,
    /// Frame: natural-plus, natural-minus or conventional.
    #[arg(long, default_value = "natural-plus")]
    pub frame: String,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Largest angular momentum of the oracle grid.
    #[arg(long, default_value = "4")]
    pub max_j: String,
    /// Oracle tolerance.
    #[arg(long, default_value_t = 1e-8)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Realizations of the phase-diffusion ensemble.
    #[arg(long, default_value_t = 400)]
    pub realizations: usize,
    /// Run only these criteria, e.g. `1,9`.
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<u32>,
    /// Negative control: flip the sign of Clebsch-Gordan coefficients with m1 < 0.
    #[arg(long, hide = true)]
    pub inject_cg_sign_error: bool,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct BroadbandArgs {
    #[command(flatten)]
    pub transition: Transition,
    #[command(flatten)]
    pub field: Field,
    /// Bandwidth mu in units of gamma.
    #[arg(long, default_value = "1")]
    pub bandwidth: String,
    /// Also run a Monte-Carlo ensemble with this many realizations (at least 100).
    #[arg(long)]
    pub realizations: Option<usize>,
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    #[arg(long, default_value_t = 100.0)]
    pub burn_in: f64,
    #[arg(long, default_value_t = 100.0)]
    pub t_average: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

/// A usage error, reported with exit code 64.
#[derive(Debug)]
pub struct Usage(pub String);

pub fn momentum(s: &str) -> Result<AngularMomentum, Usage> {
    s.parse().map_err(|e: obe_steady::Error| Usage(e.to_string()))
}

/// A real number, optionally a multiple or fraction of `pi`.
pub fn real(s: &str) -> Result<f64, Usage> {
    let t = s.trim().to_ascii_lowercase();
    let bad = || Usage(format!("cannot parse number {s:?}"));
    let plain = |x: &str| -> Result<f64, Usage> {
        match x {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            _ => x.parse::<f64>().map_err(|_| bad()),
        }
    };
    let v = if let Some((head, den)) = t.split_once("pi/") {
        plain(head.trim_end_matches('*'))? * PI / den.parse::<f64>().map_err(|_| bad())?
    } else if let Some(head) = t.strip_suffix("pi") {
        plain(head.trim_end_matches('*'))? * PI
    } else {
        t.parse::<f64>().map_err(|_| bad())?
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

/// Value, comma list, or inclusive `start:stop:count` progression.
pub fn grid(s: &str) -> Result<Vec<f64>, Usage> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [a, b, n] => {
            let (a, b) = (real(a)?, real(b)?);
            let n: usize = n
                .trim()
                .parse()
                .map_err(|_| Usage(format!("bad grid count in {s:?}")))?;
            match n {
                0 => Err(Usage(format!("empty grid {s:?}"))),
                1 => Ok(vec![a]),
                _ => Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()),
            }
        }
        [_] => s.split(',').map(real).collect(),
        _ => Err(Usage(format!("grid {s:?} must be a value, a list or start:stop:count"))),
    }
}

pub fn single(s: &str, what: &str) -> Result<f64, Usage> {
    match grid(s)?.as_slice() {
        [v] => Ok(*v),
        _ => Err(Usage(format!("--{what} takes a single value here; use scan for grids"))),
    }
}

pub fn frame(s: &str) -> Result<Frame, Usage> {
    s.parse().map_err(|e: obe_steady::Error| Usage(e.to_string()))
}

/// Doubled signed projection from `1`, `-1/2` or `-0.5`.
pub fn projection(s: &str) -> Result<i32, Usage> {
    let t = s.trim();
    let bad = || Usage(format!("cannot parse projection {s:?}"));
    let (neg, body) = match t.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let two: i32 = body.parse::<AngularMomentum>().map_err(|_| bad())?.twice() as i32;
    Ok(if neg { -two } else { two })
}
