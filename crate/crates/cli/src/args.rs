use std::path::PathBuf;

use chebyprod_core::{Functional, MomentSpec, Side, Tail};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::CliError;

#[derive(Debug, Parser, Serialize)]
#[command(name = "chebyprod", version, about = "Worst-case probability bounds for products of nonnegative random variables")]
pub struct Cli {
    /// Write output here instead of standard output.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Output format; each command has its own default.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[value(rename_all = "snake_case")]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Sharp bound on P(prod xi <= gamma) or P(prod xi >= gamma).
    Bound(BoundArgs),
    /// Several bounds over a grid of thresholds.
    Sweep(SweepArgs),
    /// Bound for a min, max or sum event.
    Generic(GenericArgs),
    /// Compare the bound with a primal lower bound from a gridded LP.
    Verify(VerifyArgs),
    /// Write the conic program of a product query as text.
    ExportSdp(ExportArgs),
    /// Worst-case value-at-risk along the mean-variance frontier.
    Portfolio(PortfolioArgs),
    /// Feasibility and regime thresholds of the moment data.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SpecArgs {
    /// Number of variables.
    #[arg(long = "T")]
    #[serde(rename = "T")]
    pub t: Option<usize>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub rho: Option<f64>,
    /// JSON object {"T":..,"mu":..,"sigma":..,"rho":..}, or @path to a file holding one.
    #[serde(skip_serializing_if = "Option::is_none")]
    #[arg(long, conflicts_with_all = ["t", "mu", "sigma", "rho"])]
    pub spec: Option<String>,
}

impl SpecArgs {
    pub fn resolve(&self) -> Result<MomentSpec, CliError> {
        if let Some(s) = &self.spec {
            let text = match s.strip_prefix('@') {
                Some(path) => std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{path}: {e}")))?,
                None => s.clone(),
            };
            return serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("--spec: {e}")));
        }
        match (self.t, self.mu, self.sigma, self.rho) {
            (Some(t), Some(mu), Some(sigma), Some(rho)) => Ok(MomentSpec::new(t, mu, sigma, rho)),
            _ => Err(CliError::Usage("give --T, --mu, --sigma and --rho, or --spec".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[value(rename_all = "snake_case")]
#[serde(rename_all = "snake_case")]
pub enum SideArg {
    Left,
    Right,
}

impl From<SideArg> for Side {
    fn from(s: SideArg) -> Side {
        match s {
            SideArg::Left => Side::Left,
            SideArg::Right => Side::Right,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct BoundArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    #[arg(long, value_enum)]
    pub side: SideArg,
    #[arg(long)]
    pub gamma: f64,
    /// Right side: the closed-form relaxed bound. Left side: the exact bound, which coincides.
    #[arg(long)]
    pub relaxed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[value(rename_all = "snake_case")]
#[serde(rename_all = "snake_case")]
pub enum Column {
    ExactLeft,
    ExactRight,
    RelaxedRight,
    Mo,
    SumGeq,
    SumLeq,
    MinGeq,
    MinLeq,
    MaxGeq,
    MaxLeq,
}

impl Column {
    pub fn name(self) -> &'static str {
        match self {
            Column::ExactLeft => "exact_left",
            Column::ExactRight => "exact_right",
            Column::RelaxedRight => "relaxed_right",
            Column::Mo => "mo",
            Column::SumGeq => "sum_geq",
            Column::SumLeq => "sum_leq",
            Column::MinGeq => "min_geq",
            Column::MinLeq => "min_leq",
            Column::MaxGeq => "max_geq",
            Column::MaxLeq => "max_leq",
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    #[arg(long)]
    pub gamma_min: f64,
    #[arg(long)]
    pub gamma_max: f64,
    #[arg(long, default_value_t = 50)]
    pub points: usize,
    /// Evenly spaced thresholds instead of geometric spacing.
    #[arg(long)]
    pub linear: bool,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Column::ExactLeft, Column::ExactRight, Column::RelaxedRight, Column::Mo])]
    pub bounds: Vec<Column>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[value(rename_all = "snake_case")]
#[serde(rename_all = "snake_case")]
pub enum EventArg {
    MinLeq,
    MinGeq,
    MaxLeq,
    MaxGeq,
    SumLeq,
    SumGeq,
}

impl EventArg {
    pub fn parts(self) -> (Functional, Tail) {
        match self {
            EventArg::MinLeq => (Functional::Min, Tail::Leq),
            EventArg::MinGeq => (Functional::Min, Tail::Geq),
            EventArg::MaxLeq => (Functional::Max, Tail::Leq),
            EventArg::MaxGeq => (Functional::Max, Tail::Geq),
            EventArg::SumLeq => (Functional::Sum, Tail::Leq),
            EventArg::SumGeq => (Functional::Sum, Tail::Geq),
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct GenericArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    #[arg(long, value_enum)]
    pub event: EventArg,
    #[arg(long)]
    pub gamma: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    #[arg(long, value_enum)]
    pub side: SideArg,
    #[arg(long)]
    pub gamma: f64,
    /// Grid values per coordinate.
    #[arg(long, default_value_t = 40)]
    pub grid: usize,
    /// Largest accepted dual - primal gap.
    #[arg(long, default_value_t = 1e-6)]
    pub tolerance: f64,
    /// Use the plain grid only, without atoms derived from the dual solution.
    #[arg(long)]
    pub no_seed: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct ExportArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    #[arg(long, value_enum)]
    pub side: SideArg,
    #[arg(long)]
    pub gamma: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct PortfolioArgs {
    /// CSV of per-period returns, one column per asset.
    #[arg(long)]
    pub returns: PathBuf,
    #[arg(long)]
    pub horizon: usize,
    #[arg(long, default_value_t = 0.05)]
    pub epsilon: f64,
    /// Frontier points.
    #[arg(long, default_value_t = 11)]
    pub points: usize,
    /// Correlation between periods; 0 is the white-noise assumption.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub rho: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub bisect_tol: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
}
