mod args;
mod commands;

use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command, Format};
use commands::Report;

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    /// Exit 2.
    Usage(String),
    /// Exit 3: the moment data admit no (strictly) feasible distribution.
    Infeasible(String),
    /// Exit 3, after writing the validation report.
    Rejected { report: Report, error: chebyprod_core::Error },
    /// Exit 4.
    Solver(String),
    /// Exit 5, after writing the verification report.
    Gap { report: Report, gap: f64, tolerance: f64 },
}

impl std::fmt::Debug for Report {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("Report")
    }
}

impl From<chebyprod_core::Error> for CliError {
    fn from(e: chebyprod_core::Error) -> Self {
        use chebyprod_core::Error as E;
        match e {
            E::Structural(_) | E::InvalidArgument(_) => CliError::Usage(e.to_string()),
            E::Infeasible(_) | E::NotStrict => CliError::Infeasible(format!(
                "{e}; a nonnegative distribution needs mu^2 + rho sigma^2 >= 0 (strictly, for bounds)"
            )),
            E::ZeroPolynomial | E::EmptyDomain(..) | E::Lp(_) | E::Sip(_) | E::GridInfeasible => CliError::Solver(e.to_string()),
        }
    }
}

fn write_report(report: &Report, path: Option<&Path>) -> anyhow::Result<()> {
    let mut text = match report {
        Report::Json(v) => serde_json::to_string_pretty(v)?,
        Report::Text(s) => s.clone(),
    };
    if !text.ends_with('\n') {
        text.push('\n');
    }
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("CHEBYPROD_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("CHEBYPROD_THREADS = {v:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Solver(e.to_string()))
}

fn run(cli: &Cli) -> Result<Report, CliError> {
    init_threads()?;
    let fmt = |default| cli.format.unwrap_or(default);
    match &cli.command {
        Command::Bound(a) => commands::bound(a, fmt(Format::Json)),
        Command::Sweep(a) => commands::sweep(a, fmt(Format::Csv)),
        Command::Generic(a) => commands::generic(a, fmt(Format::Json)),
        Command::Verify(a) => commands::verify(a, fmt(Format::Json)),
        Command::ExportSdp(a) => match cli.format {
            None => commands::export_sdp(a),
            Some(_) => Err(CliError::Usage("export-sdp writes its own text format; drop --format".into())),
        },
        Command::Portfolio(a) => commands::portfolio(a, fmt(Format::Csv)),
        Command::Validate(a) => commands::validate(a, fmt(Format::Json)),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let out = cli.output.as_deref();
    let (report, code, msg) = match run(&cli) {
        Ok(r) => (Some(r), 0, None),
        Err(CliError::Usage(m)) => (None, 2, Some(m)),
        Err(CliError::Infeasible(m)) => (None, 3, Some(m)),
        Err(CliError::Rejected { report, error }) => (Some(report), 3, Some(CliError::from(error).message())),
        Err(CliError::Solver(m)) => (None, 4, Some(m)),
        Err(CliError::Gap { report, gap, tolerance }) => {
            (Some(report), 5, Some(format!("verification gap {gap:e} exceeds tolerance {tolerance:e}")))
        }
    };
    if let Some(r) = report {
        if let Err(e) = write_report(&r, out) {
            eprintln!("chebyprod: {e}");
            return ExitCode::from(4);
        }
    }
    if let Some(m) = msg {
        eprintln!("chebyprod: {m}");
    }
    ExitCode::from(code)
}

impl CliError {
    fn message(self) -> String {
        match self {
            CliError::Usage(m) | CliError::Infeasible(m) | CliError::Solver(m) => m,
            CliError::Rejected { error, .. } => error.to_string(),
            CliError::Gap { gap, tolerance, .. } => format!("gap {gap:e} > {tolerance:e}"),
        }
    }
}
