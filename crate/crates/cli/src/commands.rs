use std::fs::File;

use chebyprod_core::analytic::{
    absorption_threshold, gamma_bar_threshold, is_absorbed, mo_bound, perturbed_distribution, relaxed_right_bound,
    above_gamma_bar,
};
use chebyprod_core::generic_bounds::generic_bound;
use chebyprod_core::portfolio::{estimate_moments, frontier_sweep, FrontierOptions, FwOptions, ReturnPanel};
use chebyprod_core::primal_oracle::{lower_bound_lp, GridSpec};
use chebyprod_core::product_bounds::{assemble_sdp, product_bound, verification_atoms};
use chebyprod_core::sip::SipOptions;
use chebyprod_core::{BoundOptions, BoundQuery, Error, Event, MomentSpec, Side};
use log::warn;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::{
    BoundArgs, Column, ExportArgs, Format, GenericArgs, PortfolioArgs, SideArg, SweepArgs, ValidateArgs, VerifyArgs,
};
use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Finished output of one command.
pub enum Report {
    Json(Value),
    Text(String),
}

fn envelope(command: &str, config: &impl Serialize, result: Value) -> Report {
    Report::Json(json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": config,
        "result": result,
    }))
}

fn csv_text(command: &str, config: &impl Serialize, header: &[String], rows: &[Vec<String>]) -> Result<Report, CliError> {
    let cfg = serde_json::to_string(&json!({ "schema_version": SCHEMA_VERSION, "command": command, "config": config }))
        .map_err(|e| CliError::Solver(e.to_string()))?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Solver(e.to_string());
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    let body = String::from_utf8(w.into_inner().map_err(|e| CliError::Solver(e.to_string()))?)
        .map_err(|e| CliError::Solver(e.to_string()))?;
    Ok(Report::Text(format!("# {cfg}\n{body}")))
}

fn query(spec: MomentSpec, gamma: f64, side: SideArg) -> Result<BoundQuery, CliError> {
    let q = BoundQuery::new(spec, gamma, side.into());
    q.validate()?;
    Ok(q)
}

pub fn bound(a: &BoundArgs, fmt: Format) -> Result<Report, CliError> {
    need_json(fmt, "bound")?;
    let q = query(a.spec.resolve()?, a.gamma, a.side)?;
    let result = if a.relaxed && q.side == Side::Right {
        let b = relaxed_right_bound(&q.spec, q.gamma)?;
        json!({ "value": b.value, "bound": "relaxed_right", "regime": b.regime, "shortcut": null, "dual": null })
    } else {
        let r = product_bound(&q, &BoundOptions::default())?;
        let mut v = json!({
            "value": r.reported(),
            "bound": if q.side == Side::Left { "exact_left" } else { "exact_right" },
            "shortcut": r.shortcut.map(|s| s.tag()),
            "dual": r.dual,
            "diagnostics": {
                "raw_value": r.value,
                "iterations": r.iterations,
                "max_violation": r.max_violation,
                "certified_upper": r.certified_upper,
            },
        });
        if a.relaxed {
            v["note"] = json!("the relaxed left bound equals the exact left bound");
        }
        v
    };
    Ok(envelope("bound", a, result))
}

fn grid(a: &SweepArgs) -> Result<Vec<f64>, CliError> {
    let (lo, hi, n) = (a.gamma_min, a.gamma_max, a.points);
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) || n == 0 {
        return Err(CliError::Usage(format!("need 0 < gamma-min <= gamma-max and points >= 1, got {lo}, {hi}, {n}")));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let f = |i: usize| i as f64 / (n - 1) as f64;
    Ok((0..n)
        .map(|i| if a.linear { lo + (hi - lo) * f(i) } else { lo * (hi / lo).powf(f(i)) })
        .collect())
}

fn column_value(spec: &MomentSpec, gamma: f64, col: Column) -> chebyprod_core::Result<f64> {
    let opts = BoundOptions::default();
    let generic = |ev: Event| generic_bound(spec, &ev, &SipOptions::default()).map(|r| r.value.clamp(0.0, 1.0));
    use chebyprod_core::{Functional as F, Tail as T};
    match col {
        Column::ExactLeft => product_bound(&BoundQuery::new(*spec, gamma, Side::Left), &opts).map(|r| r.reported()),
        Column::ExactRight => product_bound(&BoundQuery::new(*spec, gamma, Side::Right), &opts).map(|r| r.reported()),
        Column::RelaxedRight => relaxed_right_bound(spec, gamma).map(|b| b.value),
        Column::Mo => mo_bound(spec, gamma).map(|b| b.value),
        Column::SumGeq => generic(Event::new(F::Sum, T::Geq, gamma)),
        Column::SumLeq => generic(Event::new(F::Sum, T::Leq, gamma)),
        Column::MinGeq => generic(Event::new(F::Min, T::Geq, gamma)),
        Column::MinLeq => generic(Event::new(F::Min, T::Leq, gamma)),
        Column::MaxGeq => generic(Event::new(F::Max, T::Geq, gamma)),
        Column::MaxLeq => generic(Event::new(F::Max, T::Leq, gamma)),
    }
}

pub fn sweep(a: &SweepArgs, fmt: Format) -> Result<Report, CliError> {
    let spec = a.spec.resolve()?;
    spec.ensure_strict()?;
    let gammas = grid(a)?;
    let rows: Vec<Vec<f64>> = gammas
        .par_iter()
        .map(|&g| {
            a.bounds
                .iter()
                .map(|&c| {
                    column_value(&spec, g, c).unwrap_or_else(|e| {
                        warn!("{} at gamma = {g}: {e}", c.name());
                        f64::NAN
                    })
                })
                .collect()
        })
        .collect();
    match fmt {
        Format::Json => {
            let rows: Vec<Value> = gammas
                .iter()
                .zip(&rows)
                .map(|(g, r)| {
                    let mut o = serde_json::Map::new();
                    o.insert("gamma".into(), json!(g));
                    for (c, v) in a.bounds.iter().zip(r) {
                        o.insert(c.name().into(), json!(v));
                    }
                    Value::Object(o)
                })
                .collect();
            Ok(envelope("sweep", a, json!({ "rows": rows })))
        }
        Format::Csv => {
            let mut header = vec!["gamma".to_string()];
            header.extend(a.bounds.iter().map(|c| c.name().to_string()));
            let body: Vec<Vec<String>> = gammas
                .iter()
                .zip(&rows)
                .map(|(g, r)| std::iter::once(*g).chain(r.iter().copied()).map(|v| v.to_string()).collect())
                .collect();
            csv_text("sweep", a, &header, &body)
        }
    }
}

pub fn generic(a: &GenericArgs, fmt: Format) -> Result<Report, CliError> {
    need_json(fmt, "generic")?;
    let spec = a.spec.resolve()?;
    let (f, t) = a.event.parts();
    let r = generic_bound(&spec, &Event::new(f, t, a.gamma), &SipOptions::default())?;
    Ok(envelope(
        "generic",
        a,
        json!({
            "value": r.reported(),
            "dual": r.dual,
            "diagnostics": {
                "raw_value": r.value,
                "iterations": r.iterations,
                "max_violation": r.max_violation,
                "certified_upper": r.certified_upper,
            },
        }),
    ))
}

pub fn verify(a: &VerifyArgs, fmt: Format) -> Result<Report, CliError> {
    need_json(fmt, "verify")?;
    let q = query(a.spec.resolve()?, a.gamma, a.side)?;
    if a.grid < 2 {
        return Err(CliError::Usage(format!("--grid {} (need >= 2)", a.grid)));
    }
    let dual = product_bound(&q, &BoundOptions::default())?;
    let mut g = GridSpec::with_n(a.grid);
    if !a.no_seed {
        g.extra = verification_atoms(&q, &dual);
        if q.side == Side::Right && above_gamma_bar(&q.spec, q.gamma)? {
            g.extra.extend(perturbed_distribution(&q.spec, q.gamma)?.atoms.iter().map(|w| w.atom));
        }
    }
    let primal = match lower_bound_lp(&q.spec, &Event::product(q.side.tail(), q.gamma), &g) {
        Err(Error::GridInfeasible) => {
            return Err(CliError::Solver(format!(
                "no distribution on the {}-point grid matches the moments; refine --grid",
                a.grid
            )))
        }
        r => r?,
    };
    let gap = dual.value - primal.value;
    let ok = gap <= a.tolerance;
    let report = envelope(
        "verify",
        a,
        json!({
            "dual": dual.value,
            "certified_upper": dual.certified_upper,
            "primal": primal.value,
            "gap": gap,
            "tolerance": a.tolerance,
            "within_tolerance": ok,
            "primal_atoms": primal.n_atoms,
            "primal_moment_residual": primal.distribution.max_residual(&q.spec),
        }),
    );
    if ok {
        Ok(report)
    } else {
        Err(CliError::Gap { report, gap, tolerance: a.tolerance })
    }
}

pub fn export_sdp(a: &ExportArgs) -> Result<Report, CliError> {
    let q = query(a.spec.resolve()?, a.gamma, a.side)?;
    let (problem, _) = assemble_sdp(&q)?;
    Ok(Report::Text(problem.to_text()))
}

pub fn portfolio(a: &PortfolioArgs, fmt: Format) -> Result<Report, CliError> {
    let f = File::open(&a.returns).map_err(|e| CliError::Usage(format!("{}: {e}", a.returns.display())))?;
    let panel = ReturnPanel::from_csv(f)?;
    let (mu, cov) = estimate_moments(&panel)?;
    let opts = FrontierOptions {
        t: a.horizon,
        eps: a.epsilon,
        n_points: a.points,
        rho: a.rho,
        bisect_tol: a.bisect_tol,
        fw: FwOptions::default(),
        bound: BoundOptions::default(),
    };
    let frontier = frontier_sweep(&mu, &cov, &opts)?;
    match fmt {
        Format::Json => Ok(envelope(
            "portfolio",
            a,
            json!({ "assets": panel.asset_names, "mean_returns": mu, "covariance": cov, "frontier": frontier }),
        )),
        Format::Csv => {
            let header: Vec<String> = ["tau", "weights", "mean", "stdev", "wvar", "growth_rate", "tag", "best"]
                .iter()
                .map(|s| s.to_string())
                .collect();
            let rows: Vec<Vec<String>> = frontier
                .points
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let w: Vec<String> = p.weights.iter().map(|v| v.to_string()).collect();
                    let tag = p.wvar.tag.map(|t| serde_json::to_value(t).unwrap().as_str().unwrap_or("").to_string());
                    vec![
                        p.tau.to_string(),
                        w.join(";"),
                        p.mean.to_string(),
                        p.stdev.to_string(),
                        p.wvar.value.to_string(),
                        p.growth_rate.to_string(),
                        tag.unwrap_or_default(),
                        (frontier.best == Some(i)).to_string(),
                    ]
                })
                .collect();
            csv_text("portfolio", a, &header, &rows)
        }
    }
}

pub fn validate(a: &ValidateArgs, fmt: Format) -> Result<Report, CliError> {
    need_json(fmt, "validate")?;
    let spec = a.spec.resolve()?;
    let v = spec.validate()?;
    let usable = v.feasible && v.slater_strict && v.theta > 0.0;
    let gamma_bar = if usable { gamma_bar_threshold(&spec)? } else { None };
    let report = envelope(
        "validate",
        a,
        json!({
            "feasible": v.feasible,
            "slater_strict": v.slater_strict,
            "theta": v.theta,
            "cross_moment": spec.cross_moment(),
            "absorption_threshold": absorption_threshold(&spec),
            "absorbed": is_absorbed(&spec),
            "gamma_bar": gamma_bar,
        }),
    );
    if usable {
        Ok(report)
    } else {
        Err(CliError::Rejected { report, error: spec.ensure_strict().unwrap_err() })
    }
}

fn need_json(fmt: Format, cmd: &str) -> Result<(), CliError> {
    if fmt == Format::Json {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{cmd} writes JSON only")))
    }
}
