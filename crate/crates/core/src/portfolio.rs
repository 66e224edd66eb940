//! Worst-case value-at-risk of fixed-mix strategies. Per-period portfolio
//! growth factors `1 + w^T r_t` are modelled as serially uncorrelated with
//! common mean and variance; the terminal wealth is their product, and its
//! worst-case `eps`-quantile is found by bisection on the left-tail bound.

use std::io::Read;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic;
use crate::error::{Error, Result};
use crate::moments::MomentSpec;
use crate::product_bounds::{product_bound, BoundOptions, BoundQuery, Side};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnPanel {
    pub asset_names: Vec<String>,
    /// `returns[period][asset]`, each `>= -1`.
    pub returns: Vec<Vec<f64>>,
}

impl ReturnPanel {
    pub fn new(asset_names: Vec<String>, returns: Vec<Vec<f64>>) -> Result<Self> {
        let n = asset_names.len();
        if n == 0 {
            return Err(Error::InvalidArgument("panel has no assets".into()));
        }
        if returns.len() < 2 {
            return Err(Error::InvalidArgument(format!("panel has {} periods, need at least 2", returns.len())));
        }
        for (i, row) in returns.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidArgument(format!("period {i} has {} entries, expected {n}", row.len())));
            }
            if let Some(v) = row.iter().find(|v| !(v.is_finite() && **v >= -1.0)) {
                return Err(Error::InvalidArgument(format!("period {i}: return {v} is not a finite value >= -1")));
            }
        }
        Ok(ReturnPanel { asset_names, returns })
    }

    /// Header of asset names, then one row of decimal returns per period.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let names: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::InvalidArgument(format!("returns csv: {e}")))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::InvalidArgument(format!("returns csv: {e}")))?;
            let row = rec
                .iter()
                .map(|f| f.parse::<f64>().map_err(|_| Error::InvalidArgument(format!("row {}: cannot parse {f:?}", i + 1))))
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        ReturnPanel::new(names, rows)
    }

    pub fn n_assets(&self) -> usize {
        self.asset_names.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedMixPortfolio {
    pub weights: Vec<f64>,
}

impl FixedMixPortfolio {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if weights.is_empty() || weights.iter().any(|&w| !(w >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("weights {weights:?} are not on the unit simplex")));
        }
        Ok(FixedMixPortfolio { weights })
    }

    pub fn mean(&self, mu: &[f64]) -> f64 {
        self.weights.iter().zip(mu).map(|(a, b)| a * b).sum()
    }

    pub fn variance(&self, cov: &[Vec<f64>]) -> f64 {
        quad_form(cov, &self.weights)
    }
}

fn quad_form(m: &[Vec<f64>], w: &[f64]) -> f64 {
    m.iter()
        .zip(w)
        .map(|(row, wi)| wi * row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>())
        .sum()
}

/// Sample mean and unbiased sample covariance.
pub fn estimate_moments(panel: &ReturnPanel) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let m = panel.returns.len();
    if m < 2 {
        return Err(Error::InvalidArgument("need at least 2 periods".into()));
    }
    let n = panel.n_assets();
    let mf = m as f64;
    let mut mean = vec![0.0; n];
    for row in &panel.returns {
        for (a, v) in mean.iter_mut().zip(row) {
            *a += v / mf;
        }
    }
    let mut cov = vec![vec![0.0; n]; n];
    for row in &panel.returns {
        for i in 0..n {
            let di = row[i] - mean[i];
            for j in 0..n {
                cov[i][j] += di * (row[j] - mean[j]) / (mf - 1.0);
            }
        }
    }
    Ok((mean, cov))
}

/// Moment data of the per-period growth factor of `portfolio`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WealthSpec {
    pub spec: MomentSpec,
    /// `w^T Sigma w` vanishes: wealth is deterministic.
    pub degenerate: bool,
}

/// Variances below this multiple of the largest asset variance count as zero.
const DEGENERATE_RTOL: f64 = 1e-14;

pub fn wealth_spec(portfolio: &FixedMixPortfolio, mu: &[f64], cov: &[Vec<f64>], t: usize, rho: f64) -> Result<WealthSpec> {
    if t < 2 {
        return Err(Error::InvalidArgument(format!("horizon T = {t}, need T >= 2")));
    }
    let n = portfolio.weights.len();
    if mu.len() != n || cov.len() != n || cov.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidArgument("weights, mean and covariance sizes differ".into()));
    }
    let var = portfolio.variance(cov);
    let scale = (0..n).map(|i| cov[i][i].abs()).fold(0.0, f64::max);
    let degenerate = var <= DEGENERATE_RTOL * scale || var <= 0.0;
    let m = 1.0 + portfolio.mean(mu);
    if !(m > 0.0) {
        return Err(Error::InvalidArgument(format!("mean growth factor {m} is not positive")));
    }
    let sigma = if degenerate { 0.0 } else { var.sqrt() };
    Ok(WealthSpec { spec: MomentSpec::new(t, m, sigma, rho), degenerate })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WvarTag {
    /// `L(gamma) = 1` for every `gamma > 0`; reported as 0.
    Absorbed,
    /// Zero variance; wealth is `mu^T`.
    Deterministic,
    /// `L(gamma) > eps` down to the smallest bracket; reported as 0.
    NoPositiveThreshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WvarResult {
    pub value: f64,
    pub tag: Option<WvarTag>,
    /// Final bracket with `L(lo) <= eps < L(hi)`.
    pub bracket: (f64, f64),
    pub evaluations: usize,
}

impl WvarResult {
    /// `ln(WVaR) / T`; `-inf` for a zero WVaR.
    pub fn growth_rate(&self, t: usize) -> f64 {
        self.value.ln() / t as f64
    }
}

// 16^-40 is far below any useful wealth level
const MAX_EXPANSIONS: usize = 40;

/// `sup { gamma : L(gamma) <= eps }` by log-space bisection, stopping when
/// `hi / lo - 1 <= tol`.
pub fn worst_case_var(spec: &MomentSpec, eps: f64, tol: f64, opts: &BoundOptions) -> Result<WvarResult> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon = {eps}, need 0 < eps < 1")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol = {tol}")));
    }
    let tf = spec.tf();
    if spec.sigma == 0.0 {
        let v = spec.mu.powf(tf);
        return Ok(WvarResult { value: v, tag: Some(WvarTag::Deterministic), bracket: (v, v), evaluations: 0 });
    }
    spec.ensure_strict()?;
    if analytic::is_absorbed(spec) {
        return Ok(WvarResult { value: 0.0, tag: Some(WvarTag::Absorbed), bracket: (0.0, 0.0), evaluations: 0 });
    }
    let mut evals = 0;
    let mut left = |g: f64| -> Result<f64> {
        evals += 1;
        Ok(product_bound(&BoundQuery::new(*spec, g, Side::Left), opts)?.value)
    };
    let mut lo = (spec.mu - 6.0 * spec.sigma).max(0.5 * spec.mu).powf(tf);
    let mut hi = (spec.mu + 6.0 * spec.sigma).powf(tf);
    let mut n = 0;
    while left(lo)? > eps {
        lo /= 16.0;
        n += 1;
        if n > MAX_EXPANSIONS || lo == 0.0 {
            return Ok(WvarResult { value: 0.0, tag: Some(WvarTag::NoPositiveThreshold), bracket: (0.0, lo), evaluations: evals });
        }
    }
    n = 0;
    while left(hi)? <= eps {
        hi *= 16.0;
        n += 1;
        if n > MAX_EXPANSIONS || !hi.is_finite() {
            return Err(Error::InvalidArgument("left-tail bound never exceeds epsilon".into()));
        }
    }
    while hi / lo - 1.0 > tol {
        let mid = (lo * hi).sqrt();
        if left(mid)? <= eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(WvarResult { value: lo, tag: None, bracket: (lo, hi), evaluations: evals })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FwOptions {
    pub max_iter: usize,
    pub gap_tol: f64,
}

impl Default for FwOptions {
    fn default() -> Self {
        FwOptions { max_iter: 10_000, gap_tol: 1e-10 }
    }
}

/// Minimises `w^T Sigma w - tau mu^T w` over the simplex with away-step
/// Frank-Wolfe and exact line search. Returns the weights and the final
/// Frank-Wolfe gap, or `None` if the gap is still above tolerance at the cap.
pub fn frank_wolfe(mu: &[f64], cov: &[Vec<f64>], tau: f64, opts: &FwOptions) -> Option<(Vec<f64>, f64)> {
    let n = mu.len();
    // start at the best vertex
    let f_vertex = |i: usize| cov[i][i] - tau * mu[i];
    let start = (0..n).min_by(|&a, &b| f_vertex(a).partial_cmp(&f_vertex(b)).unwrap())?;
    let mut w = vec![0.0; n];
    w[start] = 1.0;
    // grad = 2 Sigma w - tau mu, kept up to date
    let mut sw: Vec<f64> = (0..n).map(|i| cov[i][start]).collect();
    for _ in 0..opts.max_iter {
        let grad: Vec<f64> = (0..n).map(|i| 2.0 * sw[i] - tau * mu[i]).collect();
        let gw: f64 = grad.iter().zip(&w).map(|(a, b)| a * b).sum();
        let s = (0..n).min_by(|&a, &b| grad[a].partial_cmp(&grad[b]).unwrap()).unwrap();
        let fw_gap = gw - grad[s];
        if fw_gap <= opts.gap_tol {
            return Some((w, fw_gap.max(0.0)));
        }
        let a = (0..n)
            .filter(|&i| w[i] > 0.0)
            .max_by(|&x, &y| grad[x].partial_cmp(&grad[y]).unwrap())
            .unwrap();
        let away_gap = grad[a] - gw;
        // direction d = e_s - w (toward) or w - e_a (away)
        let toward = fw_gap >= away_gap;
        let (d, max_step): (Vec<f64>, f64) = if toward {
            ((0..n).map(|i| if i == s { 1.0 } else { 0.0 } - w[i]).collect(), 1.0)
        } else {
            let wa = w[a];
            let m = if wa < 1.0 { wa / (1.0 - wa) } else { f64::INFINITY };
            ((0..n).map(|i| w[i] - if i == a { 1.0 } else { 0.0 }).collect(), m)
        };
        let gd: f64 = grad.iter().zip(&d).map(|(a, b)| a * b).sum();
        let dsd = quad_form(cov, &d);
        let mut step = if dsd > 0.0 { -gd / (2.0 * dsd) } else { max_step };
        step = step.clamp(0.0, max_step);
        if !step.is_finite() || step == 0.0 {
            return Some((w, fw_gap));
        }
        for i in 0..n {
            w[i] += step * d[i];
            if w[i] < 1e-15 {
                w[i] = 0.0;
            }
        }
        let sum: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= sum);
        sw = (0..n).map(|i| cov[i].iter().zip(&w).map(|(a, b)| a * b).sum()).collect();
    }
    None
}

/// Smallest `tau` from which the vertex of largest mean solves the
/// frontier problem (ties in the mean are ignored).
pub fn tau_max(mu: &[f64], cov: &[Vec<f64>]) -> f64 {
    let m = (0..mu.len()).max_by(|&a, &b| mu[a].partial_cmp(&mu[b]).unwrap()).unwrap_or(0);
    (0..mu.len())
        .filter(|&i| mu[i] < mu[m])
        .map(|i| 2.0 * (cov[m][m] - cov[i][m]) / (mu[m] - mu[i]))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub tau: f64,
    pub weights: Vec<f64>,
    /// `1 + w^T mu`
    pub mean: f64,
    pub stdev: f64,
    pub wvar: WvarResult,
    pub growth_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frontier {
    pub points: Vec<FrontierPoint>,
    /// Index into `points` of the largest WVaR.
    pub best: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontierOptions {
    pub t: usize,
    pub eps: f64,
    pub n_points: usize,
    pub rho: f64,
    pub bisect_tol: f64,
    pub fw: FwOptions,
    pub bound: BoundOptions,
}

/// Evaluates WVaR along the mean-variance frontier `tau` in `[0, tau_max]`.
pub fn frontier_sweep(mu: &[f64], cov: &[Vec<f64>], opts: &FrontierOptions) -> Result<Frontier> {
    if opts.n_points < 2 {
        return Err(Error::InvalidArgument(format!("n_points = {}, need >= 2", opts.n_points)));
    }
    if mu.is_empty() {
        return Err(Error::InvalidArgument("no assets".into()));
    }
    // a little past tau_max so the last point is the pure vertex
    let top = 1.05 * tau_max(mu, cov) + 1e-12;
    let taus: Vec<f64> = (0..opts.n_points).map(|k| top * k as f64 / (opts.n_points - 1) as f64).collect();
    let results: Vec<Result<Option<FrontierPoint>>> = taus
        .par_iter()
        .map(|&tau| {
            let Some((w, _)) = frank_wolfe(mu, cov, tau, &opts.fw) else {
                warn!("Frank-Wolfe did not converge at tau = {tau}; point skipped");
                return Ok(None);
            };
            let pf = FixedMixPortfolio { weights: w };
            let ws = wealth_spec(&pf, mu, cov, opts.t, opts.rho)?;
            let wvar = worst_case_var(&ws.spec, opts.eps, opts.bisect_tol, &opts.bound)?;
            Ok(Some(FrontierPoint {
                tau,
                mean: ws.spec.mu,
                stdev: ws.spec.sigma,
                growth_rate: wvar.growth_rate(opts.t),
                wvar,
                weights: pf.weights,
            }))
        })
        .collect();
    let mut points = Vec::new();
    for r in results {
        if let Some(p) = r? {
            points.push(p);
        }
    }
    // first maximiser, so ties go to the lower-variance end
    let best = (0..points.len()).fold(None, |acc: Option<usize>, i| match acc {
        Some(b) if points[b].wvar.value >= points[i].wvar.value => Some(b),
        _ => Some(i),
    });
    Ok(Frontier { points, best })
}
