//! Cutting-plane solver for linear objectives under semi-infinite
//! constraints that are affine in the decision vector for every fixed value
//! of a scalar uncertain parameter.
//!
//! Each master problem `min c^T x  s.t.  g_j^T x >= h_j` is solved through
//! its LP dual `max h^T y  s.t.  sum_j y_j g_j = c, y >= 0`, which has one row
//! per decision variable and one column per cut. The dual weights `y` are
//! kept: for the moment problems in this crate they are the probabilities of
//! a discrete distribution supported on the cut witnesses.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{solve_lp, LinearProgram, LpOutcome};

/// Multipliers `(alpha, beta, gamma1, gamma2)` of the symmetric dual programs.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DualPoint {
    pub alpha: f64,
    pub beta: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

impl DualPoint {
    pub fn new(alpha: f64, beta: f64, gamma1: f64, gamma2: f64) -> Self {
        DualPoint {
            alpha,
            beta,
            gamma1,
            gamma2,
        }
    }

    pub fn from_slice(x: &[f64]) -> Self {
        DualPoint::new(x[0], x[1], x[2], x[3])
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.alpha, self.beta, self.gamma1, self.gamma2]
    }

    pub fn dot(&self, c: &[f64; 4]) -> f64 {
        self.to_array().iter().zip(c).map(|(a, b)| a * b).sum()
    }
}

/// A single affine constraint `row^T x >= rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cut {
    pub row: Vec<f64>,
    pub rhs: f64,
}

impl Cut {
    pub fn new(row: Vec<f64>, rhs: f64) -> Self {
        Cut { row, rhs }
    }

    /// `rhs - row^T x`; positive means violated.
    pub fn violation(&self, x: &[f64]) -> f64 {
        self.rhs - self.row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SeparationResult {
    Satisfied,
    Violated {
        witness: f64,
        violation: f64,
        cut: Cut,
    },
}

impl SeparationResult {
    /// Builds a result from a cut at `witness`, classifying by sign.
    pub fn from_cut(witness: f64, cut: Cut, x: &[f64]) -> Self {
        let violation = cut.violation(x);
        if violation > 0.0 {
            SeparationResult::Violated {
                witness,
                violation,
                cut,
            }
        } else {
            SeparationResult::Satisfied
        }
    }

    pub fn violation(&self) -> f64 {
        match self {
            SeparationResult::Satisfied => 0.0,
            SeparationResult::Violated { violation, .. } => *violation,
        }
    }
}

/// A family `{ row(s)^T x >= rhs : s in S }` with a separation oracle.
pub trait SemiInfiniteConstraint: Send + Sync {
    fn description(&self) -> String;

    /// Right-hand side shared by the family.
    fn rhs(&self) -> f64;

    /// The member cut at uncertain value `s`, if `s` lies in the index set.
    fn cut_at(&self, s: f64) -> Option<Cut>;

    /// Most violated member at `x`.
    fn separate(&self, x: &[f64]) -> SeparationResult;

    /// Every locally most violated member; defaults to [`Self::separate`].
    fn separate_all(&self, x: &[f64]) -> Vec<SeparationResult> {
        vec![self.separate(x)]
    }

    /// Uncertain values used to seed the first master problem.
    fn seeds(&self) -> Vec<f64> {
        Vec::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SipOptions {
    pub feas_tol: f64,
    pub gap_tol: f64,
    pub trust_radius0: f64,
    pub trust_cap: f64,
    pub max_iter: usize,
    pub lp_tol: f64,
    /// Largest violation accepted when the master point stops moving
    /// because new cuts fall below LP precision.
    pub stall_tol: f64,
    /// Same, measured after dividing each cut by its largest row entry.
    pub stall_rel_tol: f64,
}

impl Default for SipOptions {
    fn default() -> Self {
        SipOptions {
            feas_tol: 1e-8,
            gap_tol: 1e-9,
            trust_radius0: 1e3,
            trust_cap: 1e9,
            max_iter: 5000,
            lp_tol: 1e-10,
            stall_tol: 1e-6,
            stall_rel_tol: 1e-8,
        }
    }
}

/// Origin of a master-problem row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CutSource {
    Linear(usize),
    Family { index: usize, witness: f64 },
    TrustBox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActiveCut {
    pub source: CutSource,
    pub cut: Cut,
    /// Dual weight of the row in the final master.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SipSolution {
    pub value: f64,
    pub x: Vec<f64>,
    pub iterations: usize,
    pub max_violation: f64,
    pub trust_radius: f64,
    pub n_cuts: usize,
    /// Set when the loop ended on a stalled master rather than on
    /// `max_violation <= feas_tol`.
    pub stalled: bool,
    /// Rows carrying positive weight in the final master.
    pub active: Vec<ActiveCut>,
}

/// Consecutive unchanged master points before the loop counts as stalled.
const STALL_ROUNDS: usize = 3;

struct Row {
    source: CutSource,
    cut: Cut,
    /// 1 / scale applied when the row enters the master
    scale: f64,
}

fn scaled(cut: &Cut) -> f64 {
    let m = cut.row.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    if m > 0.0 {
        1.0 / m
    } else {
        1.0
    }
}

fn solve_master(
    objective: &[f64],
    rows: &[Row],
    radius: f64,
    lp_tol: f64,
) -> Result<(Vec<f64>, Vec<(usize, f64)>)> {
    let n = objective.len();
    let ncols = rows.len() + 2 * n;
    let mut cost = Vec::with_capacity(ncols);
    for r in rows {
        cost.push(-r.cut.rhs * r.scale);
    }
    for _ in 0..2 * n {
        cost.push(radius);
    }
    let mut lp = LinearProgram::new(cost);
    for i in 0..n {
        let mut eq = Vec::with_capacity(ncols);
        for r in rows {
            eq.push(r.cut.row[i] * r.scale);
        }
        // box rows x_k >= -R and -x_k >= -R
        for k in 0..n {
            eq.push(if k == i { 1.0 } else { 0.0 });
        }
        for k in 0..n {
            eq.push(if k == i { -1.0 } else { 0.0 });
        }
        lp.add_eq(eq, objective[i]);
    }
    match solve_lp(&lp, lp_tol)? {
        LpOutcome::Optimal(s) => {
            let x: Vec<f64> = s.eq_duals.iter().map(|p| -p).collect();
            let weights = s
                .x
                .iter()
                .enumerate()
                .filter(|(_, &w)| w > 0.0)
                .map(|(j, &w)| (j, w))
                .collect();
            Ok((x, weights))
        }
        LpOutcome::Unbounded => Err(Error::Sip("master problem is infeasible".into())),
        LpOutcome::Infeasible => Err(Error::Sip("master dual infeasible".into())),
        LpOutcome::Stalled => Err(Error::Sip("master LP stalled".into())),
    }
}

/// Minimises `objective^T x` subject to `linear` and every family in
/// `constraints`, to within `feas_tol` violation per family.
pub fn solve_sip(
    objective: &[f64],
    constraints: &[&dyn SemiInfiniteConstraint],
    linear: &[Cut],
    opts: &SipOptions,
) -> Result<SipSolution> {
    let n = objective.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty objective".into()));
    }
    if constraints.is_empty() && linear.is_empty() {
        return Err(Error::InvalidArgument("no constraints".into()));
    }
    let mut rows: Vec<Row> = Vec::new();
    let push = |rows: &mut Vec<Row>, source: CutSource, cut: Cut| {
        if cut.row.len() != n {
            return;
        }
        let scale = scaled(&cut);
        rows.push(Row { source, cut, scale });
    };
    for (i, c) in linear.iter().enumerate() {
        push(&mut rows, CutSource::Linear(i), c.clone());
    }
    for (k, fam) in constraints.iter().enumerate() {
        for s in fam.seeds() {
            if let Some(cut) = fam.cut_at(s) {
                push(&mut rows, CutSource::Family { index: k, witness: s }, cut);
            }
        }
    }

    let mut radius = opts.trust_radius0;
    let mut iterations = 0;
    let mut prev: Option<Vec<f64>> = None;
    let mut still = 0;
    loop {
        if iterations >= opts.max_iter {
            return Err(Error::Sip(format!(
                "no convergence after {} master iterations",
                opts.max_iter
            )));
        }
        iterations += 1;
        let (x, weights) = solve_master(objective, &rows, radius, opts.lp_tol)?;
        let on_box = x.iter().any(|v| v.abs() >= radius * (1.0 - 1e-9));

        let mut max_violation: f64 = 0.0;
        let mut max_scaled: f64 = 0.0;
        let mut added = 0;
        for (k, fam) in constraints.iter().enumerate() {
            for res in fam.separate_all(&x) {
                if let SeparationResult::Violated {
                    witness,
                    violation,
                    cut,
                } = res
                {
                    max_violation = max_violation.max(violation);
                    max_scaled = max_scaled.max(violation * scaled(&cut));
                    if violation > opts.feas_tol {
                        push(&mut rows, CutSource::Family { index: k, witness }, cut);
                        added += 1;
                    }
                }
            }
        }
        for c in linear {
            max_violation = max_violation.max(c.violation(&x));
        }

        let moved = prev.as_ref().is_none_or(|p| {
            p.iter().zip(&x).any(|(a, b)| (a - b).abs() > 1e-15 * a.abs().max(b.abs()).max(1.0))
        });
        still = if moved { 0 } else { still + 1 };
        let stalled = added > 0 && still >= STALL_ROUNDS && !on_box;
        if stalled && max_violation > opts.stall_tol && max_scaled > opts.stall_rel_tol {
            return Err(Error::Sip(format!(
                "master stalled with violation {max_violation:e}"
            )));
        }
        prev = Some(x.clone());
        if added == 0 || stalled {
            if on_box && !stalled {
                if radius >= opts.trust_cap {
                    return Err(Error::Sip(format!(
                        "trust box reached {:e} without stabilising",
                        radius
                    )));
                }
                radius *= 10.0;
                continue;
            }
            let value = objective.iter().zip(&x).map(|(a, b)| a * b).sum();
            let nrows = rows.len();
            let active = weights
                .into_iter()
                .map(|(j, w)| {
                    if j < nrows {
                        ActiveCut {
                            source: rows[j].source,
                            cut: rows[j].cut.clone(),
                            weight: w * rows[j].scale,
                        }
                    } else {
                        ActiveCut {
                            source: CutSource::TrustBox,
                            cut: Cut::new(vec![0.0; n], -radius),
                            weight: w,
                        }
                    }
                })
                .collect();
            return Ok(SipSolution {
                value,
                x,
                iterations,
                max_violation,
                trust_radius: radius,
                n_cuts: nrows,
                stalled,
                active,
            });
        }
    }
}
