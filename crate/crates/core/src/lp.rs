//! Dense two-phase primal simplex for small linear programs.
//!
//! Problems are stated as `min c^T x` subject to equality rows, `>=` rows and
//! per-variable bounds, then shifted into standard form `A z = b, z >= 0`.
//! Pricing is Dantzig's rule until a run of degenerate pivots trips a
//! counter, after which Bland's rule takes over. At termination the optimal
//! basis is refactorised from the original columns, so the reported `x` and
//! dual multipliers do not carry the tableau's accumulated rounding.

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-9;
const DEGENERATE_RUN: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    /// `a^T x = b`
    pub eq_constraints: Vec<(Vec<f64>, f64)>,
    /// `a^T x >= b`
    pub ineq_constraints: Vec<(Vec<f64>, f64)>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LinearProgram {
    /// Minimise `c^T x` with `x >= 0` and no rows yet.
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        LinearProgram {
            objective,
            eq_constraints: Vec::new(),
            ineq_constraints: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_eq(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.eq_constraints.push((row, rhs));
        self
    }

    pub fn add_geq(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.ineq_constraints.push((row, rhs));
        self
    }

    pub fn add_leq(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.ineq_constraints
            .push((row.into_iter().map(|v| -v).collect(), -rhs));
        self
    }

    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) -> &mut Self {
        self.lower[j] = lower;
        self.upper[j] = upper;
        self
    }

    pub fn set_free(&mut self, j: usize) -> &mut Self {
        self.set_bounds(j, f64::NEG_INFINITY, f64::INFINITY)
    }

    fn check(&self) -> Result<()> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(Error::Lp("bounds length differs from objective".into()));
        }
        for (row, b) in self.eq_constraints.iter().chain(&self.ineq_constraints) {
            if row.len() != n {
                return Err(Error::Lp(format!(
                    "row of length {} for {} variables",
                    row.len(),
                    n
                )));
            }
            if !b.is_finite() || row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Lp("non-finite constraint data".into()));
            }
        }
        if self.objective.iter().any(|v| !v.is_finite()) {
            return Err(Error::Lp("non-finite objective".into()));
        }
        for j in 0..n {
            if self.lower[j].is_nan() || self.upper[j].is_nan() || self.lower[j] > self.upper[j] {
                return Err(Error::Lp(format!("bad bounds on variable {j}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
    /// Multipliers of the equality rows (free sign).
    pub eq_duals: Vec<f64>,
    /// Multipliers of the `>=` rows (nonnegative at optimality).
    pub ineq_duals: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
    /// Iteration cap hit; distinct from a proof of infeasibility.
    Stalled,
}

impl LpOutcome {
    pub fn optimal(self) -> Option<LpSolution> {
        match self {
            LpOutcome::Optimal(s) => Some(s),
            _ => None,
        }
    }
}

/// How an original variable maps onto standard-form columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// x = shift + z_col
    Pos { col: usize, shift: f64 },
    /// x = shift - z_col
    Neg { col: usize, shift: f64 },
    /// x = z_plus - z_minus
    Free { plus: usize, minus: usize },
}

struct StandardForm {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    c: Vec<f64>,
    /// +1/-1 per row: the sign applied to make b >= 0
    row_sign: Vec<f64>,
    maps: Vec<VarMap>,
    n_eq: usize,
    n_ineq: usize,
}

fn to_standard(p: &LinearProgram) -> StandardForm {
    let n = p.num_vars();
    let mut maps = Vec::with_capacity(n);
    let mut ncols = 0;
    let mut upper_rows: Vec<(usize, f64)> = Vec::new();
    for j in 0..n {
        let (l, u) = (p.lower[j], p.upper[j]);
        if l.is_finite() {
            maps.push(VarMap::Pos { col: ncols, shift: l });
            if u.is_finite() {
                upper_rows.push((ncols, u - l));
            }
            ncols += 1;
        } else if u.is_finite() {
            maps.push(VarMap::Neg { col: ncols, shift: u });
            ncols += 1;
        } else {
            maps.push(VarMap::Free {
                plus: ncols,
                minus: ncols + 1,
            });
            ncols += 2;
        }
    }
    let n_eq = p.eq_constraints.len();
    let n_ineq = p.ineq_constraints.len();
    let n_slack = n_ineq + upper_rows.len();
    let total = ncols + n_slack;

    let mut c = vec![0.0; total];
    for j in 0..n {
        match maps[j] {
            VarMap::Pos { col, .. } => c[col] += p.objective[j],
            VarMap::Neg { col, .. } => c[col] -= p.objective[j],
            VarMap::Free { plus, minus } => {
                c[plus] += p.objective[j];
                c[minus] -= p.objective[j];
            }
        }
    }

    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut push_row = |row: &[f64], rhs: f64, slack: Option<(usize, f64)>| {
        let mut r = vec![0.0; total];
        let mut rhs = rhs;
        for j in 0..n {
            let v = row[j];
            if v == 0.0 {
                continue;
            }
            match maps[j] {
                VarMap::Pos { col, shift } => {
                    r[col] += v;
                    rhs -= v * shift;
                }
                VarMap::Neg { col, shift } => {
                    r[col] -= v;
                    rhs -= v * shift;
                }
                VarMap::Free { plus, minus } => {
                    r[plus] += v;
                    r[minus] -= v;
                }
            }
        }
        if let Some((s, coef)) = slack {
            r[s] = coef;
        }
        a.push(r);
        b.push(rhs);
    };
    for (row, rhs) in &p.eq_constraints {
        push_row(row, *rhs, None);
    }
    for (i, (row, rhs)) in p.ineq_constraints.iter().enumerate() {
        push_row(row, *rhs, Some((ncols + i, -1.0)));
    }
    for (k, &(col, width)) in upper_rows.iter().enumerate() {
        let mut r = vec![0.0; total];
        r[col] = 1.0;
        r[ncols + n_ineq + k] = 1.0;
        a.push(r);
        b.push(width);
    }
    let mut row_sign = vec![1.0; a.len()];
    for i in 0..a.len() {
        if b[i] < 0.0 {
            row_sign[i] = -1.0;
            b[i] = -b[i];
            for v in a[i].iter_mut() {
                *v = -*v;
            }
        }
    }
    StandardForm {
        a,
        b,
        c,
        row_sign,
        maps,
        n_eq,
        n_ineq,
    }
}

/// Dense tableau with artificial columns `[n, n + m)`.
struct Tableau {
    m: usize,
    n: usize,
    /// m rows of width n + m + 1 (last entry is the rhs)
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    iterations: usize,
    cap: usize,
    tol: f64,
}

enum Phase {
    Done,
    Unbounded,
    Stalled,
}

impl Tableau {
    fn width(&self) -> usize {
        self.n + self.m + 1
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let w = self.width();
        let pv = self.rows[r][col];
        for v in self.rows[r].iter_mut() {
            *v /= pv;
        }
        let pr = self.rows[r].clone();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.rows[i][col];
            if f != 0.0 {
                let row = &mut self.rows[i];
                for k in 0..w {
                    row[k] -= f * pr[k];
                }
                row[col] = 0.0;
            }
        }
        self.basis[r] = col;
    }

    /// Minimise `cost` over the current basis; columns with
    /// `allowed[j] == false` never enter.
    fn optimise(&mut self, cost: &[f64], allowed: &[bool]) -> Phase {
        let w = self.width();
        let mut degenerate = 0;
        loop {
            if self.iterations >= self.cap {
                return Phase::Stalled;
            }
            // reduced costs d_j = c_j - c_B^T column_j
            let mut d = cost.to_vec();
            d.resize(w - 1, 0.0);
            for i in 0..self.m {
                let cb = cost.get(self.basis[i]).copied().unwrap_or(0.0);
                if cb != 0.0 {
                    for j in 0..w - 1 {
                        d[j] -= cb * self.rows[i][j];
                    }
                }
            }
            let bland = degenerate >= DEGENERATE_RUN;
            let mut enter = None;
            let mut best = -self.tol;
            for j in 0..w - 1 {
                if !allowed[j] || self.basis.contains(&j) {
                    continue;
                }
                if d[j] < best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = d[j];
                }
            }
            let Some(col) = enter else {
                return Phase::Done;
            };
            // ratio test; ties broken by the larger pivot, or the smaller
            // basic index under Bland's rule
            let mut leave: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for i in 0..self.m {
                let a = self.rows[i][col];
                if a > self.tol {
                    let ratio = self.rows[i][w - 1] / a;
                    let better = match leave {
                        None => true,
                        Some(l) => {
                            if ratio < best_ratio - 1e-12 * best_ratio.abs().max(1.0) {
                                true
                            } else if ratio <= best_ratio + 1e-12 * best_ratio.abs().max(1.0) {
                                if bland {
                                    self.basis[i] < self.basis[l]
                                } else {
                                    a > self.rows[l][col]
                                }
                            } else {
                                false
                            }
                        }
                    };
                    if better {
                        leave = Some(i);
                        best_ratio = ratio;
                    }
                }
            }
            let Some(r) = leave else {
                return Phase::Unbounded;
            };
            if best_ratio <= self.tol {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(r, col);
            self.iterations += 1;
        }
    }
}

/// Solves `M y = v` by Gaussian elimination with partial pivoting.
fn dense_solve(mut mat: Vec<Vec<f64>>, mut v: Vec<f64>) -> Option<Vec<f64>> {
    let n = v.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| mat[i][k].abs().partial_cmp(&mat[j][k].abs()).unwrap())?;
        if mat[p][k].abs() < 1e-300 {
            return None;
        }
        mat.swap(k, p);
        v.swap(k, p);
        for i in k + 1..n {
            let f = mat[i][k] / mat[k][k];
            if f != 0.0 {
                for j in k..n {
                    mat[i][j] -= f * mat[k][j];
                }
                v[i] -= f * v[k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| mat[k][j] * x[j]).sum();
        x[k] = (v[k] - s) / mat[k][k];
    }
    Some(x)
}

pub fn solve_lp(prob: &LinearProgram, tol: f64) -> Result<LpOutcome> {
    prob.check()?;
    let sf = to_standard(prob);
    let m = sf.a.len();
    let n = sf.c.len();

    if m == 0 {
        // only bounds: each variable sits at its cheaper finite end
        if sf.c.iter().any(|&c| c < -tol) {
            return Ok(LpOutcome::Unbounded);
        }
        return Ok(LpOutcome::Optimal(finish(prob, &sf, &vec![0.0; n], vec![], 0)));
    }

    let mut rows = Vec::with_capacity(m);
    for i in 0..m {
        let mut r = sf.a[i].clone();
        r.resize(n + m, 0.0);
        r[n + i] = 1.0;
        r.push(sf.b[i]);
        rows.push(r);
    }
    let mut tab = Tableau {
        m,
        n,
        rows,
        basis: (n..n + m).collect(),
        iterations: 0,
        cap: 50 * (m + n),
        tol,
    };

    // phase 1
    let mut cost1 = vec![0.0; n + m];
    for c in cost1.iter_mut().skip(n) {
        *c = 1.0;
    }
    let all = vec![true; n + m];
    match tab.optimise(&cost1, &all) {
        Phase::Stalled => return Ok(LpOutcome::Stalled),
        Phase::Unbounded => return Err(Error::Lp("phase 1 reported unbounded".into())),
        Phase::Done => {}
    }
    let infeas: f64 = (0..m)
        .filter(|&i| tab.basis[i] >= n)
        .map(|i| tab.rows[i][n + m])
        .sum();
    let bscale = sf.b.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
    if infeas > tol * bscale.max(1.0) * 10.0 {
        return Ok(LpOutcome::Infeasible);
    }
    // drive zero-level artificials out of the basis
    for r in 0..m {
        if tab.basis[r] >= n {
            if let Some(col) = (0..n)
                .filter(|j| !tab.basis.contains(j))
                .max_by(|&a, &b| tab.rows[r][a].abs().partial_cmp(&tab.rows[r][b].abs()).unwrap())
            {
                if tab.rows[r][col].abs() > 1e-9 {
                    tab.pivot(r, col);
                }
            }
        }
    }

    // phase 2
    let mut allowed = vec![true; n + m];
    for a in allowed.iter_mut().skip(n) {
        *a = false;
    }
    match tab.optimise(&sf.c, &allowed) {
        Phase::Stalled => return Ok(LpOutcome::Stalled),
        Phase::Unbounded => return Ok(LpOutcome::Unbounded),
        Phase::Done => {}
    }

    // refactorise the final basis from original columns
    let col_of = |j: usize, i: usize| -> f64 {
        if j < n {
            sf.a[i][j]
        } else if j - n == i {
            1.0
        } else {
            0.0
        }
    };
    let bmat: Vec<Vec<f64>> = (0..m)
        .map(|i| tab.basis.iter().map(|&j| col_of(j, i)).collect())
        .collect();
    let xb = dense_solve(bmat.clone(), sf.b.clone());
    let bt: Vec<Vec<f64>> = (0..m)
        .map(|k| (0..m).map(|i| bmat[i][k]).collect())
        .collect();
    let cb: Vec<f64> = tab
        .basis
        .iter()
        .map(|&j| if j < n { sf.c[j] } else { 0.0 })
        .collect();
    let pi = dense_solve(bt, cb);
    let (z, pi) = match (xb, pi) {
        (Some(xb), Some(pi)) => {
            let mut z = vec![0.0; n];
            for (k, &j) in tab.basis.iter().enumerate() {
                if j < n {
                    z[j] = xb[k].max(0.0);
                }
            }
            (z, pi)
        }
        _ => {
            // singular refactorisation: fall back to tableau values
            let mut z = vec![0.0; n];
            for (k, &j) in tab.basis.iter().enumerate() {
                if j < n {
                    z[j] = tab.rows[k][n + m].max(0.0);
                }
            }
            (z, vec![0.0; m])
        }
    };
    let pi_orig: Vec<f64> = pi.iter().zip(&sf.row_sign).map(|(p, s)| p * s).collect();
    Ok(LpOutcome::Optimal(finish(prob, &sf, &z, pi_orig, tab.iterations)))
}

fn finish(prob: &LinearProgram, sf: &StandardForm, z: &[f64], pi: Vec<f64>, iterations: usize) -> LpSolution {
    let x: Vec<f64> = sf
        .maps
        .iter()
        .map(|m| match *m {
            VarMap::Pos { col, shift } => shift + z[col],
            VarMap::Neg { col, shift } => shift - z[col],
            VarMap::Free { plus, minus } => z[plus] - z[minus],
        })
        .collect();
    let value = prob.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    let eq_duals = pi.iter().take(sf.n_eq).copied().collect();
    let ineq_duals = pi.iter().skip(sf.n_eq).take(sf.n_ineq).copied().collect();
    LpSolution {
        x,
        value,
        eq_duals,
        ineq_duals,
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_bound() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.set_free(0).add_geq(vec![1.0], 1.0);
        let s = solve_lp(&lp, DEFAULT_TOL).unwrap().optimal().unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-12 && (s.value - 1.0).abs() < 1e-12);
        assert!((s.ineq_duals[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn segment_optimum() {
        let mut lp = LinearProgram::new(vec![-1.0, -1.0]);
        lp.add_leq(vec![1.0, 1.0], 1.0);
        let s = solve_lp(&lp, DEFAULT_TOL).unwrap().optimal().unwrap();
        assert!((s.value + 1.0).abs() < 1e-12);
        assert!(s.x.iter().all(|&v| v >= -1e-12));
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add_geq(vec![1.0], 2.0).add_leq(vec![1.0], 1.0);
        assert_eq!(solve_lp(&lp, DEFAULT_TOL).unwrap(), LpOutcome::Infeasible);

        let mut lp = LinearProgram::new(vec![-1.0, 0.0]);
        lp.add_geq(vec![1.0, -1.0], 0.0);
        assert_eq!(solve_lp(&lp, DEFAULT_TOL).unwrap(), LpOutcome::Unbounded);
    }

    #[test]
    fn box_bounds_and_negative_lower() {
        let mut lp = LinearProgram::new(vec![1.0, -2.0]);
        lp.set_bounds(0, -3.0, 5.0).set_bounds(1, f64::NEG_INFINITY, 4.0);
        lp.add_geq(vec![1.0, 1.0], -10.0);
        let s = solve_lp(&lp, DEFAULT_TOL).unwrap().optimal().unwrap();
        assert!((s.x[0] + 3.0).abs() < 1e-12 && (s.x[1] - 4.0).abs() < 1e-12);
        assert!((s.value + 11.0).abs() < 1e-12);
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::new(vec![1.0, 2.0]);
        lp.add_eq(vec![1.0, 1.0], 1.0).add_eq(vec![2.0, 2.0], 2.0);
        let s = solve_lp(&lp, DEFAULT_TOL).unwrap().optimal().unwrap();
        assert!((s.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn malformed_rows_are_errors() {
        let mut lp = LinearProgram::new(vec![1.0, 2.0]);
        lp.add_eq(vec![1.0], 1.0);
        assert!(solve_lp(&lp, DEFAULT_TOL).is_err());
    }
}
