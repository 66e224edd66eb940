//! Explicit conic form of the product bounds: linear objective, tagged
//! linear rows, second-order-cone rows and two PSD blocks encoding the
//! sum-of-squares certificate `l(kappa) = p(kappa) + kappa q(kappa)`.
//!
//! Nothing here solves the program. It exists so that an external conic
//! solver can cross-check the cutting-plane values.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::analytic::root_t;
use crate::error::Result;
use crate::product_bounds::{dual_objective, tail_polynomial_coeffs, BoundQuery, Side};

/// Sparse affine expression `sum coeffs + constant`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AffineExpr {
    pub coeffs: Vec<(usize, f64)>,
    pub constant: f64,
}

impl AffineExpr {
    pub fn new(coeffs: Vec<(usize, f64)>, constant: f64) -> Self {
        let coeffs = coeffs.into_iter().filter(|c| c.1 != 0.0).collect();
        AffineExpr { coeffs, constant }
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        self.constant + self.coeffs.iter().map(|&(j, c)| c * values[j]).sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    /// `expr = 0`
    Eq,
    /// `expr >= 0`
    Geq,
}

/// Linear row `coeffs . x (= or >=) rhs`, stored as `expr = coeffs . x - rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearRow {
    pub tag: String,
    pub kind: RowKind,
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl LinearRow {
    pub fn lhs(&self, values: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, c)| c * values[j]).sum()
    }

    /// `|lhs - rhs|` for equalities, `max(rhs - lhs, 0)` for inequalities.
    pub fn violation(&self, values: &[f64]) -> f64 {
        let d = self.lhs(values) - self.rhs;
        match self.kind {
            RowKind::Eq => d.abs(),
            RowKind::Geq => (-d).max(0.0),
        }
    }
}

/// `head >= || tail ||_2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocRow {
    pub tag: String,
    pub head: AffineExpr,
    pub tail: Vec<AffineExpr>,
}

impl SocRow {
    pub fn violation(&self, values: &[f64]) -> f64 {
        let norm = self.tail.iter().map(|e| e.eval(values).powi(2)).sum::<f64>().sqrt();
        (norm - self.head.eval(values)).max(0.0)
    }
}

/// Symmetric PSD block; `entries[k] = (i, j, var)` for `i <= j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdBlock {
    pub tag: String,
    pub size: usize,
    pub entries: Vec<(usize, usize, usize)>,
}

impl PsdBlock {
    pub fn var(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.entries[i * self.size - i * (i + 1) / 2 + j].2
    }

    pub fn matrix(&self, values: &[f64]) -> Vec<Vec<f64>> {
        let n = self.size;
        let mut m = vec![vec![0.0; n]; n];
        for &(i, j, v) in &self.entries {
            m[i][j] = values[v];
            m[j][i] = values[v];
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicProblem {
    #[serde(rename = "T")]
    pub t: usize,
    pub side: Side,
    pub gamma: f64,
    pub var_names: Vec<String>,
    /// Dense objective over all variables; minimised.
    pub objective: Vec<f64>,
    pub rows: Vec<LinearRow>,
    pub soc: Vec<SocRow>,
    pub psd: Vec<PsdBlock>,
}

/// Variable indices of the assembled program.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpLayout {
    pub alpha: usize,
    pub beta: usize,
    pub gamma1: usize,
    pub gamma2: usize,
    pub lambda: [usize; 3],
    /// `p_0 .. p_{2T}`
    pub p: Vec<usize>,
    /// `q_0 .. q_{2T-2}`
    pub q: Vec<usize>,
}

impl ConicProblem {
    pub fn n_vars(&self) -> usize {
        self.var_names.len()
    }

    pub fn rows_tagged<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a LinearRow> + 'a {
        self.rows.iter().filter(move |r| r.tag.starts_with(prefix))
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().zip(values).map(|(a, b)| a * b).sum()
    }

    /// Largest violation over the linear and cone rows. PSD blocks are not
    /// checked here; see [`psd_margin`].
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let lin = self.rows.iter().map(|r| r.violation(values)).fold(0.0, f64::max);
        self.soc.iter().map(|s| s.violation(values)).fold(lin, f64::max)
    }

    /// Serialises to the sectioned text format described in `docs/formats.md`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let side = match self.side {
            Side::Left => "left",
            Side::Right => "right",
        };
        let _ = writeln!(out, "CHEBYPROD-CONIC 1");
        let _ = writeln!(out, "SIDE {side}");
        let _ = writeln!(out, "T {}", self.t);
        let _ = writeln!(out, "GAMMA {:e}", self.gamma);
        let _ = writeln!(out, "VAR {}", self.n_vars());
        for (j, name) in self.var_names.iter().enumerate() {
            let _ = writeln!(out, "{j} {name}");
        }
        let obj: Vec<(usize, f64)> = self
            .objective
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0.0)
            .map(|(j, &c)| (j, c))
            .collect();
        let _ = writeln!(out, "OBJ{}", sparse(&obj));
        for r in &self.rows {
            let kw = match r.kind {
                RowKind::Eq => "EQ",
                RowKind::Geq => "GEQ",
            };
            let _ = writeln!(out, "{kw} {} {:e}{}", r.tag, r.rhs, sparse(&r.coeffs));
        }
        for s in &self.soc {
            let _ = writeln!(out, "SOC {} {}", s.tag, s.tail.len() + 1);
            for e in std::iter::once(&s.head).chain(&s.tail) {
                let _ = writeln!(out, "{:e}{}", e.constant, sparse(&e.coeffs));
            }
        }
        for b in &self.psd {
            let _ = writeln!(out, "PSD {} {} {}", b.tag, b.size, b.entries.len());
            for &(i, j, v) in &b.entries {
                let _ = writeln!(out, "{i} {j} {v}");
            }
        }
        out.push_str("END\n");
        out
    }
}

fn sparse(c: &[(usize, f64)]) -> String {
    let mut s = String::new();
    for &(j, v) in c {
        let _ = write!(s, " {j}:{v:e}");
    }
    s
}

/// Smallest pivot of an LDL^T factorisation of `m + shift I`; negative
/// means `m + shift I` is not PSD.
pub fn psd_margin(m: &[Vec<f64>], shift: f64) -> f64 {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    for (i, row) in a.iter_mut().enumerate() {
        row[i] += shift;
    }
    let mut min_pivot = f64::INFINITY;
    for k in 0..n {
        let d = a[k][k];
        min_pivot = min_pivot.min(d);
        if d <= 0.0 {
            return d.min(0.0) - 1.0;
        }
        for i in k + 1..n {
            let f = a[i][k] / d;
            for j in k + 1..n {
                a[i][j] -= f * a[k][j];
            }
        }
    }
    min_pivot
}

struct Builder {
    names: Vec<String>,
}

impl Builder {
    fn var(&mut self, name: String) -> usize {
        self.names.push(name);
        self.names.len() - 1
    }

    fn block(&mut self, tag: &str, letter: &str, size: usize) -> PsdBlock {
        let mut entries = Vec::new();
        for i in 0..size {
            for j in i..size {
                entries.push((i, j, self.var(format!("{letter}[{i},{j}]"))));
            }
        }
        PsdBlock { tag: tag.into(), size, entries }
    }
}

fn eq(tag: String, coeffs: Vec<(usize, f64)>, rhs: f64) -> LinearRow {
    LinearRow { tag, kind: RowKind::Eq, coeffs: coeffs.into_iter().filter(|c| c.1 != 0.0).collect(), rhs }
}

fn geq(tag: &str, coeffs: Vec<(usize, f64)>, rhs: f64) -> LinearRow {
    LinearRow { tag: tag.into(), kind: RowKind::Geq, coeffs, rhs }
}

/// Builds the explicit conic program for `query`. Rows are tagged
/// `match_t` (coefficient matching at degree `t`), `sos_p_t` / `sos_q_t`
/// (Gram sums), and descriptive names for the sign constraints.
pub fn assemble_sdp(query: &BoundQuery) -> Result<(ConicProblem, SdpLayout)> {
    query.validate()?;
    let spec = &query.spec;
    let t = spec.t;
    let tf = t as f64;
    let edge = tf * root_t(query.gamma, tf);

    let mut b = Builder { names: Vec::new() };
    let alpha = b.var("alpha".into());
    let beta = b.var("beta".into());
    let gamma1 = b.var("gamma1".into());
    let gamma2 = b.var("gamma2".into());
    let lambda = [b.var("lambda1".into()), b.var("lambda2".into()), b.var("lambda3".into())];
    let p: Vec<usize> = (0..=2 * t).map(|i| b.var(format!("p{i}"))).collect();
    let pb = b.block("P", "P", t + 1);
    let q: Vec<usize> = (0..=2 * t - 2).map(|i| b.var(format!("q{i}"))).collect();
    let qb = b.block("Q", "Q", t);
    let n = b.names.len();

    let mut objective = vec![0.0; n];
    let c = dual_objective(spec);
    for (k, &j) in [alpha, beta, gamma1, gamma2].iter().enumerate() {
        objective[j] = c[k];
    }

    let mut rows = Vec::new();
    // p_t + q_{t-1} = a_t, written as p_t + q_{t-1} - (affine part) = constant
    let map = tail_polynomial_coeffs(spec, query.gamma)?;
    let x4 = [alpha, beta, gamma1, gamma2];
    for deg in 0..=2 * t {
        let mut co = vec![(p[deg], 1.0)];
        if deg >= 1 && deg - 1 < q.len() {
            co.push((q[deg - 1], 1.0));
        }
        let mut rhs = 0.0;
        if let Some(a) = map.coeff(deg) {
            for (k, &j) in x4.iter().enumerate() {
                if a.row[k] != 0.0 {
                    co.push((j, -a.row[k]));
                }
            }
            rhs = a.constant;
        }
        rows.push(eq(format!("match_{deg}"), co, rhs));
    }
    for (letter, vars, blk) in [("p", &p, &pb), ("q", &q, &qb)] {
        for (deg, &v) in vars.iter().enumerate() {
            let mut co = vec![(v, 1.0)];
            for i in 0..blk.size {
                if deg >= i && deg - i < blk.size {
                    let j = deg - i;
                    if i <= j {
                        co.push((blk.var(i, j), if i == j { -1.0 } else { -2.0 }));
                    }
                }
            }
            rows.push(eq(format!("sos_{letter}_{deg}"), co, 0.0));
        }
    }

    match query.side {
        Side::Left => rows.push(geq("alpha_ge_1", vec![(alpha, 1.0)], 1.0)),
        Side::Right => {
            rows.push(geq("alpha_ge_0", vec![(alpha, 1.0)], 0.0));
            rows.push(geq("alpha_lambda3", vec![(alpha, 1.0), (lambda[2], edge)], 1.0));
        }
    }
    rows.push(geq("gamma1_plus_gamma2", vec![(gamma1, 1.0), (gamma2, 1.0)], 0.0));
    rows.push(geq("gamma1_plus_T_gamma2", vec![(gamma1, 1.0), (gamma2, tf)], 0.0));
    for (k, &l) in lambda.iter().enumerate() {
        rows.push(geq(&format!("lambda{}_nonneg", k + 1), vec![(l, 1.0)], 0.0));
    }

    let a = |c: Vec<(usize, f64)>, k: f64| AffineExpr::new(c, k);
    let uni = |sign: f64| vec![(gamma2, sign), (gamma1, sign / tf)];
    let plus = |mut v: Vec<(usize, f64)>, w: &[(usize, f64)]| {
        v.extend_from_slice(w);
        v
    };
    let soc = match query.side {
        Side::Left => vec![
            SocRow {
                tag: "uniform_nonneg".into(),
                head: a(plus(uni(1.0), &[(alpha, 1.0)]), 0.0),
                tail: vec![a(vec![(beta, 1.0), (lambda[0], -1.0)], 0.0), a(plus(uni(1.0), &[(alpha, -1.0)]), 0.0)],
            },
            SocRow {
                tag: "spike_ge_1".into(),
                head: a(vec![(gamma2, 1.0), (gamma1, 1.0), (alpha, 1.0)], -1.0),
                tail: vec![
                    a(vec![(beta, 1.0), (lambda[1], -1.0)], 0.0),
                    a(vec![(gamma2, 1.0), (gamma1, 1.0), (alpha, -1.0)], 1.0),
                ],
            },
            SocRow {
                tag: "uniform_ge_1_below_edge".into(),
                head: a(plus(uni(1.0), &[(lambda[2], 1.0), (alpha, 1.0)]), -1.0),
                tail: vec![
                    a(vec![(beta, 1.0), (lambda[2], -edge)], 0.0),
                    a(plus(uni(1.0), &[(lambda[2], 1.0), (alpha, -1.0)]), 1.0),
                ],
            },
        ],
        Side::Right => vec![
            SocRow {
                tag: "uniform_nonneg".into(),
                head: a(plus(uni(1.0), &[(alpha, 1.0)]), 0.0),
                tail: vec![a(vec![(beta, 1.0), (lambda[0], -1.0)], 0.0), a(plus(uni(1.0), &[(alpha, -1.0)]), 0.0)],
            },
            SocRow {
                tag: "spike_nonneg".into(),
                head: a(vec![(gamma2, 1.0), (gamma1, 1.0), (alpha, 1.0)], 0.0),
                tail: vec![
                    a(vec![(beta, 1.0), (lambda[1], -1.0)], 0.0),
                    a(vec![(gamma2, 1.0), (gamma1, 1.0), (alpha, -1.0)], 0.0),
                ],
            },
            SocRow {
                tag: "uniform_ge_1_above_edge".into(),
                head: a(plus(uni(1.0), &[(lambda[2], edge), (alpha, 1.0)]), -1.0),
                tail: vec![
                    a(vec![(beta, 1.0), (lambda[2], -1.0)], 0.0),
                    a(plus(uni(1.0), &[(lambda[2], -edge), (alpha, -1.0)]), 1.0),
                ],
            },
        ],
    };

    let problem = ConicProblem {
        t,
        side: query.side,
        gamma: query.gamma,
        var_names: b.names,
        objective,
        rows,
        soc,
        psd: vec![pb, qb],
    };
    let layout = SdpLayout { alpha, beta, gamma1, gamma2, lambda, p, q };
    Ok((problem, layout))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::MomentSpec;

    fn problem(t: usize, side: Side) -> ConicProblem {
        let q = BoundQuery::new(MomentSpec::new(t, 1.0, 0.5, 0.1), 0.8, side);
        assemble_sdp(&q).unwrap().0
    }

    #[test]
    fn block_sizes_and_counts() {
        for t in 2..=4 {
            for side in [Side::Left, Side::Right] {
                let p = problem(t, side);
                assert_eq!(p.psd[0].size, t + 1);
                assert_eq!(p.psd[1].size, t);
                assert_eq!(p.rows_tagged("match_").count(), 2 * t + 1);
                assert_eq!(p.rows_tagged("sos_p_").count(), 2 * t + 1);
                assert_eq!(p.rows_tagged("sos_q_").count(), 2 * t - 1);
                assert_eq!(p.soc.len(), 3);
            }
        }
    }

    #[test]
    fn t2_merges_degree_two() {
        let p = problem(2, Side::Left);
        let m2 = p.rows.iter().find(|r| r.tag == "match_2").unwrap();
        // alpha and gamma2 both enter the merged row
        assert!(m2.coeffs.iter().any(|&(j, _)| j == 0));
        assert!(m2.coeffs.iter().any(|&(j, c)| j == 3 && c != 0.0));
        assert_eq!(m2.rhs, -1.0);
    }

    #[test]
    fn psd_margin_detects_indefinite() {
        assert!(psd_margin(&[vec![2.0, 1.0], vec![1.0, 2.0]], 0.0) > 0.0);
        assert!(psd_margin(&[vec![1.0, 2.0], vec![2.0, 1.0]], 0.0) < 0.0);
    }

    #[test]
    fn text_has_all_sections() {
        let s = problem(3, Side::Right).to_text();
        for kw in ["VAR ", "OBJ", "EQ match_0", "GEQ ", "SOC ", "PSD P 4", "PSD Q 3", "END"] {
            assert!(s.contains(kw), "{kw}");
        }
    }
}
