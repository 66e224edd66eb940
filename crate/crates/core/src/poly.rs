//! Univariate real polynomials: root isolation on `[0, inf)` and global
//! minimisation over intervals and rays.
//!
//! Root isolation runs on Sturm sequences. Polynomials of degree above
//! [`STURM_MAX_DEGREE`], or whose floating-point Sturm roots come out
//! inconsistent or disagree with it, go through a Rolle recursion instead: the critical points of
//! `p / x^m` split `(0, inf)` into monotone pieces, each bisected for a sign
//! change. That recursion only needs as many levels as `p` has nonzero terms,
//! which keeps the sparse degree-2T tail polynomials cheap for large T.

use crate::error::{Error, Result};

/// Above this degree the Sturm chain loses too much precision in `f64`.
pub const STURM_MAX_DEGREE: usize = 24;

/// Coefficients in increasing degree, trailing zeros trimmed.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealRoot {
    pub x: f64,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    /// `[a, inf)`
    Ray(f64),
    /// `[a, b]`
    Interval(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub argmin: f64,
    pub value: f64,
    /// Set on rays where `p -> -inf`; `argmin` is then a point with `p < 0`.
    pub unbounded: bool,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Polynomial { coeffs }
    }

    pub fn zero() -> Self {
        Polynomial { coeffs: Vec::new() }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn leading(&self) -> f64 {
        self.coeffs.last().copied().unwrap_or(0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// Sign of `p(x)` for `x >= 0` without overflow: for `x > 1` the reversed
    /// polynomial is evaluated at `1/x`.
    fn sign_at(&self, x: f64) -> f64 {
        if x <= 1.0 {
            return sgn(self.eval(x));
        }
        let y = 1.0 / x;
        sgn(self.coeffs.iter().fold(0.0, |acc, &c| acc * y + c))
    }

    pub fn derivative(&self) -> Polynomial {
        Polynomial::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, &c)| i as f64 * c)
                .collect(),
        )
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn scaled(&self, f: f64) -> Polynomial {
        Polynomial::new(self.coeffs.iter().map(|c| c * f).collect())
    }

    /// Divides by the largest coefficient magnitude.
    pub fn normalized(&self) -> Polynomial {
        let m = self.max_abs_coeff();
        if m == 0.0 {
            self.clone()
        } else {
            self.scaled(1.0 / m)
        }
    }

    /// `q(y) = p(y + a)`.
    pub fn taylor_shift(&self, a: f64) -> Polynomial {
        let mut c = self.coeffs.clone();
        let n = c.len();
        for i in 0..n {
            for j in (i..n.saturating_sub(1)).rev() {
                c[j] += a * c[j + 1];
            }
        }
        Polynomial::new(c)
    }

    /// Index of the lowest nonzero coefficient.
    fn low_order(&self) -> usize {
        self.coeffs.iter().position(|&c| c != 0.0).unwrap_or(0)
    }

    /// Quotient and remainder of long division.
    pub fn div_rem(&self, d: &Polynomial) -> (Polynomial, Polynomial) {
        assert!(!d.is_zero(), "division by zero polynomial");
        if self.coeffs.len() < d.coeffs.len() {
            return (Polynomial::zero(), self.clone());
        }
        let mut r = self.coeffs.clone();
        let dd = d.degree();
        let lead = d.leading();
        let mut q = vec![0.0; r.len() - dd];
        for k in (0..q.len()).rev() {
            let f = r[k + dd] / lead;
            q[k] = f;
            for (j, &dc) in d.coeffs.iter().enumerate() {
                r[k + j] -= f * dc;
            }
            r[k + dd] = 0.0;
        }
        r.truncate(dd);
        (Polynomial::new(q), Polynomial::new(r))
    }

    /// Upper bound on the magnitude of every root (Cauchy).
    pub fn root_bound(&self) -> f64 {
        let lead = self.leading().abs();
        let m = self.coeffs[..self.coeffs.len().saturating_sub(1)]
            .iter()
            .fold(0.0_f64, |m, c| m.max(c.abs() / lead));
        1.0 + m
    }
}

fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Sturm chain `p, p', -rem(p, p'), ...`, each member rescaled to unit
/// max-coefficient. A remainder is treated as zero when it is tiny relative
/// to its dividend, so chains of non-square-free inputs end at the gcd.
pub fn sturm_sequence(p: &Polynomial) -> Vec<Polynomial> {
    let mut seq = vec![p.normalized()];
    if p.degree() == 0 {
        return seq;
    }
    seq.push(p.derivative().normalized());
    loop {
        let n = seq.len();
        if seq[n - 1].degree() == 0 {
            break;
        }
        let (_, r) = seq[n - 2].div_rem(&seq[n - 1]);
        if r.max_abs_coeff() <= 1e-11 * seq[n - 2].max_abs_coeff() {
            break;
        }
        seq.push(r.scaled(-1.0).normalized());
    }
    seq
}

/// Number of sign changes of the chain at `x >= 0` (zeros skipped).
pub fn sturm_variations(seq: &[Polynomial], x: f64) -> usize {
    let mut last = 0.0;
    let mut changes = 0;
    for s in seq {
        let v = s.sign_at(x);
        if v != 0.0 {
            if last != 0.0 && v != last {
                changes += 1;
            }
            last = v;
        }
    }
    changes
}

fn sturm_variations_inf(seq: &[Polynomial]) -> usize {
    let mut last = 0.0;
    let mut changes = 0;
    for s in seq {
        let v = sgn(s.leading());
        if v != 0.0 {
            if last != 0.0 && v != last {
                changes += 1;
            }
            last = v;
        }
    }
    changes
}

/// Splitting point that halves orders of magnitude on wide positive
/// intervals. The small off-centre shift keeps split points away from the
/// round numbers where test and tail polynomials like to have roots.
fn split(a: f64, b: f64) -> f64 {
    const SHIFT: f64 = 0.001_173_;
    if a > 0.0 && b > 4.0 * a {
        (a * b).sqrt() * (1.0 + SHIFT)
    } else if a <= 0.0 && b > 2.0 {
        1.0 + SHIFT
    } else {
        0.5 * (a + b) + SHIFT * (b - a)
    }
}

fn narrow(a: f64, b: f64, tol: f64) -> bool {
    b - a <= tol * b.abs().max(1.0)
}

/// Bisection on a bracket with a sign change, then guarded Newton polish.
fn refine_sign_change(p: &Polynomial, dp: &Polynomial, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let sa = p.sign_at(a);
    if sa == 0.0 {
        return a;
    }
    if p.sign_at(b) == 0.0 {
        return b;
    }
    let mut it = 0;
    while !narrow(a, b, tol * 1e-3) && it < 400 {
        let m = split(a, b);
        if m <= a || m >= b {
            break;
        }
        let sm = p.sign_at(m);
        if sm == 0.0 {
            return m;
        }
        if sm == sa {
            a = m;
        } else {
            b = m;
        }
        it += 1;
    }
    let mut x = 0.5 * (a + b);
    for _ in 0..4 {
        let d = dp.eval(x);
        if d == 0.0 || !d.is_finite() {
            break;
        }
        let nx = x - p.eval(x) / d;
        if !(nx >= a && nx <= b) || p.eval(nx).abs() >= p.eval(x).abs() {
            break;
        }
        x = nx;
    }
    x
}

/// Distinct roots of `p` in `(lo, hi]` via Sturm counting.
/// Returns `None` when the floating-point counts are inconsistent.
fn sturm_roots(p: &Polynomial, lo: f64, hi: f64, tol: f64) -> Option<Vec<f64>> {
    let seq = sturm_sequence(p);
    let vlo = sturm_variations(&seq, lo);
    let vhi = if hi.is_infinite() {
        sturm_variations_inf(&seq)
    } else {
        sturm_variations(&seq, hi)
    };
    if vlo < vhi || vlo - vhi > p.degree() {
        return None;
    }
    let dp = p.derivative();
    let mut out = Vec::new();
    let mut stack = vec![(lo, hi, vlo, vhi)];
    let mut budget = 20_000;
    while let Some((a, b, va, vb)) = stack.pop() {
        budget -= 1;
        if budget == 0 || va < vb {
            return None;
        }
        let n = va - vb;
        if n == 0 {
            continue;
        }
        if n == 1 || narrow(a, b, tol) {
            out.push(locate_single(p, &dp, a, b, tol));
            continue;
        }
        let mut m = split(a, b);
        // a split point on a root (worse, a multiple one) zeroes the chain
        for k in 1..=8 {
            if p.sign_at(m) != 0.0 {
                break;
            }
            m += (b - a) * 1e-7 * k as f64;
        }
        if !(m > a && m < b) {
            return None;
        }
        let vm = sturm_variations(&seq, m);
        if vm > va || vm < vb {
            return None;
        }
        stack.push((m, b, vm, vb));
        stack.push((a, m, va, vm));
    }
    out.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Some(out)
}

/// Root in `(a, b]` known to be unique: bisect if there is a sign change,
/// otherwise it is a touching (even-multiplicity) root and is found as a
/// critical point.
fn locate_single(p: &Polynomial, dp: &Polynomial, a: f64, b: f64, tol: f64) -> f64 {
    if p.sign_at(a) * p.sign_at(b) < 0.0 || p.sign_at(b) == 0.0 {
        return refine_sign_change(p, dp, a, b, tol);
    }
    let crit = rolle_roots(dp, a, b, tol);
    crit.into_iter()
        .min_by(|x, y| p.eval(*x).abs().partial_cmp(&p.eval(*y).abs()).unwrap())
        .unwrap_or(0.5 * (a + b))
}

/// Reduced derivative on `x > 0`: for `m` the lowest nonzero degree,
/// `x^{m+1} (p / x^m)' = x p' - m p`, with its own low-order zeros stripped.
/// Its positive roots are the critical points of `p / x^m`.
fn positive_critical_poly(p: &Polynomial) -> Polynomial {
    let m = p.low_order();
    let c: Vec<f64> = p
        .coeffs
        .iter()
        .enumerate()
        .map(|(i, &c)| (i as f64 - m as f64) * c)
        .collect();
    let q = Polynomial::new(c);
    let k = q.low_order();
    Polynomial::new(q.coeffs[k..].to_vec())
}

/// Distinct roots of `p` in `[lo, hi]`, `lo >= 0`, by Rolle recursion.
fn rolle_roots(p: &Polynomial, lo: f64, hi: f64, tol: f64) -> Vec<f64> {
    if p.is_zero() || p.degree() == 0 {
        return Vec::new();
    }
    let m = p.low_order();
    let reduced = Polynomial::new(p.coeffs[m..].to_vec());
    let mut roots = Vec::new();
    if m > 0 && lo <= 0.0 {
        roots.push(0.0);
    }
    let lo = lo.max(0.0);
    if reduced.degree() == 0 {
        return roots;
    }
    let hi = hi.min(reduced.root_bound());
    if hi < lo {
        return roots;
    }
    let dp = reduced.derivative();
    let crit_poly = positive_critical_poly(&reduced);
    let crit = rolle_roots(&crit_poly, lo, hi, tol);
    let mut pts = vec![lo];
    pts.extend(crit.iter().copied().filter(|&c| c > lo && c < hi));
    pts.push(hi);
    let scale = reduced.max_abs_coeff();
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (sa, sb) = (reduced.sign_at(a), reduced.sign_at(b));
        if sa == 0.0 {
            roots.push(a);
        } else if sa * sb < 0.0 {
            roots.push(refine_sign_change(&reduced, &dp, a, b, tol));
        }
    }
    if reduced.sign_at(hi) == 0.0 {
        roots.push(hi);
    }
    // touching roots at interior critical points
    for &c in &crit {
        if c > lo && c < hi {
            let v = reduced.eval(c);
            let local = scale * c.abs().max(1.0).powi(reduced.degree() as i32);
            if v.abs() <= 1e-12 * local {
                roots.push(c);
            }
        }
    }
    roots.sort_by(|x, y| x.partial_cmp(y).unwrap());
    roots.dedup_by(|x, y| narrow(*y, *x, tol.max(1e-12)));
    roots
}

/// Sturm chains built in floating point can both drop and invent roots on
/// sparse inputs, so their output is accepted only when the Rolle recursion
/// finds the same roots. Rolle splits multiple roots into clusters of
/// round-off sign flips, so the comparison is by nearest partner.
fn agree(a: &[f64], b: &[f64]) -> bool {
    let near = |x: f64, ys: &[f64]| ys.iter().any(|y| (x - y).abs() <= 1e-6 * x.abs().max(y.abs()).max(1.0));
    a.iter().all(|&x| near(x, b)) && b.iter().all(|&y| near(y, a))
}

/// Distinct roots of `p` in `[lo, hi]` (`lo >= 0`, `hi` may be infinite).
fn roots_on(p: &Polynomial, lo: f64, hi: f64, tol: f64) -> Vec<f64> {
    let p = p.normalized();
    if p.degree() == 0 {
        return Vec::new();
    }
    let mut roots = Vec::new();
    let mut q = p.clone();
    if lo <= 0.0 && p.coeffs[0] == 0.0 {
        roots.push(0.0);
        let m = p.low_order();
        q = Polynomial::new(p.coeffs[m..].to_vec());
        if q.degree() == 0 {
            return roots;
        }
    }
    let hi_eff = hi.min(q.root_bound());
    if hi_eff < lo {
        return roots;
    }
    let found = if q.degree() <= STURM_MAX_DEGREE {
        let rolle = rolle_roots(&q, lo, hi_eff, tol);
        match sturm_roots(&q, lo, hi_eff, tol) {
            Some(r) if agree(&r, &rolle) => r,
            _ => rolle,
        }
    } else {
        rolle_roots(&q, lo, hi_eff, tol)
    };
    // Sturm counts on (lo, hi]; pick up an exact root at lo
    if q.sign_at(lo) == 0.0 {
        roots.push(lo);
    }
    roots.extend(found);
    roots.sort_by(|x, y| x.partial_cmp(y).unwrap());
    roots.dedup_by(|x, y| narrow(*y, *x, tol.max(1e-12)));
    roots
}

fn multiplicity(p: &Polynomial, x: f64) -> usize {
    let mut d = p.clone();
    let mut k = 0;
    let scale = p.max_abs_coeff() * x.abs().max(1.0).powi(p.degree() as i32);
    let mut fact = 1.0;
    while k < p.degree() {
        let v = d.eval(x).abs() / fact;
        if v > 1e-7 * scale {
            break;
        }
        k += 1;
        fact *= k as f64;
        d = d.derivative();
    }
    k.max(1)
}

/// Real roots of `p` on `[0, inf)`, sorted, each reported once.
pub fn isolate_nonnegative_roots(p: &Polynomial, tol: f64) -> Result<Vec<RealRoot>> {
    if p.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol = {tol}")));
    }
    let pn = p.normalized();
    Ok(roots_on(&pn, 0.0, f64::INFINITY, tol)
        .into_iter()
        .map(|x| {
            let mut m = multiplicity(&pn, x);
            let odd = pn.sign_at((x - tol).max(0.0)) * pn.sign_at(x + tol.max(1e-9 * x)) < 0.0;
            if x > 0.0 && odd == m.is_multiple_of(2) {
                m += 1;
            }
            RealRoot { x, multiplicity: m }
        })
        .collect())
}

/// Global minimum of `p` over a ray or an interval, from its endpoints and
/// the real roots of `p'` inside the domain.
pub fn global_min(p: &Polynomial, domain: Domain, tol: f64) -> Result<Minimum> {
    let (a, b) = match domain {
        Domain::Ray(a) => (a, f64::INFINITY),
        Domain::Interval(a, b) => (a, b),
    };
    if !(a <= b) {
        return Err(Error::EmptyDomain(a, b));
    }
    if a < 0.0 {
        let shifted = p.taylor_shift(a);
        let d = match domain {
            Domain::Ray(_) => Domain::Ray(0.0),
            Domain::Interval(_, b) => Domain::Interval(0.0, b - a),
        };
        let m = global_min(&shifted, d, tol)?;
        return Ok(Minimum {
            argmin: m.argmin + a,
            value: p.eval(m.argmin + a),
            ..m
        });
    }
    if p.degree() == 0 {
        return Ok(Minimum {
            argmin: a,
            value: p.eval(a),
            unbounded: false,
        });
    }
    if b.is_infinite() && p.leading() < 0.0 {
        let mut x = a.max(1.0);
        while p.sign_at(x) >= 0.0 {
            x *= 2.0;
        }
        return Ok(Minimum {
            argmin: x,
            value: p.eval(x),
            unbounded: true,
        });
    }
    let mut best = Minimum {
        argmin: a,
        value: p.eval(a),
        unbounded: false,
    };
    let mut consider = |x: f64| {
        let v = p.eval(x);
        if v < best.value {
            best.argmin = x;
            best.value = v;
        }
    };
    if b.is_finite() {
        consider(b);
    }
    for c in roots_on(&p.derivative(), a, b, tol) {
        if c >= a && c <= b {
            consider(c);
        }
    }
    Ok(best)
}
