//! Separation oracles for the constraint families of the reduced dual
//! programs. Every family has the form
//! `alpha + beta s + gamma1 w(s) + gamma2 s^2 >= rhs` over a scalar index,
//! so every cut row is `(1, s, w(s), s^2)`.

use crate::poly::{isolate_nonnegative_roots, Polynomial};
use crate::primal_oracle::Atom;
use crate::sip::{Cut, SemiInfiniteConstraint, SeparationResult};

/// Relative size below which a combined coefficient is round-off from the
/// master LP and is treated as exactly zero.
pub const SNAP_RTOL: f64 = 1e-11;

pub fn snap(v: f64, scale: f64) -> f64 {
    if v.abs() <= SNAP_RTOL * scale {
        0.0
    } else {
        v
    }
}

pub fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |a, v| a.max(v.abs()))
}

/// A piece `[lo, hi]` (with `hi = inf` for rays) on which
/// `w(s) = w[0] + w[1] s + w[2] s^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadPiece {
    pub lo: f64,
    pub hi: f64,
    pub w: [f64; 3],
}

impl QuadPiece {
    pub fn new(lo: f64, hi: f64, w: [f64; 3]) -> Self {
        QuadPiece { lo, hi, w }
    }

    pub fn contains(&self, s: f64) -> bool {
        s >= self.lo && s <= self.hi
    }

    pub fn w_at(&self, s: f64) -> f64 {
        self.w[0] + s * (self.w[1] + s * self.w[2])
    }
}

/// How a witness `s` of a family maps back to a point of the orthant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WitnessShape {
    /// `(s / T) 1`, where `||xi||^2 = s^2 / T`.
    Uniform,
    /// `s e_1`, where `||xi||^2 = s^2`.
    Spike,
    /// No canonical point.
    Opaque,
}

/// Piecewise-quadratic family with closed-form separation on each piece.
#[derive(Debug, Clone)]
pub struct QuadraticFamily {
    pub label: String,
    pub rhs: f64,
    pub pieces: Vec<QuadPiece>,
    pub shape: WitnessShape,
    pub seeds: Vec<f64>,
}

impl QuadraticFamily {
    pub fn new(label: impl Into<String>, rhs: f64, pieces: Vec<QuadPiece>, shape: WitnessShape) -> Self {
        QuadraticFamily {
            label: label.into(),
            rhs,
            pieces,
            shape,
            seeds: Vec::new(),
        }
    }

    /// Single piece `w(s) = c s^2` on `[lo, hi]`.
    pub fn scaled_square(label: impl Into<String>, rhs: f64, c: f64, lo: f64, hi: f64, shape: WitnessShape) -> Self {
        QuadraticFamily::new(label, rhs, vec![QuadPiece::new(lo, hi, [0.0, 0.0, c])], shape)
    }

    pub fn with_seeds(mut self, seeds: impl IntoIterator<Item = f64>) -> Self {
        self.seeds = seeds
            .into_iter()
            .filter(|&s| self.pieces.iter().any(|p| p.contains(s)))
            .collect();
        self
    }

    fn piece_at(&self, s: f64) -> Option<&QuadPiece> {
        self.pieces.iter().find(|p| p.contains(s))
    }

    /// `alpha + beta s + gamma1 w(s) + gamma2 s^2` at `s`.
    pub fn value(&self, x: &[f64], s: f64) -> Option<f64> {
        self.piece_at(s)
            .map(|p| x[0] + x[1] * s + x[2] * p.w_at(s) + x[3] * s * s)
    }

    /// Minimiser and minimum of the family value on one piece. When the
    /// value is unbounded below on a ray, a point with value at most
    /// `rhs - 1` is returned instead.
    fn piece_min(&self, p: &QuadPiece, x: &[f64]) -> (f64, f64) {
        let c0 = x[0] + x[2] * p.w[0];
        let xm = max_abs(x);
        let c1 = snap(x[1] + x[2] * p.w[1], xm * (1.0 + p.w[1].abs()));
        let c2 = snap(x[3] + x[2] * p.w[2], xm * (1.0 + p.w[2].abs()));
        let f = |s: f64| c0 + s * (c1 + s * c2);
        if p.hi.is_infinite() && (c2 < 0.0 || (c2 == 0.0 && c1 < 0.0)) {
            let mut s = p.lo.max(1.0);
            while f(s) > self.rhs - 1.0 && s < 1e300 {
                s *= 2.0;
            }
            return (s, f(s));
        }
        let mut best = (p.lo, f(p.lo));
        if p.hi.is_finite() {
            let v = f(p.hi);
            if v < best.1 {
                best = (p.hi, v);
            }
        }
        if c2 > 0.0 {
            let v = -c1 / (2.0 * c2);
            if v > p.lo && v < p.hi {
                let fv = f(v);
                if fv < best.1 {
                    best = (v, fv);
                }
            }
        }
        best
    }

    /// Smallest family value and its witness.
    pub fn minimum(&self, x: &[f64]) -> (f64, f64) {
        self.pieces
            .iter()
            .map(|p| self.piece_min(p, x))
            .fold((f64::NAN, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
    }

    pub fn atom(&self, s: f64, t: usize) -> Option<Atom> {
        match self.shape {
            WitnessShape::Uniform => Some(Atom::Uniform { z: s / t as f64 }),
            WitnessShape::Spike => Some(Atom::OneDistinct { x: s, y: 0.0 }),
            WitnessShape::Opaque => None,
        }
    }
}

impl SemiInfiniteConstraint for QuadraticFamily {
    fn description(&self) -> String {
        self.label.clone()
    }

    fn rhs(&self) -> f64 {
        self.rhs
    }

    fn cut_at(&self, s: f64) -> Option<Cut> {
        self.piece_at(s)
            .map(|p| Cut::new(vec![1.0, s, p.w_at(s), s * s], self.rhs))
    }

    fn separate(&self, x: &[f64]) -> SeparationResult {
        let (s, _) = self.minimum(x);
        match self.cut_at(s) {
            Some(cut) => SeparationResult::from_cut(s, cut, x),
            None => SeparationResult::Satisfied,
        }
    }

    fn separate_all(&self, x: &[f64]) -> Vec<SeparationResult> {
        self.pieces
            .iter()
            .map(|p| {
                let (s, _) = self.piece_min(p, x);
                let cut = Cut::new(vec![1.0, s, p.w_at(s), s * s], self.rhs);
                SeparationResult::from_cut(s, cut, x)
            })
            .filter(|r| r.violation() > 0.0)
            .collect()
    }

    fn seeds(&self) -> Vec<f64> {
        self.seeds.clone()
    }
}

/// Nonnegativity of the tail polynomial on `kappa >= 0`, written in the
/// rescaled variable `u = kappa / gamma^{1/(T(T-1))}`. The two-level point
/// is `(r u^{T-1}, r/u, ..., r/u)` with `r = gamma^{1/T}`, whose product is
/// `gamma` for every `u > 0`.
#[derive(Debug, Clone)]
pub struct TailPolynomialFamily {
    pub t: usize,
    /// `gamma^{1/T}`
    pub r: f64,
}

/// Sampled exponents `u = 2^k` scanned in addition to stationary points.
const SAMPLE_EXPONENTS: i32 = 30;

impl TailPolynomialFamily {
    pub fn new(t: usize, gamma: f64) -> Self {
        TailPolynomialFamily {
            t,
            r: (gamma.ln() / t as f64).exp(),
        }
    }

    /// `(s, ||xi||^2)` of the two-level point at `u`.
    pub fn point(&self, u: f64) -> (f64, f64) {
        let tm = (self.t - 1) as f64;
        let hi = u.powi(self.t as i32 - 1);
        let s = self.r * (hi + tm / u);
        let q = self.r * self.r * (hi * hi + tm / (u * u));
        (s, q)
    }

    pub fn atom(&self, u: f64) -> Atom {
        Atom::OneDistinct {
            x: self.r * u.powi(self.t as i32 - 1),
            y: self.r / u,
        }
    }

    /// `alpha + beta s + gamma1 q + gamma2 s^2 - 1` at `u`.
    pub fn slack(&self, x: &[f64], u: f64) -> f64 {
        let (s, q) = self.point(u);
        x[0] - 1.0 + x[1] * s + x[2] * q + x[3] * s * s
    }

    /// `u^2 * slack(u)` as a polynomial in `u`.
    pub fn polynomial(&self, x: &[f64]) -> Polynomial {
        let t = self.t;
        let tm = (t - 1) as f64;
        let r = self.r;
        let r2 = r * r;
        let mut c = vec![0.0; 2 * t + 1];
        let xm = max_abs(x);
        c[0] = tm * r2 * snap(x[2] + tm * x[3], xm * tm);
        c[1] = tm * r * snap(x[1], xm);
        c[2] += snap(x[0] - 1.0, xm);
        c[t] += 2.0 * tm * r2 * snap(x[3], xm);
        c[t + 1] += r * snap(x[1], xm);
        c[2 * t] += r2 * snap(x[2] + x[3], xm);
        Polynomial::new(c)
    }

    /// Candidate minimisers of `slack`: stationary points plus a
    /// geometric sample.
    fn candidates(&self, x: &[f64]) -> Vec<f64> {
        let l = self.polynomial(x);
        let mut out = Vec::new();
        if !l.is_zero() {
            // d/du (l / u^2) = (u l' - 2 l) / u^3
            let h: Vec<f64> = l
                .coeffs()
                .iter()
                .enumerate()
                .map(|(i, a)| (i as f64 - 2.0) * a)
                .collect();
            let h = Polynomial::new(h);
            if !h.is_zero() {
                if let Ok(roots) = isolate_nonnegative_roots(&h, 1e-13) {
                    out.extend(roots.into_iter().map(|r| r.x).filter(|&u| u > 0.0));
                }
            }
        }
        let kmax = ((700.0 / (2.0 * self.t as f64 * std::f64::consts::LN_2)) as i32).min(SAMPLE_EXPONENTS);
        out.extend((-kmax..=kmax).map(|k| 2f64.powi(k)));
        out
    }
}

impl TailPolynomialFamily {
    // violation taken from the polynomial value; the row form cancels badly at extreme u
    fn violated(&self, u: f64, v: f64) -> SeparationResult {
        match self.cut_at(u) {
            Some(cut) if v < 0.0 => SeparationResult::Violated {
                witness: u,
                violation: -v,
                cut,
            },
            _ => SeparationResult::Satisfied,
        }
    }
}

impl SemiInfiniteConstraint for TailPolynomialFamily {
    fn description(&self) -> String {
        format!("tail polynomial nonnegative on kappa >= 0 (T = {})", self.t)
    }

    fn rhs(&self) -> f64 {
        1.0
    }

    fn cut_at(&self, u: f64) -> Option<Cut> {
        if !(u > 0.0) {
            return None;
        }
        let (s, q) = self.point(u);
        if !(s.is_finite() && q.is_finite()) {
            return None;
        }
        Some(Cut::new(vec![1.0, s, q, s * s], 1.0))
    }

    fn separate(&self, x: &[f64]) -> SeparationResult {
        let l = self.polynomial(x);
        let mut best: Option<(f64, f64)> = None;
        for u in self.candidates(x) {
            let v = l.eval(u) / (u * u);
            if v.is_finite() && best.is_none_or(|b| v < b.1) {
                best = Some((u, v));
            }
        }
        match best {
            Some((u, v)) => self.violated(u, v),
            None => SeparationResult::Satisfied,
        }
    }

    fn separate_all(&self, x: &[f64]) -> Vec<SeparationResult> {
        let l = self.polynomial(x);
        let mut pts: Vec<(f64, f64)> = self
            .candidates(x)
            .into_iter()
            .map(|u| (u, l.eval(u) / (u * u)))
            .filter(|p| p.1.is_finite())
            .collect();
        pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut out: Vec<SeparationResult> = Vec::new();
        // keep local minima of the sampled sequence that are violated
        for i in 0..pts.len() {
            let v = pts[i].1;
            let left = i == 0 || pts[i - 1].1 >= v;
            let right = i + 1 == pts.len() || pts[i + 1].1 >= v;
            if v < 0.0 && left && right {
                let r = self.violated(pts[i].0, v);
                if r.violation() > 0.0 {
                    out.push(r);
                }
            }
        }
        if out.is_empty() {
            let r = self.separate(x);
            if r.violation() > 0.0 {
                out.push(r);
            }
        }
        out
    }

    fn seeds(&self) -> Vec<f64> {
        (-2..=2).map(|k| 2f64.powi(k)).collect()
    }
}
