//! Sharp bounds `L(gamma) = sup P(prod xi <= gamma)` and
//! `R(gamma) = sup P(prod xi >= gamma)` over the symmetric ambiguity set,
//! computed as four-variable semi-infinite programs in
//! `(alpha, beta, gamma1, gamma2)`.

use serde::{Deserialize, Serialize};

use crate::analytic::{self, root_t};
use crate::error::{Error, Result};
use crate::event::Tail;
use crate::families::{max_abs, snap, QuadPiece, QuadraticFamily, TailPolynomialFamily, WitnessShape};
use crate::moments::MomentSpec;
use crate::poly::Polynomial;
use crate::primal_oracle::{Atom, DiscreteSymmetricDistribution};
pub use crate::sdp::{assemble_sdp, ConicProblem};
use crate::sip::{solve_sip, CutSource, Cut, DualPoint, SemiInfiniteConstraint, SipOptions, SipSolution};

/// Which tail of the product is bounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// `prod xi <= gamma`
    Left,
    /// `prod xi >= gamma`
    Right,
}

impl Side {
    pub fn tail(self) -> Tail {
        match self {
            Side::Left => Tail::Leq,
            Side::Right => Tail::Geq,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundQuery {
    pub spec: MomentSpec,
    pub gamma: f64,
    pub side: Side,
}

impl BoundQuery {
    pub fn new(spec: MomentSpec, gamma: f64, side: Side) -> Self {
        BoundQuery { spec, gamma, side }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.ensure_strict()?;
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!("gamma = {} (need > 0)", self.gamma)));
        }
        Ok(())
    }
}

/// Closed-form result that replaced the cutting-plane solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shortcut {
    /// `T > T0`: the left tail bound is 1.
    Absorption,
    /// `rho >= 0` and `gamma <= mu^T`: the right tail bound is 1.
    TrivialRegion,
    /// `gamma >= gamma_bar`: the right tail bound equals `R'`.
    RelaxedClosedForm,
}

impl Shortcut {
    pub fn tag(self) -> &'static str {
        match self {
            Shortcut::Absorption => "absorption",
            Shortcut::TrivialRegion => "trivial_region",
            Shortcut::RelaxedClosedForm => "relaxed_closed_form",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundOptions {
    pub sip: SipOptions,
    /// Apply the closed-form shortcuts before solving.
    pub shortcuts: bool,
    /// Left tail only: add `gamma1 >= 0` (the relaxed program `L'`).
    pub relaxed_gamma1: bool,
}

impl Default for BoundOptions {
    fn default() -> Self {
        BoundOptions {
            sip: SipOptions::default(),
            shortcuts: true,
            relaxed_gamma1: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub value: f64,
    pub dual: DualPoint,
    pub shortcut: Option<Shortcut>,
    pub iterations: usize,
    /// Largest family violation at the returned point, in units of `alpha`.
    pub max_violation: f64,
    /// `value + max_violation`: the objective of a point feasible for
    /// every family, hence a rigorous upper bound.
    pub certified_upper: f64,
    /// Atoms carrying the final master's dual weights, when solved.
    pub support: Option<DiscreteSymmetricDistribution>,
}

impl BoundResult {
    fn shortcut(value: f64, dual: DualPoint, tag: Shortcut) -> Self {
        BoundResult {
            value,
            dual,
            shortcut: Some(tag),
            iterations: 0,
            max_violation: 0.0,
            certified_upper: value,
            support: None,
        }
    }

    /// The value clipped into `[0, 1]` for reporting.
    pub fn reported(&self) -> f64 {
        self.value.clamp(0.0, 1.0)
    }
}

/// Objective coefficients of `(alpha, beta, gamma1, gamma2)`.
pub fn dual_objective(spec: &MomentSpec) -> [f64; 4] {
    let t = spec.tf();
    [1.0, t * spec.mu, t * spec.second_moment(), spec.sum_second_moment()]
}

/// One coefficient of the tail polynomial, affine in the dual point:
/// `a = row . (alpha, beta, gamma1, gamma2) + constant`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineCoeff {
    pub degree: usize,
    pub row: [f64; 4],
    pub constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailPolynomialMap {
    #[serde(rename = "T")]
    pub t: usize,
    /// Nonzero coefficients sorted by degree; each degree appears once.
    pub coeffs: Vec<AffineCoeff>,
}

impl TailPolynomialMap {
    pub fn coeff(&self, degree: usize) -> Option<&AffineCoeff> {
        self.coeffs.iter().find(|c| c.degree == degree)
    }

    pub fn eval(&self, x: &DualPoint) -> Polynomial {
        let mut c = vec![0.0; 2 * self.t + 1];
        for a in &self.coeffs {
            c[a.degree] += x.dot(&a.row) + a.constant;
        }
        Polynomial::new(c)
    }

    /// [`Self::eval`] with coefficients at LP round-off level set to zero,
    /// as the separation oracle does. Without this a leading coefficient of
    /// `-1e-17` reads as an unbounded polynomial.
    pub fn eval_snapped(&self, x: &DualPoint) -> Polynomial {
        let xm = max_abs(&x.to_array());
        let mut c = vec![0.0; 2 * self.t + 1];
        for a in &self.coeffs {
            let rm = max_abs(&a.row);
            c[a.degree] += snap(x.dot(&a.row) + a.constant, xm * rm);
        }
        Polynomial::new(c)
    }
}

/// Coefficients `a_0, ..., a_{2T}` of the degree-`2T` polynomial in
/// `kappa` whose nonnegativity on `kappa >= 0` encodes the two-level
/// constraint. For `T = 2` the `kappa^2` and `kappa^T` terms merge.
pub fn tail_polynomial_coeffs(spec: &MomentSpec, gamma: f64) -> Result<TailPolynomialMap> {
    spec.check_structure()?;
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument(format!("gamma = {gamma}")));
    }
    let t = spec.t;
    let tm = (t - 1) as f64;
    let g1 = (gamma.ln() / tm).exp();
    let g2 = g1 * g1;
    let mut coeffs = vec![
        AffineCoeff { degree: 0, row: [0.0, 0.0, tm * g2, tm * tm * g2], constant: 0.0 },
        AffineCoeff { degree: 1, row: [0.0, tm * g1, 0.0, 0.0], constant: 0.0 },
        AffineCoeff { degree: 2, row: [1.0, 0.0, 0.0, 0.0], constant: -1.0 },
    ];
    let at = AffineCoeff { degree: t, row: [0.0, 0.0, 0.0, 2.0 * tm * g1], constant: 0.0 };
    if t == 2 {
        coeffs[2].row[3] += at.row[3];
    } else {
        coeffs.push(at);
    }
    coeffs.push(AffineCoeff { degree: t + 1, row: [0.0, 1.0, 0.0, 0.0], constant: 0.0 });
    coeffs.push(AffineCoeff { degree: 2 * t, row: [0.0, 0.0, 1.0, 1.0], constant: 0.0 });
    Ok(TailPolynomialMap { t, coeffs })
}

/// The constraint families of the reduced program, in solve order.
pub struct Families {
    pub quadratic: Vec<QuadraticFamily>,
    pub tail: TailPolynomialFamily,
    pub linear: Vec<Cut>,
}

impl Families {
    pub fn as_dyn(&self) -> Vec<&dyn SemiInfiniteConstraint> {
        let mut v: Vec<&dyn SemiInfiniteConstraint> =
            self.quadratic.iter().map(|f| f as &dyn SemiInfiniteConstraint).collect();
        v.push(&self.tail);
        v
    }

    /// Support atom for a family witness.
    pub fn atom(&self, index: usize, witness: f64, t: usize) -> Option<Atom> {
        if index < self.quadratic.len() {
            self.quadratic[index].atom(witness, t)
        } else {
            Some(self.tail.atom(witness))
        }
    }
}

/// Builds the families for `query` (no shortcuts applied).
pub fn families(query: &BoundQuery, relaxed_gamma1: bool) -> Families {
    let t = query.spec.t;
    let tf = t as f64;
    let r = root_t(query.gamma, tf);
    let edge = tf * r;
    let inf = f64::INFINITY;
    let seeds = |lo: f64, hi: f64| {
        let mut s = vec![lo];
        s.extend((-2..=2).map(|k| edge * 2f64.powi(k)).filter(|&v| v >= lo && v <= hi));
        s
    };
    let c1 = QuadraticFamily::scaled_square("C1: alpha + beta s + (gamma2 + gamma1/T) s^2 >= 0, s >= 0", 0.0, 1.0 / tf, 0.0, inf, WitnessShape::Uniform)
        .with_seeds(seeds(0.0, inf));
    let quadratic = match query.side {
        Side::Left => vec![
            c1,
            QuadraticFamily::scaled_square("C2: alpha + beta s + (gamma1 + gamma2) s^2 >= 1, s >= 0", 1.0, 1.0, 0.0, inf, WitnessShape::Spike)
                .with_seeds(seeds(0.0, inf)),
            QuadraticFamily::new(
                "C3a: alpha + beta s + (gamma2 + gamma1/T) s^2 >= 1, 0 <= s <= T gamma^(1/T)",
                1.0,
                vec![QuadPiece::new(0.0, edge, [0.0, 0.0, 1.0 / tf])],
                WitnessShape::Uniform,
            )
            .with_seeds(seeds(0.0, edge)),
        ],
        Side::Right => vec![
            c1,
            QuadraticFamily::scaled_square("C2: alpha + beta s + (gamma1 + gamma2) s^2 >= 0, s >= 0", 0.0, 1.0, 0.0, inf, WitnessShape::Spike)
                .with_seeds(seeds(0.0, inf)),
            QuadraticFamily::new(
                "C3: alpha + beta s + (gamma2 + gamma1/T) s^2 >= 1, s >= T gamma^(1/T)",
                1.0,
                vec![QuadPiece::new(edge, inf, [0.0, 0.0, 1.0 / tf])],
                WitnessShape::Uniform,
            )
            .with_seeds(seeds(edge, inf)),
        ],
    };
    // recession directions of the families at s -> inf and kappa -> 0
    let mut linear = vec![
        Cut::new(vec![0.0, 0.0, 1.0 / tf, 1.0], 0.0),
        Cut::new(vec![0.0, 0.0, 1.0, 1.0], 0.0),
        Cut::new(vec![0.0, 0.0, 1.0, tf - 1.0], 0.0),
    ];
    if relaxed_gamma1 && query.side == Side::Left {
        linear.push(Cut::new(vec![0.0, 0.0, 1.0, 0.0], 0.0));
    }
    Families {
        quadratic,
        tail: TailPolynomialFamily::new(t, query.gamma),
        linear,
    }
}

/// Checks the closed-form regimes; `None` means a solve is needed.
pub fn shortcut(query: &BoundQuery) -> Result<Option<BoundResult>> {
    let spec = &query.spec;
    match query.side {
        Side::Left => {
            if analytic::is_absorbed(spec) {
                return Ok(Some(BoundResult::shortcut(1.0, DualPoint::new(1.0, 0.0, 0.0, 0.0), Shortcut::Absorption)));
            }
        }
        Side::Right => {
            if spec.rho >= 0.0 && query.gamma.ln() <= spec.tf() * spec.mu.ln() {
                return Ok(Some(BoundResult::shortcut(1.0, DualPoint::new(1.0, 0.0, 0.0, 0.0), Shortcut::TrivialRegion)));
            }
            if analytic::above_gamma_bar(spec, query.gamma)? {
                let b = analytic::relaxed_right_bound(spec, query.gamma)?;
                return Ok(Some(BoundResult::shortcut(b.value, DualPoint::default(), Shortcut::RelaxedClosedForm)));
            }
        }
    }
    Ok(None)
}

/// Solves the reduced program for `query`, after shortcuts if enabled.
pub fn product_bound(query: &BoundQuery, opts: &BoundOptions) -> Result<BoundResult> {
    query.validate()?;
    if opts.shortcuts {
        if let Some(r) = shortcut(query)? {
            return Ok(r);
        }
    }
    let fam = families(query, opts.relaxed_gamma1);
    let sol = solve_sip(&dual_objective(&query.spec), &fam.as_dyn(), &fam.linear, &opts.sip)?;
    Ok(result_from(&sol, &fam, query.spec.t))
}

fn result_from(sol: &SipSolution, fam: &Families, t: usize) -> BoundResult {
    let mut support = DiscreteSymmetricDistribution::new(t);
    for a in &sol.active {
        if let CutSource::Family { index, witness } = a.source {
            if let Some(atom) = fam.atom(index, witness, t) {
                support.push(atom, a.weight);
            }
        }
    }
    BoundResult {
        value: sol.value,
        dual: DualPoint::from_slice(&sol.x),
        shortcut: None,
        iterations: sol.iterations,
        max_violation: sol.max_violation,
        certified_upper: sol.value + sol.max_violation.max(0.0),
        support: Some(support),
    }
}

/// `L(gamma)`.
pub fn left_bound(spec: &MomentSpec, gamma: f64, opts: &BoundOptions) -> Result<BoundResult> {
    product_bound(&BoundQuery::new(*spec, gamma, Side::Left), opts)
}

/// `R(gamma)`.
pub fn right_bound(spec: &MomentSpec, gamma: f64, opts: &BoundOptions) -> Result<BoundResult> {
    product_bound(&BoundQuery::new(*spec, gamma, Side::Right), opts)
}

/// Far atoms reach `(mu + 6 sigma) 2^FAR_DOUBLINGS`; beyond that the
/// moment rows of the primal LP lose too much precision.
pub const FAR_DOUBLINGS: i32 = 12;

/// Atoms for seeding a primal grid when verifying `result`: the dual
/// support, two-level points with product `gamma` over a wide geometric
/// range, and far-out uniform and spike atoms. The far atoms let the LP
/// approach optima that put vanishing mass at infinity (active recession
/// rows), which no bounded grid can attain.
pub fn verification_atoms(query: &BoundQuery, result: &BoundResult) -> Vec<Atom> {
    let spec = &query.spec;
    let mut out: Vec<Atom> = result
        .support
        .as_ref()
        .map(|d| d.atoms.iter().map(|a| a.atom).collect())
        .unwrap_or_default();
    let tail = TailPolynomialFamily::new(spec.t, query.gamma);
    let base = spec.mu + 6.0 * spec.sigma;
    for k in -2 * FAR_DOUBLINGS..=2 * FAR_DOUBLINGS {
        let a = tail.atom(2f64.powf(k as f64 / (2.0 * (spec.tf() - 1.0))));
        if let Atom::OneDistinct { x, y } = a {
            if x.max(y) <= base * 2f64.powi(FAR_DOUBLINGS) {
                out.push(a);
            }
        }
    }
    for k in 1..=FAR_DOUBLINGS {
        let z = base * 2f64.powi(k);
        out.push(Atom::Uniform { z });
        out.push(Atom::OneDistinct { x: z, y: 0.0 });
        out.push(Atom::OneDistinct { x: 0.0, y: z });
    }
    out.retain(|a| match *a {
        Atom::Uniform { z } => z.is_finite(),
        Atom::OneDistinct { x, y } => x.is_finite() && y.is_finite(),
    });
    out
}

/// Smallest value of every family at `x`, each shifted by its right-hand
/// side (negative means violated). Used for independent re-checks.
pub fn family_slacks(query: &BoundQuery, x: &DualPoint) -> Vec<f64> {
    let fam = families(query, false);
    let xv = x.to_array();
    let mut out: Vec<f64> = fam
        .quadratic
        .iter()
        .map(|f| f.minimum(&xv).1 - f.rhs)
        .collect();
    let tail = fam.tail.separate(&xv);
    out.push(-tail.violation());
    out
}
