//! Worst-case probabilities of min, max and sum events through the reduction
//! to the sum `s = ||xi||_1`. For every `s` the event's smallest and largest
//! attainable `||xi||_2^2` are piecewise quadratics `phi_lo`, `phi_hi`; the
//! dual program then has only one-dimensional constraint families.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::{Event, Functional, Tail};
use crate::families::{QuadPiece, QuadraticFamily, WitnessShape};
use crate::moments::MomentSpec;
use crate::primal_oracle::DiscreteSymmetricDistribution;
use crate::product_bounds::{dual_objective, BoundResult};
use crate::sip::{solve_sip, Cut, CutSource, DualPoint, SemiInfiniteConstraint, SipOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PieceValue {
    /// `a s^2 + b s + c`
    Quadratic { a: f64, b: f64, c: f64 },
    /// Event is empty at this `s` (only in `phi_lo`).
    PosInf,
    /// Event is empty at this `s` (only in `phi_hi`).
    NegInf,
}

/// One piece on `[lo, hi]`; consecutive pieces share endpoints, where the
/// finite values agree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiPiece {
    pub lo: f64,
    pub hi: f64,
    pub value: PieceValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseQuadratic {
    pub pieces: Vec<PhiPiece>,
}

impl PiecewiseQuadratic {
    fn new(pieces: Vec<(f64, f64, PieceValue)>) -> Self {
        PiecewiseQuadratic {
            pieces: pieces
                .into_iter()
                .map(|(lo, hi, value)| PhiPiece { lo, hi, value })
                .collect(),
        }
    }

    /// Value at `s >= 0`; the first piece containing `s` wins.
    pub fn eval(&self, s: f64) -> f64 {
        for p in &self.pieces {
            if s >= p.lo && s <= p.hi {
                return match p.value {
                    PieceValue::Quadratic { a, b, c } => c + s * (b + s * a),
                    PieceValue::PosInf => f64::INFINITY,
                    PieceValue::NegInf => f64::NEG_INFINITY,
                };
            }
        }
        f64::NAN
    }

    /// Finite pieces as family pieces `w(s)`.
    fn quad_pieces(&self) -> Vec<QuadPiece> {
        self.pieces
            .iter()
            .filter_map(|p| match p.value {
                PieceValue::Quadratic { a, b, c } => Some(QuadPiece::new(p.lo, p.hi, [c, b, a])),
                _ => None,
            })
            .collect()
    }
}

/// `phi_lo`, `phi_hi` and the effective domain `[lo, hi]` of an event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TablePhi {
    pub lower: PiecewiseQuadratic,
    pub upper: PiecewiseQuadratic,
    pub domain: (f64, f64),
}

fn quad(a: f64, b: f64, c: f64) -> PieceValue {
    PieceValue::Quadratic { a, b, c }
}

/// `g^2 + (s - c)^2 / d`
fn shifted(g: f64, c: f64, d: f64) -> PieceValue {
    quad(1.0 / d, -2.0 * c / d, g * g + c * c / d)
}

/// The piecewise maps for a min, max or sum event. Product events have no
/// piecewise-quadratic form and are rejected.
pub fn table_phi(event: &Event, t: usize) -> Result<TablePhi> {
    let g = event.gamma;
    if !(g > 0.0) {
        return Err(Error::InvalidArgument(format!("gamma = {g}")));
    }
    if t < 2 {
        return Err(Error::InvalidArgument(format!("T = {t}")));
    }
    let tf = t as f64;
    let inf = f64::INFINITY;
    let edge = g * tf;
    let uni = quad(1.0 / tf, 0.0, 0.0);
    let sq = quad(1.0, 0.0, 0.0);
    use PieceValue::{NegInf, PosInf};
    let pq = PiecewiseQuadratic::new;
    let out = match (event.functional, event.tail) {
        // the uniform point has min s / T, so it is admissible up to gamma T
        (Functional::Min, Tail::Leq) => TablePhi {
            lower: pq(vec![(0.0, edge, uni), (edge, inf, shifted(g, g, tf - 1.0))]),
            upper: pq(vec![(0.0, inf, sq)]),
            domain: (0.0, inf),
        },
        (Functional::Min, Tail::Geq) => TablePhi {
            lower: pq(vec![(0.0, edge, PosInf), (edge, inf, uni)]),
            // (s - gamma T)^2 + 2 gamma (s - gamma T) + T gamma^2
            upper: pq(vec![(0.0, edge, NegInf), (edge, inf, quad(1.0, -2.0 * g * (tf - 1.0), g * g * tf * (tf - 1.0)))]),
            domain: (edge, inf),
        },
        (Functional::Max, Tail::Leq) => {
            // k gamma^2 + (s - k gamma)^2 on [k gamma, (k + 1) gamma]
            let mut upper: Vec<(f64, f64, PieceValue)> = (0..t)
                .map(|k| {
                    let kf = k as f64;
                    (kf * g, (kf + 1.0) * g, quad(1.0, -2.0 * kf * g, kf * g * g + kf * kf * g * g))
                })
                .collect();
            upper.push((edge, inf, NegInf));
            TablePhi {
                lower: pq(vec![(0.0, edge, uni), (edge, inf, PosInf)]),
                upper: pq(upper),
                domain: (0.0, edge),
            }
        }
        (Functional::Max, Tail::Geq) => TablePhi {
            lower: pq(vec![(0.0, g, PosInf), (g, edge, shifted(g, g, tf - 1.0)), (edge, inf, uni)]),
            upper: pq(vec![(0.0, g, NegInf), (g, inf, sq)]),
            domain: (g, inf),
        },
        (Functional::Sum, Tail::Leq) => TablePhi {
            lower: pq(vec![(0.0, g, uni), (g, inf, PosInf)]),
            upper: pq(vec![(0.0, g, sq), (g, inf, NegInf)]),
            domain: (0.0, g),
        },
        (Functional::Sum, Tail::Geq) => TablePhi {
            lower: pq(vec![(0.0, g, PosInf), (g, inf, uni)]),
            upper: pq(vec![(0.0, g, NegInf), (g, inf, sq)]),
            domain: (g, inf),
        },
        (Functional::Product, _) => {
            return Err(Error::InvalidArgument(
                "product events have no piecewise-quadratic table; use product_bound".into(),
            ))
        }
    };
    Ok(out)
}

/// The families and linear rows of the reduced program for `event`.
pub fn generic_families(event: &Event, t: usize) -> Result<(Vec<QuadraticFamily>, Vec<Cut>)> {
    let phi = table_phi(event, t)?;
    let tf = t as f64;
    let inf = f64::INFINITY;
    let (lo, hi) = phi.domain;
    let g = event.gamma;
    let mut seeds = vec![0.0, lo, g, tf * g];
    if hi.is_finite() {
        seeds.push(hi);
    }
    seeds.extend((-2..=2).map(|k| tf * g * 2f64.powi(k)));
    let fams = vec![
        QuadraticFamily::scaled_square("B1: alpha + beta s + (gamma2 + gamma1/T) s^2 >= 0, s >= 0", 0.0, 1.0 / tf, 0.0, inf, WitnessShape::Uniform)
            .with_seeds(seeds.clone()),
        QuadraticFamily::scaled_square("B2: alpha + beta s + (gamma1 + gamma2) s^2 >= 0, s >= 0", 0.0, 1.0, 0.0, inf, WitnessShape::Spike)
            .with_seeds(seeds.clone()),
        QuadraticFamily::new("B3: alpha + beta s + gamma2 s^2 + gamma1 phi_lo(s) >= 1 on S", 1.0, phi.lower.quad_pieces(), WitnessShape::Opaque)
            .with_seeds(seeds.clone()),
        QuadraticFamily::new("B4: alpha + beta s + gamma2 s^2 + gamma1 phi_hi(s) >= 1 on S", 1.0, phi.upper.quad_pieces(), WitnessShape::Opaque)
            .with_seeds(seeds),
    ];
    let linear = vec![
        Cut::new(vec![1.0, 0.0, 0.0, 0.0], 0.0),
        Cut::new(vec![0.0, 0.0, 1.0, 1.0], 0.0),
        Cut::new(vec![0.0, 0.0, 1.0 / tf, 1.0], 0.0),
    ];
    Ok((fams, linear))
}

/// Worst-case probability of a min, max or sum event.
pub fn generic_bound(spec: &MomentSpec, event: &Event, opts: &SipOptions) -> Result<BoundResult> {
    spec.ensure_strict()?;
    let (fams, linear) = generic_families(event, spec.t)?;
    let dyns: Vec<&dyn SemiInfiniteConstraint> = fams.iter().map(|f| f as &dyn SemiInfiniteConstraint).collect();
    let sol = solve_sip(&dual_objective(spec), &dyns, &linear, opts)?;
    // support only when every weighted cut maps to a point
    let mut support = Some(DiscreteSymmetricDistribution::new(spec.t));
    for a in &sol.active {
        if let CutSource::Family { index, witness } = a.source {
            match (fams[index].atom(witness, spec.t), support.as_mut()) {
                (Some(atom), Some(d)) => {
                    d.push(atom, a.weight);
                }
                _ => support = None,
            }
        }
    }
    Ok(BoundResult {
        value: sol.value,
        dual: DualPoint::from_slice(&sol.x),
        shortcut: None,
        iterations: sol.iterations,
        max_violation: sol.max_violation,
        certified_upper: sol.value + sol.max_violation.max(0.0),
        support,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(f: Functional, tail: Tail, g: f64) -> Event {
        Event::new(f, tail, g)
    }

    #[test]
    fn min_leq_rows() {
        let p = table_phi(&ev(Functional::Min, Tail::Leq, 1.0), 3).unwrap();
        // s^2 / 3 up to gamma T, gamma^2 + (s - gamma)^2 / 2 above
        assert!((p.lower.eval(2.0) - 4.0 / 3.0).abs() < 1e-15);
        assert!((p.lower.eval(6.0) - 13.5).abs() < 1e-15);
        assert_eq!(p.upper.eval(2.0), 4.0);
    }

    #[test]
    fn max_leq_staircase() {
        let g = 0.5;
        let p = table_phi(&ev(Functional::Max, Tail::Leq, g), 4).unwrap();
        assert_eq!(p.upper.pieces.len(), 5);
        for k in 0..4 {
            let kf = k as f64;
            let s = (kf + 0.5) * g;
            let want = kf * g * g + (s - kf * g).powi(2);
            assert!((p.upper.eval(s) - want).abs() < 1e-15);
        }
        assert_eq!(p.lower.eval(3.0), f64::INFINITY);
        assert_eq!(p.domain, (0.0, 2.0));
    }

    #[test]
    fn min_geq_upper_is_spike_on_floor() {
        // T - 1 coordinates at gamma, one at s - (T - 1) gamma
        let (g, t) = (0.7, 4);
        let p = table_phi(&ev(Functional::Min, Tail::Geq, g), t).unwrap();
        let s = 5.0;
        let tf = t as f64;
        let want = (tf - 1.0) * g * g + (s - (tf - 1.0) * g).powi(2);
        assert!((p.upper.eval(s) - want).abs() < 1e-12);
    }

    #[test]
    fn product_rejected() {
        assert!(table_phi(&Event::product(Tail::Leq, 1.0), 3).is_err());
    }
}
