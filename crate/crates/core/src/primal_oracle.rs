//! Primal side: explicit symmetric distributions in the ambiguity set and
//! LP lower bounds on worst-case event probabilities over gridded atoms.
//!
//! A distribution is a mixture of atom families, each averaged over all
//! coordinate permutations. Only the family's arithmetic mean `m1`,
//! quadratic mean `m2` and cross moment `(T m1^2 - m2)/(T-1)` enter the
//! symmetric moments, so no permutation is ever enumerated.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::Event;
use crate::lp::{solve_lp, LinearProgram, LpOutcome};
use crate::moments::MomentSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Atom {
    /// All coordinates equal to `z`.
    Uniform { z: f64 },
    /// One coordinate `x`, the other `T-1` equal to `y`.
    OneDistinct { x: f64, y: f64 },
}

impl Atom {
    /// Representative point; the family is its permutation orbit.
    pub fn coords(&self, t: usize) -> Vec<f64> {
        match *self {
            Atom::Uniform { z } => vec![z; t],
            Atom::OneDistinct { x, y } => {
                let mut v = vec![y; t];
                v[0] = x;
                v
            }
        }
    }

    pub fn m1(&self, t: usize) -> f64 {
        let tf = t as f64;
        match *self {
            Atom::Uniform { z } => z,
            Atom::OneDistinct { x, y } => (x + (tf - 1.0) * y) / tf,
        }
    }

    pub fn m2(&self, t: usize) -> f64 {
        let tf = t as f64;
        match *self {
            Atom::Uniform { z } => z * z,
            Atom::OneDistinct { x, y } => (x * x + (tf - 1.0) * y * y) / tf,
        }
    }

    /// `E[xi_s xi_t]`, `s != t`, under the symmetrised family.
    pub fn cross(&self, t: usize) -> f64 {
        let tf = t as f64;
        match *self {
            Atom::Uniform { z } => z * z,
            // (T m1^2 - m2)/(T-1) expanded to avoid cancellation
            Atom::OneDistinct { x, y } => (2.0 * x * y + (tf - 2.0) * y * y) / tf,
        }
    }

    pub fn min_coord(&self) -> f64 {
        match *self {
            Atom::Uniform { z } => z,
            Atom::OneDistinct { x, y } => x.min(y),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedAtom {
    #[serde(flatten)]
    pub atom: Atom,
    pub prob: f64,
}

/// Serialised form: `{type, coords, prob}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomRecord {
    #[serde(rename = "type")]
    pub kind: String,
    pub coords: Vec<f64>,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteSymmetricDistribution {
    #[serde(rename = "T")]
    pub t: usize,
    pub atoms: Vec<WeightedAtom>,
}

impl DiscreteSymmetricDistribution {
    pub fn new(t: usize) -> Self {
        DiscreteSymmetricDistribution {
            t,
            atoms: Vec::new(),
        }
    }

    pub fn push(&mut self, atom: Atom, prob: f64) -> &mut Self {
        self.atoms.push(WeightedAtom { atom, prob });
        self
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.prob).sum()
    }

    /// `(E xi_t, E xi_t^2, E xi_s xi_t)`.
    pub fn moments(&self) -> (f64, f64, f64) {
        let t = self.t;
        self.atoms.iter().fold((0.0, 0.0, 0.0), |acc, a| {
            (
                acc.0 + a.prob * a.atom.m1(t),
                acc.1 + a.prob * a.atom.m2(t),
                acc.2 + a.prob * a.atom.cross(t),
            )
        })
    }

    /// Residuals of the four scalar moment conditions against `spec`.
    pub fn residuals(&self, spec: &MomentSpec) -> [f64; 4] {
        let (m, s, c) = self.moments();
        [
            self.total_mass() - 1.0,
            m - spec.mu,
            s - spec.second_moment(),
            c - spec.cross_moment(),
        ]
    }

    pub fn max_residual(&self, spec: &MomentSpec) -> f64 {
        self.residuals(spec)
            .iter()
            .fold(0.0_f64, |a, r| a.max(r.abs()))
    }

    pub fn event_probability(&self, event: &Event) -> f64 {
        self.atoms
            .iter()
            .filter(|a| event.holds(&a.atom.coords(self.t)))
            .map(|a| a.prob)
            .sum()
    }

    pub fn records(&self) -> Vec<AtomRecord> {
        self.atoms
            .iter()
            .map(|a| AtomRecord {
                kind: match a.atom {
                    Atom::Uniform { .. } => "uniform".into(),
                    Atom::OneDistinct { .. } => "one_distinct".into(),
                },
                coords: a.atom.coords(self.t),
                prob: a.prob,
            })
            .collect()
    }
}

fn clamp0(v: f64) -> f64 {
    if v < 0.0 && v > -1e-12 {
        0.0
    } else {
        v
    }
}

/// The two-family distribution from the non-emptiness construction:
/// a one-distinct family with probability `p` and a uniform atom `z 1`.
pub fn feasibility_distribution(spec: &MomentSpec) -> Result<DiscreteSymmetricDistribution> {
    let v = spec.validate()?;
    if !v.feasible {
        return Err(Error::Infeasible(spec.cross_moment()));
    }
    let (t, mu, sigma, rho) = (spec.tf(), spec.mu, spec.sigma, spec.rho);
    let s2 = sigma * sigma;
    let theta = spec.theta();
    let p = if rho > 0.0 {
        (t * mu * mu / (t * mu * mu + theta * s2)).min(rho * t / theta)
    } else if rho == 0.0 {
        t * mu * mu / (t * mu * mu + s2)
    } else {
        -rho * t / (1.0 - rho)
    };
    let m1 = mu + sigma * ((1.0 - p) * theta / (p * t)).max(0.0).sqrt();
    let m2 = m1 * m1 + (1.0 - rho) * (t - 1.0) * s2 / (p * t);
    let d = (m2 - m1 * m1).max(0.0);
    let x = m1 + ((t - 1.0) * d).sqrt();
    let y = clamp0(m1 - (d / (t - 1.0)).sqrt());
    let mut dist = DiscreteSymmetricDistribution::new(spec.t);
    dist.push(Atom::OneDistinct { x, y }, p);
    if 1.0 - p > 1e-15 {
        let z = clamp0(mu - sigma * (p * theta / ((1.0 - p) * t)).max(0.0).sqrt());
        dist.push(Atom::Uniform { z }, 1.0 - p);
    }
    Ok(dist)
}

/// Coordinate grid for [`lower_bound_lp`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    /// Values per coordinate, including 0.
    pub n: usize,
    /// Largest grid value; `None` means `mu + 6 sigma`.
    pub hi: Option<f64>,
    /// Atoms injected verbatim.
    pub extra: Vec<Atom>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            n: 60,
            hi: None,
            extra: Vec::new(),
        }
    }
}

impl GridSpec {
    pub fn with_n(n: usize) -> Self {
        GridSpec {
            n,
            ..GridSpec::default()
        }
    }

    /// `0` followed by `n-1` log-spaced values over `[hi/1e4, hi]`.
    pub fn values(&self, spec: &MomentSpec) -> Vec<f64> {
        let hi = self.hi.unwrap_or(spec.mu + 6.0 * spec.sigma);
        let mut v = vec![0.0];
        let k = self.n.saturating_sub(1);
        if k == 1 {
            v.push(hi);
        } else if k > 1 {
            let (a, b) = ((hi * 1e-4).ln(), hi.ln());
            for i in 0..k {
                v.push((a + (b - a) * i as f64 / (k - 1) as f64).exp());
            }
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrimalBound {
    pub value: f64,
    pub distribution: DiscreteSymmetricDistribution,
    pub n_atoms: usize,
}

pub const LP_TOL: f64 = 1e-9;

/// Largest event mass over mixtures of gridded uniform and one-distinct
/// atoms that match the four moment conditions.
pub fn lower_bound_lp(spec: &MomentSpec, event: &Event, grid: &GridSpec) -> Result<PrimalBound> {
    spec.ensure_strict()?;
    let t = spec.t;
    let vals = grid.values(spec);
    let mut atoms: Vec<Atom> = Vec::with_capacity(vals.len() * vals.len() + grid.extra.len());
    for &z in &vals {
        atoms.push(Atom::Uniform { z });
    }
    for &x in &vals {
        for &y in &vals {
            if x != y {
                atoms.push(Atom::OneDistinct { x, y });
            }
        }
    }
    atoms.extend(grid.extra.iter().copied().filter(|a| a.min_coord() >= 0.0));

    // columns scaled to unit max entry; far atoms otherwise swamp the rows
    let scale: Vec<f64> = atoms.iter().map(|a| 1.0 / a.m2(t).max(a.m1(t)).max(1.0)).collect();
    let hits: Vec<bool> = atoms.iter().map(|a| event.holds(&a.coords(t))).collect();
    let cost: Vec<f64> = hits
        .iter()
        .zip(&scale)
        .map(|(&h, &c)| if h { -c } else { 0.0 })
        .collect();
    let col = |f: &dyn Fn(&Atom) -> f64| -> Vec<f64> {
        atoms.iter().zip(&scale).map(|(a, &c)| f(a) * c).collect()
    };
    let mut lp = LinearProgram::new(cost);
    lp.add_eq(col(&|_| 1.0), 1.0);
    lp.add_eq(col(&|a| a.m1(t)), spec.mu);
    lp.add_eq(col(&|a| a.m2(t)), spec.second_moment());
    lp.add_eq(col(&|a| a.cross(t)), spec.cross_moment());

    let sol = match solve_lp(&lp, LP_TOL)? {
        LpOutcome::Optimal(s) => s,
        LpOutcome::Infeasible => return Err(Error::GridInfeasible),
        LpOutcome::Unbounded => return Err(Error::Lp("primal grid LP unbounded".into())),
        LpOutcome::Stalled => return Err(Error::Lp("primal grid LP stalled".into())),
    };
    let mut dist = DiscreteSymmetricDistribution::new(t);
    for ((a, &p), &c) in atoms.iter().zip(&sol.x).zip(&scale) {
        if p > 0.0 {
            dist.push(*a, p * c);
        }
    }
    Ok(PrimalBound {
        value: -sol.value,
        distribution: dist,
        n_atoms: atoms.len(),
    })
}
