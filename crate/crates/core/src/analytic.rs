//! Closed-form bounds: univariate and sum Chebyshev inequalities, the
//! relaxed right-tail bound `R'` with its extremal distribution, the
//! thresholds `T0` and `gamma_bar`, the Marshall-Olkin bound and the
//! log-space bound.
//!
//! Powers `gamma^{1/T}` are taken as `exp(ln gamma / T)` and all regime
//! tests are done on that root, never on `mu^T`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::Tail;
use crate::moments::MomentSpec;
use crate::primal_oracle::{Atom, DiscreteSymmetricDistribution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Threshold on the near side of the mean; bound is 1.
    Certain,
    /// Markov branch `mean / gamma`.
    Markov,
    /// Chebyshev branch `v / (v + d^2)`.
    Chebyshev,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormBound {
    pub value: f64,
    pub regime: Regime,
}

impl ClosedFormBound {
    fn new(value: f64, regime: Regime) -> Self {
        ClosedFormBound { value, regime }
    }
}

pub fn root_t(gamma: f64, t: f64) -> f64 {
    (gamma.ln() / t).exp()
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} = {v} (need > 0)")))
    }
}

fn cheb(var: f64, d: f64) -> f64 {
    var / (var + d * d)
}

/// `P(xi >= gamma)` for a scalar with mean `mu` and standard deviation
/// `sigma`, optionally restricted to `xi >= 0`.
pub fn chebyshev_univariate(mu: f64, sigma: f64, gamma: f64, nonnegative: bool) -> Result<ClosedFormBound> {
    positive("sigma", sigma)?;
    if nonnegative {
        positive("mu", mu)?;
    }
    let var = sigma * sigma;
    if gamma < mu {
        return Ok(ClosedFormBound::new(1.0, Regime::Certain));
    }
    if nonnegative && gamma < mu + var / mu {
        return Ok(ClosedFormBound::new(mu / gamma, Regime::Markov));
    }
    Ok(ClosedFormBound::new(cheb(var, gamma - mu), Regime::Chebyshev))
}

/// Worst-case `P(sum xi >= gamma)` or `P(sum xi <= gamma)`.
pub fn sum_bound(spec: &MomentSpec, gamma: f64, tail: Tail) -> Result<ClosedFormBound> {
    spec.ensure_strict()?;
    positive("gamma", gamma)?;
    let t = spec.tf();
    let mean = t * spec.mu;
    let var = t * spec.sigma * spec.sigma * spec.theta();
    match tail {
        Tail::Geq => chebyshev_univariate(mean, var.sqrt(), gamma, true),
        Tail::Leq => {
            if gamma >= mean {
                Ok(ClosedFormBound::new(1.0, Regime::Certain))
            } else {
                Ok(ClosedFormBound::new(cheb(var, gamma - mean), Regime::Chebyshev))
            }
        }
    }
}

/// Upper end of the Markov branch of `R'` in root space:
/// `mu + sigma^2 theta / (T mu)`.
pub fn markov_root_limit(spec: &MomentSpec) -> f64 {
    spec.mu + spec.sigma * spec.sigma * spec.theta() / (spec.tf() * spec.mu)
}

/// `R'(gamma)`, the right-tail bound when the second-moment matrix is only
/// bounded above.
pub fn relaxed_right_bound(spec: &MomentSpec, gamma: f64) -> Result<ClosedFormBound> {
    spec.ensure_strict()?;
    positive("gamma", gamma)?;
    let r = root_t(gamma, spec.tf());
    if r <= spec.mu {
        return Ok(ClosedFormBound::new(1.0, Regime::Certain));
    }
    if r < markov_root_limit(spec) {
        return Ok(ClosedFormBound::new(spec.mu / r, Regime::Markov));
    }
    let v = spec.sigma * spec.sigma * spec.theta();
    Ok(ClosedFormBound::new(
        v / (v + spec.tf() * (spec.mu - r).powi(2)),
        Regime::Chebyshev,
    ))
}

/// Marshall-Olkin bound `sigma^2 theta / (sigma^2 theta + T (mu - gamma^{1/T})^2)`.
pub fn mo_bound(spec: &MomentSpec, gamma: f64) -> Result<ClosedFormBound> {
    spec.ensure_strict()?;
    positive("gamma", gamma)?;
    let r = root_t(gamma, spec.tf());
    if r <= spec.mu {
        return Ok(ClosedFormBound::new(1.0, Regime::Certain));
    }
    let v = spec.sigma * spec.sigma * spec.theta();
    Ok(ClosedFormBound::new(
        v / (v + spec.tf() * (spec.mu - r).powi(2)),
        Regime::Chebyshev,
    ))
}

/// Two diagonal atoms `p* delta_{(u*/p*) 1} + q* delta_{(v*/q*) 1}`
/// attaining `R'(gamma)`. The origin atom of the Markov branch is kept.
pub fn extremal_distribution(spec: &MomentSpec, gamma: f64) -> Result<DiscreteSymmetricDistribution> {
    let b = relaxed_right_bound(spec, gamma)?;
    let q = b.value;
    let mut d = DiscreteSymmetricDistribution::new(spec.t);
    if b.regime == Regime::Certain {
        d.push(Atom::Uniform { z: spec.mu }, 1.0);
        return Ok(d);
    }
    let v = match b.regime {
        Regime::Chebyshev => {
            q * spec.mu + spec.sigma * (spec.theta() * q * (1.0 - q) / spec.tf()).sqrt()
        }
        _ => spec.mu,
    };
    let p = 1.0 - q;
    let u = (spec.mu - v).max(0.0);
    d.push(Atom::Uniform { z: u / p }, p);
    d.push(Atom::Uniform { z: v / q }, q);
    Ok(d)
}

/// `T0 = (mu^2 + sigma^2) / ((1 - rho) sigma^2) + 1`.
pub fn absorption_threshold(spec: &MomentSpec) -> f64 {
    spec.second_moment() / ((1.0 - spec.rho) * spec.sigma * spec.sigma) + 1.0
}

/// Whether the left-tail bound is identically 1 (`T > T0`, strict).
pub fn is_absorbed(spec: &MomentSpec) -> bool {
    spec.tf() > absorption_threshold(spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaBar {
    /// `gamma_bar^{1/T}`
    pub root: f64,
    pub ln_value: f64,
    /// May overflow to `inf` for long horizons; `ln_value` stays finite.
    pub value: f64,
}

/// Threshold above which `R = R'`; `None` when `mu <= sqrt((1-rho)/T) sigma`.
pub fn gamma_bar_threshold(spec: &MomentSpec) -> Result<Option<GammaBar>> {
    spec.ensure_strict()?;
    let t = spec.tf();
    let c = ((1.0 - spec.rho) / t).sqrt() * spec.sigma;
    if !(spec.mu > c) {
        return Ok(None);
    }
    let a = spec.mu - c;
    let b = t / (spec.sigma * spec.sigma * spec.theta());
    let root = spec.mu + (1.0 + (4.0 * a * b * c + 1.0).sqrt()) / (2.0 * a * b);
    let ln_value = t * root.ln();
    Ok(Some(GammaBar {
        root,
        ln_value,
        value: ln_value.exp(),
    }))
}

/// Whether `gamma >= gamma_bar` with the hypothesis holding.
pub fn above_gamma_bar(spec: &MomentSpec, gamma: f64) -> Result<bool> {
    Ok(match gamma_bar_threshold(spec)? {
        Some(g) => gamma.ln() >= g.ln_value,
        None => false,
    })
}

/// Mixture in the exact ambiguity set attaining `R(gamma) = R'(gamma)`
/// for `gamma >= gamma_bar`: the origin-side atom of the extremal
/// distribution is spread into a one-distinct family.
pub fn perturbed_distribution(spec: &MomentSpec, gamma: f64) -> Result<DiscreteSymmetricDistribution> {
    if !above_gamma_bar(spec, gamma)? {
        return Err(Error::InvalidArgument(format!(
            "gamma = {gamma} is below gamma_bar or its hypothesis fails"
        )));
    }
    let b = relaxed_right_bound(spec, gamma)?;
    let t = spec.tf();
    let q = b.value;
    let p = 1.0 - q;
    let v = q * spec.mu + spec.sigma * (spec.theta() * q * (1.0 - q) / t).sqrt();
    let u = spec.mu - v;
    let lambda = ((1.0 - spec.rho) / (p * t)).sqrt() * spec.sigma;
    let y = u / p - lambda;
    let mut d = DiscreteSymmetricDistribution::new(spec.t);
    d.push(
        Atom::OneDistinct {
            x: y + t * lambda,
            y: if y < 0.0 && y > -1e-12 { 0.0 } else { y },
        },
        p,
    );
    d.push(Atom::Uniform { z: v / q }, q);
    Ok(d)
}

/// Chebyshev bound on `P(prod xi >= gamma)` from log-space moments
/// `(mu_eta, sigma_eta, rho_eta)` of `ln xi_t`.
pub fn log_space_bound(mu_eta: f64, sigma_eta: f64, rho_eta: f64, t: usize, gamma: f64) -> Result<ClosedFormBound> {
    positive("gamma", gamma)?;
    positive("sigma_eta", sigma_eta)?;
    if t == 0 {
        return Err(Error::InvalidArgument("T = 0".into()));
    }
    let tf = t as f64;
    let theta = 1.0 + (tf - 1.0) * rho_eta;
    if t > 1 && !(theta >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "rho_eta = {rho_eta} (need rho_eta >= -1/(T-1))"
        )));
    }
    let lg = gamma.ln();
    if lg < tf * mu_eta {
        return Ok(ClosedFormBound::new(1.0, Regime::Certain));
    }
    let var = tf * sigma_eta * sigma_eta * theta;
    Ok(ClosedFormBound::new(cheb(var, lg - tf * mu_eta), Regime::Chebyshev))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12
    }

    #[test]
    fn univariate_examples() {
        assert!(close(chebyshev_univariate(0.0, 1.0, 1.0, false).unwrap().value, 0.5));
        let b = chebyshev_univariate(1.0, 1.0, 1.5, true).unwrap();
        assert_eq!(b.regime, Regime::Markov);
        assert!(close(b.value, 1.0 / 1.5));
        assert_eq!(chebyshev_univariate(2.0, 1.0, 1.0, true).unwrap().value, 1.0);
    }

    #[test]
    fn sum_examples() {
        let s = MomentSpec::new(2, 1.0, 1.0, 0.0);
        assert!(close(sum_bound(&s, 4.0, Tail::Geq).unwrap().value, 1.0 / 3.0));
        assert!(close(sum_bound(&s, 2.5, Tail::Geq).unwrap().value, 0.8));
        assert_eq!(sum_bound(&s, 2.0, Tail::Leq).unwrap().value, 1.0);
    }

    #[test]
    fn relaxed_examples() {
        let s = MomentSpec::new(4, 1.0, 0.5, 0.0);
        assert_eq!(relaxed_right_bound(&s, 1.0).unwrap().value, 1.0);
        assert!(close(relaxed_right_bound(&s, 1.05f64.powi(4)).unwrap().value, 1.0 / 1.05));
        assert!(close(relaxed_right_bound(&s, 1.5f64.powi(4)).unwrap().value, 0.2));
        assert!(close(mo_bound(&s, 1.5f64.powi(4)).unwrap().value, 0.2));
        assert!(close(mo_bound(&s, 1.05f64.powi(4)).unwrap().value, 0.25 / 0.26));
    }

    #[test]
    fn thresholds() {
        let s = MomentSpec::new(4, 1.0, 1.0, 0.0);
        assert_eq!(absorption_threshold(&s), 3.0);
        assert!(is_absorbed(&s));
        assert!(!is_absorbed(&MomentSpec::new(3, 1.0, 1.0, 0.0)));
        assert!(close(absorption_threshold(&MomentSpec::new(3, 1.0, 0.1, 0.0)), 102.0));
        assert!(gamma_bar_threshold(&MomentSpec::new(4, 0.1, 1.0, 0.0)).unwrap().is_none());
    }

    #[test]
    fn log_space_examples() {
        assert!(close(log_space_bound(0.0, 1.0, 0.0, 1, std::f64::consts::E).unwrap().value, 0.5));
        assert_eq!(log_space_bound(0.5, 1.0, 0.0, 3, 1.0).unwrap().value, 1.0);
    }

    #[test]
    fn extremal_chebyshev_branch() {
        let s = MomentSpec::new(4, 1.0, 0.5, 0.0);
        let d = extremal_distribution(&s, 1.5f64.powi(4)).unwrap();
        let q = d.atoms[1].prob;
        assert!(close(q, 0.2));
        match d.atoms[1].atom {
            Atom::Uniform { z } => assert!((z - 1.5).abs() < 1e-12),
            _ => unreachable!(),
        }
    }
}
