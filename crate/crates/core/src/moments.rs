//! Permutation-symmetric first and second moments of T nonnegative variables.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Common mean `mu`, standard deviation `sigma` and pairwise correlation
/// `rho` of `t` nonnegative random variables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSpec {
    #[serde(rename = "T")]
    pub t: usize,
    pub mu: f64,
    pub sigma: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Validation {
    pub feasible: bool,
    pub slater_strict: bool,
    pub theta: f64,
}

impl MomentSpec {
    pub fn new(t: usize, mu: f64, sigma: f64, rho: f64) -> Self {
        MomentSpec { t, mu, sigma, rho }
    }

    pub fn tf(&self) -> f64 {
        self.t as f64
    }

    /// `1 + (T-1) rho`, the variance inflation of the sum.
    pub fn theta(&self) -> f64 {
        1.0 + (self.tf() - 1.0) * self.rho
    }

    /// `mu^2 + rho sigma^2`, the common cross moment E[xi_s xi_t].
    pub fn cross_moment(&self) -> f64 {
        self.mu * self.mu + self.rho * self.sigma * self.sigma
    }

    pub fn second_moment(&self) -> f64 {
        self.mu * self.mu + self.sigma * self.sigma
    }

    /// E[(sum xi)^2].
    pub fn sum_second_moment(&self) -> f64 {
        let t = self.tf();
        t * (t * self.mu * self.mu
            + self.sigma * self.sigma
            + (t - 1.0) * self.rho * self.sigma * self.sigma)
    }

    /// Checks ranges of T, mu, sigma and rho only.
    pub fn check_structure(&self) -> Result<()> {
        if self.t < 2 {
            return Err(Error::Structural(format!("T = {} (need T >= 2)", self.t)));
        }
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(Error::Structural(format!("mu = {} (need mu > 0)", self.mu)));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::Structural(format!(
                "sigma = {} (need sigma > 0)",
                self.sigma
            )));
        }
        let lo = -1.0 / (self.tf() - 1.0);
        // rho = -1/(T-1) leaves a singular but valid covariance; validate()
        // still classifies it, ensure_strict() rejects it below.
        if !(self.rho.is_finite() && self.rho >= lo && self.rho < 1.0) {
            return Err(Error::Structural(format!(
                "rho = {} (need {} <= rho < 1)",
                self.rho, lo
            )));
        }
        Ok(())
    }

    /// Structural check followed by the moment-feasibility test.
    ///
    /// Comparisons are exact: inputs are user constants, not computed values.
    pub fn validate(&self) -> Result<Validation> {
        self.check_structure()?;
        let margin = self.cross_moment();
        Ok(Validation {
            feasible: margin >= 0.0,
            slater_strict: margin > 0.0,
            theta: self.theta(),
        })
    }

    /// Errors unless the moments are structurally valid and strictly feasible.
    pub fn ensure_strict(&self) -> Result<Validation> {
        let v = self.validate()?;
        if !v.feasible {
            return Err(Error::Infeasible(self.cross_moment()));
        }
        if !v.slater_strict {
            return Err(Error::NotStrict);
        }
        if !(v.theta > 0.0) {
            return Err(Error::Structural(format!(
                "rho = {} makes the covariance singular (theta = 0)",
                self.rho
            )));
        }
        Ok(v)
    }

    /// Eigenvalues of `(1-rho) sigma^2 I + rho sigma^2 11^T`: the first has
    /// multiplicity T-1, the second (along the all-ones vector) multiplicity 1.
    pub fn covariance_eigenvalues(&self) -> (f64, f64) {
        let s2 = self.sigma * self.sigma;
        let base = (1.0 - self.rho) * s2;
        (base, base + self.tf() * self.rho * s2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_examples() {
        let v = MomentSpec::new(4, 1.0, 2.0, -0.3).validate().unwrap();
        assert!(!v.feasible);

        let v = MomentSpec::new(3, 1.0, 1.0, 0.0).validate().unwrap();
        assert!(v.feasible && v.slater_strict);
        assert_eq!(v.theta, 1.0);

        let v = MomentSpec::new(5, 1.0, 2.0, -0.25).validate().unwrap();
        assert!(v.feasible && !v.slater_strict);
    }

    #[test]
    fn structural_errors_are_distinct() {
        for s in [
            MomentSpec::new(1, 1.0, 1.0, 0.0),
            MomentSpec::new(3, 0.0, 1.0, 0.0),
            MomentSpec::new(3, 1.0, 0.0, 0.0),
            MomentSpec::new(3, 1.0, 1.0, -0.6),
            MomentSpec::new(3, 1.0, 1.0, 1.0),
        ] {
            assert!(matches!(s.validate(), Err(Error::Structural(_))));
        }
        assert!(matches!(
            MomentSpec::new(4, 1.0, 2.0, -0.3).ensure_strict(),
            Err(Error::Infeasible(_))
        ));
        assert!(matches!(
            MomentSpec::new(5, 1.0, 2.0, -0.25).ensure_strict(),
            Err(Error::NotStrict)
        ));
    }

    #[test]
    fn eigenvalue_examples() {
        assert_eq!(MomentSpec::new(3, 1.0, 1.0, 0.0).covariance_eigenvalues(), (1.0, 1.0));
        let (a, b) = MomentSpec::new(4, 1.0, 2.0, 0.5).covariance_eigenvalues();
        assert!((a - 2.0).abs() < 1e-14 && (b - 10.0).abs() < 1e-14);
        let (a, b) = MomentSpec::new(2, 1.0, 1.0, -0.5).covariance_eigenvalues();
        assert!((a - 1.5).abs() < 1e-14 && (b - 0.5).abs() < 1e-14);
    }

    #[test]
    fn json_uses_capital_t() {
        let s: MomentSpec =
            serde_json::from_str(r#"{"T":3,"mu":1.0,"sigma":0.5,"rho":0.1}"#).unwrap();
        assert_eq!(s, MomentSpec::new(3, 1.0, 0.5, 0.1));
    }
}
