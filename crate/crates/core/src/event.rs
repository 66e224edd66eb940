//! Permutation-symmetric tail events `h(xi) <= gamma` / `h(xi) >= gamma`.

use serde::{Deserialize, Serialize};

/// Relative slack applied at the event boundary. Extremal atoms sit exactly
/// on `h(xi) = gamma` and are computed in floating point.
pub const BOUNDARY_RTOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Functional {
    Product,
    Sum,
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    /// `h(xi) <= gamma`
    Leq,
    /// `h(xi) >= gamma`
    Geq,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub functional: Functional,
    pub tail: Tail,
    pub gamma: f64,
}

impl Event {
    pub fn new(functional: Functional, tail: Tail, gamma: f64) -> Self {
        Event {
            functional,
            tail,
            gamma,
        }
    }

    pub fn product(tail: Tail, gamma: f64) -> Self {
        Event::new(Functional::Product, tail, gamma)
    }

    /// Whether `xi` lies in the (closed) event.
    pub fn holds(&self, xi: &[f64]) -> bool {
        if self.functional == Functional::Product {
            return self.product_holds(xi);
        }
        let h = match self.functional {
            Functional::Sum => xi.iter().sum(),
            Functional::Min => xi.iter().copied().fold(f64::INFINITY, f64::min),
            Functional::Max => xi.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Functional::Product => unreachable!(),
        };
        let slack = BOUNDARY_RTOL * self.gamma.abs().max(h.abs());
        match self.tail {
            Tail::Leq => h <= self.gamma + slack,
            Tail::Geq => h >= self.gamma - slack,
        }
    }

    // compared in log space so long horizons cannot overflow
    fn product_holds(&self, xi: &[f64]) -> bool {
        if xi.iter().any(|&v| v <= 0.0) {
            return self.tail == Tail::Leq;
        }
        let lp: f64 = xi.iter().map(|v| v.ln()).sum();
        let lg = self.gamma.ln();
        match self.tail {
            Tail::Leq => lp <= lg + BOUNDARY_RTOL,
            Tail::Geq => lp >= lg - BOUNDARY_RTOL,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_boundary_is_closed() {
        let g = 1.5f64.powi(4);
        let xi = [1.5; 4];
        assert!(Event::product(Tail::Geq, g).holds(&xi));
        assert!(Event::product(Tail::Leq, g).holds(&xi));
        assert!(!Event::product(Tail::Geq, g * 1.001).holds(&xi));
    }

    #[test]
    fn zero_coordinate() {
        let xi = [0.0, 5.0, 5.0];
        assert!(Event::product(Tail::Leq, 1e-9).holds(&xi));
        assert!(!Event::product(Tail::Geq, 1e-9).holds(&xi));
    }

    #[test]
    fn min_max_sum() {
        let xi = [1.0, 2.0, 4.0];
        assert!(Event::new(Functional::Min, Tail::Leq, 1.0).holds(&xi));
        assert!(Event::new(Functional::Max, Tail::Geq, 4.0).holds(&xi));
        assert!(!Event::new(Functional::Sum, Tail::Geq, 7.5).holds(&xi));
    }
}
