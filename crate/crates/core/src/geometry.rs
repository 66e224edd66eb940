//! Symmetric subproblems on the simplex slice `{xi >= 0, sum xi = 1}`:
//! extreme values of `||xi||^2` under a product constraint, and the minimum
//! product of a vector with given first and second sample moments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{isolate_nonnegative_roots, Polynomial};

/// `k` coordinates at `xi_lo`, `T - k` at `xi_hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelPoint {
    pub xi_lo: f64,
    pub xi_hi: f64,
    pub k: usize,
}

impl TwoLevelPoint {
    pub fn coords(&self, t: usize) -> Vec<f64> {
        let mut v = vec![self.xi_lo; self.k];
        v.extend(std::iter::repeat_n(self.xi_hi, t - self.k));
        v
    }

    pub fn ln_product(&self, t: usize) -> f64 {
        self.k as f64 * self.xi_lo.ln() + (t - self.k) as f64 * self.xi_hi.ln()
    }

    pub fn sum(&self, t: usize) -> f64 {
        self.k as f64 * self.xi_lo + (t - self.k) as f64 * self.xi_hi
    }

    pub fn sum_sq(&self, t: usize) -> f64 {
        self.k as f64 * self.xi_lo.powi(2) + (t - self.k) as f64 * self.xi_hi.powi(2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelValue {
    pub value: f64,
    pub point: TwoLevelPoint,
}

/// `T^{-T}`, the largest product on the simplex slice.
pub fn max_simplex_product(t: usize) -> f64 {
    let tf = t as f64;
    (-tf * tf.ln()).exp()
}

fn check_tk(t: usize, k: usize) -> Result<()> {
    if t < 2 {
        return Err(Error::InvalidArgument(format!("T = {t} (need T >= 2)")));
    }
    if k == 0 || k >= t {
        return Err(Error::InvalidArgument(format!("k = {k} (need 1 <= k < T)")));
    }
    Ok(())
}

/// Every two-level point with `k` coordinates at `(1 - (T-k) y) / k`, the
/// rest at `y`, and product `gamma`. There are two for
/// `0 < gamma < T^{-T}`, one (the barycentre) at `T^{-T}`.
pub fn two_level_points(t: usize, k: usize, gamma: f64) -> Result<Vec<TwoLevelPoint>> {
    check_tk(t, k)?;
    let cap = max_simplex_product(t);
    if !(gamma > 0.0) || gamma > cap * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "gamma = {gamma} outside (0, T^-T]"
        )));
    }
    let kf = k as f64;
    let m = (t - k) as f64;
    let ymax = 1.0 / m;
    let ystar = 1.0 / t as f64;

    // (1 - m y)^k y^{T-k} - k^k gamma
    let mut c = vec![0.0; t + 1];
    let mut binom = 1.0;
    for j in 0..=k {
        c[t - k + j] = binom * (-m).powi(j as i32);
        binom = binom * (k - j) as f64 / (j + 1) as f64;
    }
    c[0] -= kf.powi(k as i32) * gamma;
    let p = Polynomial::new(c);

    let phi = |y: f64| kf * ((1.0 - m * y) / kf).ln() + m * y.ln() - gamma.ln();
    let dphi = |y: f64| -kf * m / (1.0 - m * y) + m / y;

    let mut ys: Vec<f64> = Vec::new();
    for r in isolate_nonnegative_roots(&p, 1e-14)? {
        if r.x <= 0.0 || r.x >= ymax {
            continue;
        }
        // phi rises on (0, 1/T) and falls on (1/T, 1/(T-k))
        let (lo, hi, rising) = if r.x < ystar {
            (0.0, ystar, true)
        } else {
            (ystar, ymax, false)
        };
        ys.push(polish(r.x, lo, hi, rising, &phi, &dphi));
    }
    if ys.is_empty() && gamma >= cap * (1.0 - 1e-9) {
        ys.push(ystar);
    }
    ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ys.dedup_by(|a, b| (*a - *b).abs() <= 1e-13);
    Ok(ys
        .into_iter()
        .map(|y| TwoLevelPoint {
            xi_lo: ((1.0 - m * y) / kf).max(0.0),
            xi_hi: y,
            k,
        })
        .collect())
}

// Safeguarded Newton on a monotone branch of phi.
fn polish(
    x0: f64,
    mut lo: f64,
    mut hi: f64,
    rising: bool,
    phi: &dyn Fn(f64) -> f64,
    dphi: &dyn Fn(f64) -> f64,
) -> f64 {
    let mut x = x0.clamp(lo, hi);
    for _ in 0..200 {
        let f = phi(x);
        if !f.is_finite() {
            x = 0.5 * (lo + hi);
            continue;
        }
        if f == 0.0 {
            return x;
        }
        if (f < 0.0) == rising {
            lo = x;
        } else {
            hi = x;
        }
        let d = dphi(x);
        let mut nx = x - f / d;
        if !(nx > lo && nx < hi) || !nx.is_finite() {
            nx = 0.5 * (lo + hi);
        }
        if (nx - x).abs() <= 1e-16 * x.abs().max(1e-300) || hi - lo <= 1e-16 * hi {
            return nx;
        }
        x = nx;
    }
    x
}

fn extreme(t: usize, k: usize, gamma: f64, want_max: bool) -> Result<TwoLevelValue> {
    let pts = two_level_points(t, k, gamma)?;
    pts.into_iter()
        .map(|p| TwoLevelValue {
            value: p.sum_sq(t),
            point: p,
        })
        .reduce(|a, b| {
            if (b.value > a.value) == want_max {
                b
            } else {
                a
            }
        })
        .ok_or_else(|| Error::InvalidArgument(format!("no two-level point with product {gamma}")))
}

/// `f_{T,k}(gamma)`: smallest `||xi||^2` over two-level points with product `gamma`.
pub fn f_t_k(t: usize, k: usize, gamma: f64) -> Result<TwoLevelValue> {
    extreme(t, k, gamma, false)
}

/// `g_{T,k}(gamma)`: largest `||xi||^2` over two-level points with product `gamma`.
pub fn g_t_k(t: usize, k: usize, gamma: f64) -> Result<TwoLevelValue> {
    extreme(t, k, gamma, true)
}

/// `min { ||xi||^2 : xi >= 0, sum xi = 1, prod xi <= gamma_bar }`.
pub fn f_t(t: usize, gamma_bar: f64) -> Result<f64> {
    check_tk(t, 1)?;
    if !(gamma_bar >= 0.0) {
        return Err(Error::InvalidArgument(format!("gamma_bar = {gamma_bar}")));
    }
    if gamma_bar >= max_simplex_product(t) {
        return Ok(1.0 / t as f64);
    }
    if gamma_bar == 0.0 {
        return Ok(1.0 / (t - 1) as f64);
    }
    Ok(f_t_k(t, 1, gamma_bar)?.value)
}

/// `max { ||xi||^2 : xi >= 0, sum xi = 1, prod xi >= gamma_under }`;
/// `-inf` when the constraint set is empty.
pub fn g_t(t: usize, gamma_under: f64) -> Result<f64> {
    check_tk(t, 1)?;
    if !(gamma_under >= 0.0) {
        return Err(Error::InvalidArgument(format!("gamma_under = {gamma_under}")));
    }
    if gamma_under == 0.0 {
        return Ok(1.0);
    }
    let cap = max_simplex_product(t);
    if gamma_under > cap {
        return Ok(f64::NEG_INFINITY);
    }
    if gamma_under == cap {
        return Ok(1.0 / t as f64);
    }
    Ok(g_t_k(t, 1, gamma_under)?.value)
}

/// Relative tolerance on `m2 / m1^2` at regime boundaries.
pub const RATIO_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum MinProduct {
    Infeasible { ratio: f64 },
    Solved { value: f64, witness: Vec<f64> },
}

/// `min { prod xi : xi >= 0, mean(xi) = m1, mean(xi^2) = m2 }`.
pub fn min_product_given_means(t: usize, m1: f64, m2: f64) -> Result<MinProduct> {
    check_tk(t, 1)?;
    if !(m1 > 0.0 && m2 > 0.0) {
        return Err(Error::InvalidArgument(format!("m1 = {m1}, m2 = {m2}")));
    }
    let tf = t as f64;
    let ratio = m2 / (m1 * m1);
    if ratio < 1.0 * (1.0 - RATIO_RTOL) || ratio > tf * (1.0 + RATIO_RTOL) {
        return Ok(MinProduct::Infeasible { ratio });
    }
    let zero_at = tf / (tf - 1.0);
    if ratio >= zero_at * (1.0 - RATIO_RTOL) {
        // one coordinate at 0, the other T-1 sharing the moments
        let n = tf - 1.0;
        let big_m1 = tf * m1 / n;
        let big_m2 = tf * m2 / n;
        let d = (big_m2 - big_m1 * big_m1).max(0.0);
        let mut w = vec![0.0];
        if t == 2 {
            w.push(big_m1);
        } else {
            let u = big_m1 + ((tf - 2.0) * d).sqrt();
            let v = (big_m1 - (d / (tf - 2.0)).sqrt()).max(0.0);
            w.push(u);
            w.extend(std::iter::repeat_n(v, t - 2));
        }
        return Ok(MinProduct::Solved {
            value: 0.0,
            witness: w,
        });
    }
    let d = (m2 - m1 * m1).max(0.0);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for k in 1..t {
        let kf = k as f64;
        let a = ((tf - kf) / kf * d).sqrt();
        let b = (kf / (tf - kf) * d).sqrt();
        for (u, v) in [(m1 + a, m1 - b), (m1 - a, m1 + b)] {
            if u < 0.0 || v < 0.0 {
                continue;
            }
            let ln = kf * u.ln() + (tf - kf) * v.ln();
            if best.as_ref().is_none_or(|(bl, _)| ln < *bl) {
                let mut w = vec![u; k];
                w.extend(std::iter::repeat_n(v, t - k));
                best = Some((ln, w));
            }
        }
    }
    let (ln, witness) = best.expect("k = 1 always gives a nonnegative pair below T/(T-1)");
    Ok(MinProduct::Solved {
        value: ln.exp(),
        witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        assert!((f_t(2, 0.1).unwrap() - 0.8).abs() < 1e-12);
        for g in [1e-5, 1e-4, 2e-3] {
            let v = f_t_k(4, 2, g).unwrap().value;
            assert!((v - (0.5 - 4.0 * g.sqrt())).abs() < 1e-12, "{g}: {v}");
        }
    }

    #[test]
    fn regimes() {
        assert_eq!(f_t(3, 1.0 / 27.0).unwrap(), 1.0 / 3.0);
        assert_eq!(f_t(3, 0.0).unwrap(), 0.5);
        assert_eq!(g_t(4, 0.0).unwrap(), 1.0);
        assert!((g_t(4, 4f64.powi(-4)).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(g_t(4, 0.01).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn min_product_regimes() {
        match min_product_given_means(3, 1.0, 1.0).unwrap() {
            MinProduct::Solved { value, witness } => {
                assert!((value - 1.0).abs() < 1e-12);
                assert!(witness.iter().all(|&x| (x - 1.0).abs() < 1e-12));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            min_product_given_means(3, 1.0, 1.5).unwrap(),
            MinProduct::Solved { value, .. } if value == 0.0
        ));
        assert!(matches!(
            min_product_given_means(3, 1.0, 4.0).unwrap(),
            MinProduct::Infeasible { .. }
        ));
    }
}
