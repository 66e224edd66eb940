use chebyprod_core::poly::{global_min, Domain};
use chebyprod_core::product_bounds::{assemble_sdp, product_bound, tail_polynomial_coeffs, BoundOptions, BoundQuery, Side};
use chebyprod_core::sdp::{ConicProblem, SdpLayout};
use chebyprod_core::{DualPoint, MomentSpec};

/// Minimises a convex function of one variable on `[0, hi]`.
fn ternary(f: impl Fn(f64) -> f64, hi: f64) -> (f64, f64) {
    let (mut a, mut b) = (0.0, hi);
    for _ in 0..300 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if f(m1) <= f(m2) {
            b = m2;
        } else {
            a = m1;
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

fn values_for(problem: &ConicProblem, layout: &SdpLayout, x: &DualPoint) -> Vec<f64> {
    let mut v = vec![0.0; problem.n_vars()];
    v[layout.alpha] = x.alpha;
    v[layout.beta] = x.beta;
    v[layout.gamma1] = x.gamma1;
    v[layout.gamma2] = x.gamma2;
    v
}

fn queries() -> Vec<BoundQuery> {
    let mut out = Vec::new();
    for t in 2..=4 {
        for (mu, sigma, rho) in [(1.0, 0.5, 0.0), (1.2, 0.8, 0.3), (0.9, 0.4, -0.2)] {
            let spec = MomentSpec::new(t, mu, sigma, rho);
            for f in [0.6, 0.9, 1.1, 1.6] {
                let gamma = f * mu.powi(t as i32);
                out.push(BoundQuery::new(spec, gamma, Side::Left));
                out.push(BoundQuery::new(spec, gamma, Side::Right));
            }
        }
    }
    out
}

// the cone rows admit multipliers at every cutting-plane optimum
#[test]
fn cone_rows_hold_at_sip_optimum() {
    let opts = BoundOptions { shortcuts: false, ..BoundOptions::default() };
    for q in queries() {
        let r = product_bound(&q, &opts).unwrap();
        let mut x = r.dual;
        x.alpha += r.max_violation;
        let (problem, layout) = assemble_sdp(&q).unwrap();
        let base = values_for(&problem, &layout, &x);
        for (k, row) in problem.soc.iter().enumerate() {
            let f = |l: f64| {
                let mut v = base.clone();
                v[layout.lambda[k]] = l;
                row.violation(&v)
            };
            let (_, viol) = ternary(f, 1e4);
            assert!(viol < 1e-6, "{} violated by {viol} at {q:?}", row.tag);
        }
        for row in problem.rows.iter().filter(|r| r.tag.starts_with("gamma1")) {
            assert!(row.violation(&base) < 1e-7, "{} at {q:?}", row.tag);
        }
    }
}

#[test]
fn tail_polynomial_of_certified_point_is_nonnegative() {
    let opts = BoundOptions { shortcuts: false, ..BoundOptions::default() };
    for q in queries() {
        let r = product_bound(&q, &opts).unwrap();
        let mut x = r.dual;
        x.alpha += r.max_violation;
        let poly = tail_polynomial_coeffs(&q.spec, q.gamma).unwrap().eval_snapped(&x);
        let m = global_min(&poly, Domain::Ray(0.0), 1e-12).unwrap();
        assert!(!m.unbounded && m.value >= -1e-8, "min {} at {q:?}", m.value);
    }
}

#[test]
fn matching_rows_reproduce_tail_coefficients() {
    // with p_t = a_t and q = 0 every matching row is satisfied
    for q in queries() {
        let (problem, layout) = assemble_sdp(&q).unwrap();
        let x = DualPoint::new(1.3, -0.2, 0.4, 0.1);
        let mut v = values_for(&problem, &layout, &x);
        let poly = tail_polynomial_coeffs(&q.spec, q.gamma).unwrap().eval(&x);
        for (deg, &pv) in layout.p.iter().enumerate() {
            v[pv] = poly.coeffs().get(deg).copied().unwrap_or(0.0);
        }
        for row in problem.rows_tagged("match_") {
            assert!(row.violation(&v) < 1e-12, "{}", row.tag);
        }
    }
}
