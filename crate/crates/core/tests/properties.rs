use chebyprod_core::analytic::{extremal_distribution, markov_root_limit, mo_bound, relaxed_right_bound};
use chebyprod_core::generic_bounds::generic_bound;
use chebyprod_core::geometry::{f_t, g_t, max_simplex_product, min_product_given_means, MinProduct};
use chebyprod_core::lp::{solve_lp, LinearProgram, LpOutcome};
use chebyprod_core::poly::{global_min, isolate_nonnegative_roots, Domain};
use chebyprod_core::portfolio::{estimate_moments, worst_case_var, ReturnPanel};
use chebyprod_core::primal_oracle::{lower_bound_lp, GridSpec};
use chebyprod_core::product_bounds::{dual_objective, families, product_bound};
use chebyprod_core::sip::{solve_sip, SipOptions};
use chebyprod_core::{Atom, BoundOptions, BoundQuery, DualPoint, Event, Functional, MomentSpec, Polynomial, Side, Tail};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn strict_spec() -> impl Strategy<Value = MomentSpec> {
    (2usize..=6, 0.5f64..2.0, 0.1f64..2.0, -0.9f64..0.9)
        .prop_map(|(t, mu, sigma, r)| {
            // map r onto the admissible rho range for this T
            let lo = -1.0 / (t as f64 - 1.0);
            let rho = if r < 0.0 { -r * lo } else { r };
            MomentSpec::new(t, mu, sigma, rho)
        })
        .prop_filter("strictly feasible", |s| s.ensure_strict().is_ok())
}

/// `alpha + beta sum + gamma1 ||xi||^2 + gamma2 (sum)^2 - 1[event]` at `xi`.
fn primal_slack(x: &DualPoint, xi: &[f64], event: &Event) -> f64 {
    let s: f64 = xi.iter().sum();
    let q: f64 = xi.iter().map(|v| v * v).sum();
    x.alpha + x.beta * s + x.gamma1 * q + x.gamma2 * s * s - if event.holds(xi) { 1.0 } else { 0.0 }
}

/// Random points at mixed scales, including ones pushed onto the event boundary.
fn sample_points(t: usize, gamma: f64, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let scale = 10f64.powf(rng.gen_range(-2.0..2.0));
            let mut xi: Vec<f64> = (0..t).map(|_| if rng.gen_bool(0.1) { 0.0 } else { scale * rng.gen::<f64>() }).collect();
            if i % 3 == 0 && xi.iter().all(|&v| v > 0.0) {
                // rescale so the product equals gamma
                let lp: f64 = xi.iter().map(|v| v.ln()).sum();
                let f = ((gamma.ln() - lp) / t as f64).exp();
                xi.iter_mut().for_each(|v| *v *= f);
            }
            xi
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eigenvalues_positive_iff_structurally_valid(t in 2usize..8, mu in 0.1f64..3.0, sigma in 0.1f64..3.0, rho in -1.5f64..1.5) {
        let s = MomentSpec::new(t, mu, sigma, rho);
        let (a, b) = s.covariance_eigenvalues();
        let valid = s.check_structure().is_ok() && s.theta() > 0.0;
        prop_assert_eq!(a > 0.0 && b > 0.0, valid);
    }

    #[test]
    fn feasibility_is_monotone_in_rho(t in 2usize..8, mu in 0.1f64..3.0, sigma in 0.1f64..3.0, f0 in 0.0f64..1.0, f1 in 0.0f64..1.0) {
        let lo = -1.0 / (t as f64 - 1.0);
        let (r0, r1) = (lo + (1.0 - lo) * f0.min(f1) * 0.999, lo + (1.0 - lo) * f0.max(f1) * 0.999);
        let v0 = MomentSpec::new(t, mu, sigma, r0).validate().unwrap();
        let v1 = MomentSpec::new(t, mu, sigma, r1).validate().unwrap();
        prop_assert!(!v0.feasible || v1.feasible);
    }

    #[test]
    fn descartes_bounds_root_count(c in prop::collection::vec(-5.0f64..5.0, 2..13)) {
        let p = Polynomial::new(c.clone());
        prop_assume!(!p.is_zero());
        let nz: Vec<f64> = p.coeffs().iter().copied().filter(|v| *v != 0.0).collect();
        let variations = nz.windows(2).filter(|w| w[0] * w[1] < 0.0).count();
        let roots = isolate_nonnegative_roots(&p, 1e-12).unwrap();
        let count: usize = roots.iter().filter(|r| r.x > 0.0).map(|r| r.multiplicity).sum();
        prop_assert!(count <= variations, "{} roots, {} variations", count, variations);
    }

    #[test]
    fn lp_matches_vertex_enumeration(rows in prop::collection::vec((-2.0f64..3.0, -2.0f64..3.0, -1.0f64..3.0), 1..6), c in (-2.0f64..2.0, -2.0f64..2.0), perm in any::<u64>()) {
        // min c.x over a_i.x >= b_i, 0 <= x <= 10
        let mut lines: Vec<(f64, f64, f64)> = rows.clone();
        lines.extend([(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (-1.0, 0.0, -10.0), (0.0, -1.0, -10.0)]);
        let feasible = |x: f64, y: f64| lines.iter().all(|&(a, b, r)| a * x + b * y >= r - 1e-9);
        let mut best: Option<f64> = None;
        for i in 0..lines.len() {
            for j in i + 1..lines.len() {
                let (a1, b1, r1) = lines[i];
                let (a2, b2, r2) = lines[j];
                let det = a1 * b2 - a2 * b1;
                if det.abs() < 1e-9 {
                    continue;
                }
                let x = (r1 * b2 - r2 * b1) / det;
                let y = (a1 * r2 - a2 * r1) / det;
                if feasible(x, y) {
                    let v = c.0 * x + c.1 * y;
                    best = Some(best.map_or(v, |b: f64| b.min(v)));
                }
            }
        }
        let build = |order: &[usize]| {
            let mut lp = LinearProgram::new(vec![c.0, c.1]);
            lp.set_bounds(0, 0.0, 10.0).set_bounds(1, 0.0, 10.0);
            for &k in order {
                lp.add_geq(vec![rows[k].0, rows[k].1], rows[k].2);
            }
            solve_lp(&lp, 1e-9).unwrap()
        };
        let order: Vec<usize> = (0..rows.len()).collect();
        let mut shuffled = order.clone();
        shuffled.rotate_left((perm % rows.len() as u64) as usize);
        shuffled.reverse();
        match (build(&order), best) {
            (LpOutcome::Optimal(s), Some(b)) => {
                prop_assert!((s.value - b).abs() < 1e-7, "lp {} vertices {}", s.value, b);
                let again = build(&shuffled).optimal().unwrap();
                prop_assert!((again.value - s.value).abs() < 1e-9);
            }
            (LpOutcome::Infeasible, None) => {}
            (other, b) => prop_assert!(false, "lp {:?} vertices {:?}", other, b),
        }
    }

    #[test]
    fn lp_duals_certify_optimum(a in prop::collection::vec(prop::collection::vec(-1.0f64..3.0, 3), 1..5), b in prop::collection::vec(-1.0f64..3.0, 5), c in prop::collection::vec(0.1f64..3.0, 3)) {
        let mut lp = LinearProgram::new(c.clone());
        for (row, &r) in a.iter().zip(&b) {
            lp.add_geq(row.clone(), r);
        }
        if let LpOutcome::Optimal(s) = solve_lp(&lp, 1e-9).unwrap() {
            let dual: f64 = s.ineq_duals.iter().zip(&b).map(|(y, r)| y * r).sum();
            prop_assert!((dual - s.value).abs() < 1e-7 * (1.0 + s.value.abs()));
            prop_assert!(s.ineq_duals.iter().all(|&y| y >= -1e-9));
            for j in 0..3 {
                let reduced = c[j] - a.iter().zip(&s.ineq_duals).map(|(row, y)| row[j] * y).sum::<f64>();
                prop_assert!(reduced >= -1e-7);
            }
        }
    }

    #[test]
    fn extremal_distribution_moments(spec in strict_spec(), f in -1.0f64..2.0) {
        let g = spec.mu.powf(spec.tf()) * f.exp();
        let d = extremal_distribution(&spec, g).unwrap();
        let (m1, m2, cross) = d.moments();
        prop_assert!((d.total_mass() - 1.0).abs() < 1e-12);
        prop_assert!((m1 - spec.mu).abs() < 1e-12 * spec.mu.max(1.0));
        // deficit Sigma + mu mu^T - E[xi xi^T] has eigenvalues
        // (m2 - cross) deficit on 1-perp and the sum along 1
        let (d_perp, d_one) = ((spec.second_moment() - spec.cross_moment()) - (m2 - cross),
            (spec.second_moment() + (spec.tf() - 1.0) * spec.cross_moment()) - (m2 + (spec.tf() - 1.0) * cross));
        prop_assert!(d_perp >= -1e-10 && d_one >= -1e-10, "{} {}", d_perp, d_one);
        let p = d.event_probability(&Event::product(Tail::Geq, g));
        prop_assert!((p - relaxed_right_bound(&spec, g).unwrap().value).abs() < 1e-9);
    }

    #[test]
    fn mo_dominates_relaxed(spec in strict_spec(), f in -1.0f64..3.0) {
        let g = spec.mu.powf(spec.tf()) * f.exp();
        let rp = relaxed_right_bound(&spec, g).unwrap().value;
        let mo = mo_bound(&spec, g).unwrap().value;
        prop_assert!(mo >= rp - 1e-12);
        if g.ln() >= spec.tf() * markov_root_limit(&spec).ln() {
            prop_assert!((mo - rp).abs() < 1e-12);
        }
    }

    #[test]
    fn simplex_norm_bounds(t in 2usize..7, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let cap = max_simplex_product(t);
        let (lo, hi) = (cap * a.min(b), cap * a.max(b));
        let tf = t as f64;
        let (f_lo, f_hi) = (f_t(t, lo).unwrap(), f_t(t, hi).unwrap());
        let (g_lo, g_hi) = (g_t(t, lo).unwrap(), g_t(t, hi).unwrap());
        prop_assert!(f_hi <= f_lo + 1e-12 && g_hi <= g_lo + 1e-12);
        for (f, g) in [(f_lo, g_lo), (f_hi, g_hi)] {
            prop_assert!(1.0 / tf - 1e-12 <= f && f <= g + 1e-12 && g <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn min_product_witness_is_feasible(t in 2usize..7, m1 in 0.2f64..3.0, r in 0.0f64..1.0) {
        let tf = t as f64;
        let m2 = m1 * m1 * (1.0 + (tf - 1.0) * r);
        match min_product_given_means(t, m1, m2).unwrap() {
            MinProduct::Solved { value, witness } => {
                prop_assert_eq!(witness.len(), t);
                let mean = witness.iter().sum::<f64>() / tf;
                let sq = witness.iter().map(|v| v * v).sum::<f64>() / tf;
                prop_assert!((mean - m1).abs() < 1e-10 * m1.max(1.0));
                prop_assert!((sq - m2).abs() < 1e-10 * m2.max(1.0));
                prop_assert!(witness.iter().all(|&v| v >= 0.0));
                prop_assert!((witness.iter().product::<f64>() - value).abs() < 1e-10 * m1.powi(t as i32).max(1.0));
            }
            MinProduct::Infeasible { .. } => prop_assert!(false, "ratio inside [1, T]"),
        }
    }

    #[test]
    fn symmetrised_moments_match_permutations(t in 2usize..=5, x in 0.0f64..3.0, y in 0.0f64..3.0) {
        let atom = Atom::OneDistinct { x, y };
        let c = atom.coords(t);
        // the orbit of a one-distinct point is its t rotations
        let (mut m1, mut m2, mut cross) = (0.0, 0.0, 0.0);
        for k in 0..t {
            let mut v = c.clone();
            v.rotate_left(k);
            m1 += v[0];
            m2 += v[0] * v[0];
            cross += v[0] * v[1];
        }
        let tf = t as f64;
        prop_assert!((atom.m1(t) - m1 / tf).abs() < 1e-12);
        prop_assert!((atom.m2(t) - m2 / tf).abs() < 1e-12);
        prop_assert!((atom.cross(t) - cross / tf).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn global_min_matches_grid(c in prop::collection::vec(-5.0f64..5.0, 2..13)) {
        let p = Polynomial::new(c);
        prop_assume!(!p.is_zero());
        let (a, b) = (0.0, 2.0);
        let m = global_min(&p, Domain::Interval(a, b), 1e-12).unwrap();
        let n = 1_000_000;
        let h = (b - a) / n as f64;
        let (mut bx, mut bv) = (a, p.eval(a));
        for i in 1..=n {
            let x = a + h * i as f64;
            let v = p.eval(x);
            if v < bv {
                bx = x;
                bv = v;
            }
        }
        // golden-section refinement inside the neighbouring cells
        let (mut lo, mut hi) = ((bx - h).max(a), (bx + h).min(b));
        for _ in 0..100 {
            let m1 = lo + 0.382 * (hi - lo);
            let m2 = lo + 0.618 * (hi - lo);
            if p.eval(m1) <= p.eval(m2) { hi = m2 } else { lo = m1 }
        }
        let refined = bv.min(p.eval(0.5 * (lo + hi)));
        prop_assert!((m.value - refined).abs() < 1e-8, "global_min {} grid {}", m.value, refined);
    }

    #[test]
    fn bounds_are_monotone_in_gamma(spec in strict_spec(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let mt = spec.mu.powf(spec.tf());
        let (g0, g1) = (mt * a.min(b).exp(), mt * a.max(b).exp());
        let opts = BoundOptions::default();
        let l = |g| product_bound(&BoundQuery::new(spec, g, Side::Left), &opts).unwrap().value;
        let r = |g| product_bound(&BoundQuery::new(spec, g, Side::Right), &opts).unwrap().value;
        prop_assert!(l(g0) <= l(g1) + 1e-8);
        prop_assert!(r(g0) >= r(g1) - 1e-8);
        prop_assert!(r(g1) <= relaxed_right_bound(&spec, g1).unwrap().value + 1e-8);
    }

    #[test]
    fn dual_point_passes_independent_recheck(spec in strict_spec(), f in -2.0f64..2.0, left in any::<bool>(), seed in any::<u64>()) {
        let g = spec.mu.powf(spec.tf()) * f.exp();
        let side = if left { Side::Left } else { Side::Right };
        let q = BoundQuery::new(spec, g, side);
        let r = product_bound(&q, &BoundOptions { shortcuts: false, ..BoundOptions::default() }).unwrap();
        let mut x = r.dual;
        x.alpha += r.max_violation;
        let ev = Event::product(side.tail(), g);
        let scale = 1.0 + x.to_array().iter().map(|v| v.abs()).fold(0.0, f64::max);
        for xi in sample_points(spec.t, g, 10_000, seed) {
            let s = primal_slack(&x, &xi, &ev);
            let size = 1.0 + xi.iter().map(|v| v * v).sum::<f64>();
            prop_assert!(s >= -1e-7 * scale * size, "slack {} at {:?}", s, xi);
        }
    }

    #[test]
    fn duplicate_family_and_trust_box_leave_value(spec in strict_spec(), f in -1.5f64..1.5, left in any::<bool>()) {
        let side = if left { Side::Left } else { Side::Right };
        let q = BoundQuery::new(spec, spec.mu.powf(spec.tf()) * f.exp(), side);
        let fam = families(&q, false);
        let c = dual_objective(&spec);
        let opts = SipOptions::default();
        let base = solve_sip(&c, &fam.as_dyn(), &fam.linear, &opts).unwrap().value;
        let mut doubled = fam.as_dyn();
        doubled.push(&fam.tail);
        let dup = solve_sip(&c, &doubled, &fam.linear, &opts).unwrap().value;
        let wide = solve_sip(&c, &fam.as_dyn(), &fam.linear, &SipOptions { trust_radius0: 1e5, ..opts }).unwrap().value;
        // agreement up to the stall acceptance threshold
        prop_assert!((dup - base).abs() <= 1e-6, "{} vs {}", dup, base);
        prop_assert!((wide - base).abs() <= 1e-6, "{} vs {}", wide, base);
    }

    #[test]
    fn generic_duals_respect_sign_rows(spec in strict_spec(), k in 0usize..6, f in 0.3f64..3.0) {
        let (func, tail) = [(Functional::Min, Tail::Leq), (Functional::Min, Tail::Geq), (Functional::Max, Tail::Leq),
            (Functional::Max, Tail::Geq), (Functional::Sum, Tail::Leq), (Functional::Sum, Tail::Geq)][k];
        let base = if func == Functional::Sum { spec.tf() * spec.mu } else { spec.mu };
        let r = generic_bound(&spec, &Event::new(func, tail, base * f), &SipOptions::default()).unwrap();
        let x = r.dual;
        prop_assert!(r.value >= -1e-9 && r.value <= 1.0 + 1e-9);
        prop_assert!(x.gamma1 + x.gamma2 >= -1e-8 && x.gamma1 / spec.tf() + x.gamma2 >= -1e-8);
    }

    #[test]
    fn nested_grid_never_loses_mass(spec in strict_spec(), f in -1.0f64..1.0, n in 5usize..14) {
        let ev = Event::product(Tail::Leq, spec.mu.powf(spec.tf()) * f.exp());
        // 2n - 2 values contain every value of the n-point grid
        let coarse = lower_bound_lp(&spec, &ev, &GridSpec::with_n(n));
        let fine = lower_bound_lp(&spec, &ev, &GridSpec::with_n(2 * n - 2));
        if let Ok(c) = coarse {
            prop_assert!(fine.unwrap().value >= c.value - 1e-8);
        }
    }

    #[test]
    fn wvar_grows_with_epsilon(mu in 1.0f64..1.1, sigma in 0.02f64..0.3, t in 2usize..8, e0 in 0.01f64..0.5, e1 in 0.01f64..0.5) {
        let spec = MomentSpec::new(t, mu, sigma, 0.0);
        let opts = BoundOptions::default();
        let w0 = worst_case_var(&spec, e0.min(e1), 1e-6, &opts).unwrap();
        let w1 = worst_case_var(&spec, e0.max(e1), 1e-6, &opts).unwrap();
        prop_assert!(w1.value >= w0.value * (1.0 - 1e-6));
        if w0.value > 0.0 {
            prop_assert!(w0.growth_rate(t).is_finite());
        }
    }

    #[test]
    fn lower_variance_wins_at_equal_mean(mu in 1.0f64..1.1, s0 in 0.02f64..0.3, s1 in 0.02f64..0.3, t in 2usize..8) {
        let opts = BoundOptions::default();
        let w = |s: f64| worst_case_var(&MomentSpec::new(t, mu, s, 0.0), 0.1, 1e-6, &opts).unwrap().value;
        let (lo, hi) = (w(s0.min(s1)), w(s0.max(s1)));
        prop_assert!(lo >= hi * (1.0 - 1e-6), "{} < {}", lo, hi);
    }

    #[test]
    fn period_order_does_not_change_estimates(rows in prop::collection::vec(prop::collection::vec(-0.5f64..0.5, 3), 2..20), k in any::<usize>()) {
        let a = ReturnPanel::new(vec!["a".into(), "b".into(), "c".into()], rows.clone()).unwrap();
        let mut r2 = rows.clone();
        let len = r2.len();
        r2.rotate_left(k % len);
        r2.reverse();
        let b = ReturnPanel::new(a.asset_names.clone(), r2).unwrap();
        let (ma, ca) = estimate_moments(&a).unwrap();
        let (mb, cb) = estimate_moments(&b).unwrap();
        for i in 0..3 {
            prop_assert!((ma[i] - mb[i]).abs() < 1e-14);
            for j in 0..3 {
                prop_assert!((ca[i][j] - cb[i][j]).abs() < 1e-14);
            }
        }
    }
}
