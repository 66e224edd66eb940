use chebyprod_core::primal_oracle::{lower_bound_lp, GridSpec};
use chebyprod_core::product_bounds::{product_bound, verification_atoms, BoundOptions, BoundQuery, Side};
use chebyprod_core::{Event, MomentSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// (dual value, primal value, primal moment residual)
fn sandwich(spec: MomentSpec, gamma: f64, side: Side) -> (f64, f64, f64) {
    let opts = BoundOptions { shortcuts: false, ..BoundOptions::default() };
    let q = BoundQuery::new(spec, gamma, side);
    let dual = product_bound(&q, &opts).unwrap();
    let mut grid = GridSpec::with_n(40);
    grid.extra = verification_atoms(&q, &dual);
    let primal = lower_bound_lp(&spec, &Event::product(side.tail(), gamma), &grid).unwrap();
    let res = primal.distribution.max_residual(&spec);
    (dual.value, primal.value, res)
}

#[test]
fn left_tail_sandwich() {
    let (d, p, _) = sandwich(MomentSpec::new(3, 1.0, 0.5, 0.0), 0.5, Side::Left);
    assert!(p <= d + 1e-8 && d - p <= 1e-6, "dual {d} primal {p}");
}

#[test]
fn right_tail_sandwich() {
    let (d, p, _) = sandwich(MomentSpec::new(5, 1.0, 0.5, 0.0), 1.05f64.powi(5), Side::Right);
    assert!(p <= d + 1e-8 && d - p <= 1e-6, "dual {d} primal {p}");
}

// every primal feasible distribution is a lower bound on the dual value
#[test]
fn random_queries_respect_weak_duality() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    let mut solved = 0;
    for i in 0..400 {
        let t = rng.gen_range(2..=10);
        let mu = rng.gen_range(0.5..2.0);
        let sigma = rng.gen_range(0.05..3.0);
        let rho = rng.gen_range((-1.0 / (t as f64 - 1.0)) * 0.9..0.9);
        let spec = MomentSpec::new(t, mu, sigma, rho);
        if spec.ensure_strict().is_err() {
            continue;
        }
        let gamma = mu.powi(t as i32) * rng.gen_range(-4.0f64..4.0).exp();
        let side = if i % 2 == 0 { Side::Left } else { Side::Right };
        let (d, p, res) = sandwich(spec, gamma, side);
        assert!(res < 1e-7, "residual {res} at {spec:?} {gamma}");
        assert!(p <= d + 1e-6, "primal {p} above dual {d} at {spec:?} {gamma} {side:?}");
        worst = worst.max(d - p);
        solved += 1;
    }
    assert!(solved > 300);
    // grid of 40 levels plus the dual support; gaps stay small
    assert!(worst < 5e-3, "worst gap {worst}");
}
