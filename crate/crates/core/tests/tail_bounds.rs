mod common;

use common::{rel_err, scaled_moment_oracle};
use normbound::constants::AlphaBeta;
use normbound::tail_bounds::*;
use proptest::prelude::*;

fn q(x: f64, s: f64) -> BoundQuery {
    BoundQuery::new(x, s).unwrap()
}

fn ratios() -> Vec<f64> {
    (0..=80).map(|k| k as f64 * 0.1).collect()
}

#[test]
fn pinelis_frozen_values() {
    let cases = [
        (0.0, 2.849_532_654_769_470_8),
        (1.0, 0.904_186_653_856_858_7),
        (2.0, 0.129_654_487_773_301_7),
        (3.0, 0.007_693_157_043_477_972_6),
    ];
    for (u, want) in cases {
        assert!(rel_err(pinelis_bound(q(u, 1.0)), want) < 1e-13, "u = {u}");
    }
    assert_eq!(combined_bound(q(0.0, 1.0)), 1.0);
    assert!(rel_err(combined_bound(q(3.0, 1.0)), 0.007_693_157_043_477_972_6) < 1e-13);
}

#[test]
fn optimal_bound_against_brute_force() {
    // Independent scan of inf_t E(Z − t)₊⁵/(u − t)⁵ using the quadrature oracle.
    for u in [0.5, 1.0, 2.0, 3.0, 4.5] {
        let mut best = f64::INFINITY;
        for k in -300..=400 {
            let gap = 10f64.powf(k as f64 * 0.01);
            let t = u - gap;
            // Far left the positive part is inactive: E(Z − t)⁵ = −t⁵ − 10t³ − 15t.
            let m = if t <= -8.0 {
                -t.powi(5) - 10.0 * t.powi(3) - 15.0 * t
            } else {
                common::density(t) * scaled_moment_oracle(5, t)
            };
            best = best.min(m / gap.powi(5));
        }
        let got = optimal_bound(q(u, 1.0));
        assert!(got.value <= best * (1.0 + 1e-9), "u = {u}: {} vs {best}", got.value);
        assert!(got.value >= best * (1.0 - 1e-3), "u = {u}: {} vs {best}", got.value);
    }
}

#[test]
fn bound_chain() {
    for u in ratios() {
        let b = bound_report(q(u, 1.0));
        assert!(b.optimal <= b.pinelis.min(b.hoeffding) + 1e-10, "u = {u}: {b:?}");
    }
    let two = optimal_bound(q(2.0, 1.0)).value;
    assert!(two <= (-2f64).exp() && two <= 0.129_66);
}

#[test]
fn nonpositive_threshold_is_a_boundary_limit() {
    let b = optimal_bound(q(-1.0, 1.0));
    assert!(b.boundary_limit);
    assert!(b.value <= 1.0);
}

#[test]
fn crossover_root() {
    let root = pinelis_hoeffding_crossover();
    assert!((1.88..=1.90).contains(&root));
    assert!(rel_err(root, 1.887_091_493_801_926_9) < 1e-12);
    let near = |u: f64| pinelis_bound(q(u, 1.0)) - hoeffding_bound(q(u, 1.0));
    assert!(near(root - 1e-6) > 0.0 && near(root + 1e-6) < 0.0);
}

#[test]
fn monotone_in_threshold_and_scale() {
    let xs = ratios();
    for s in [0.5, 1.0, 2.0] {
        for w in xs.windows(2) {
            for f in [hoeffding_bound, pinelis_bound, combined_bound] {
                assert!(f(q(w[1], s)) <= f(q(w[0], s)));
                assert!(f(q(w[1], s)) <= f(q(w[1], s * 1.5)));
            }
            let (a, b) = (optimal_bound(q(w[0], s)).value, optimal_bound(q(w[1], s)).value);
            assert!(b <= a * (1.0 + 1e-9), "x = {}", w[1]);
        }
    }
}

#[test]
fn scale_invariance() {
    for u in ratios() {
        for lam in [0.1, 7.0] {
            let (a, b) = (q(u, 1.0), q(lam * u, lam));
            // λu/λ may differ from u in the last bit.
            assert!(rel_err(combined_bound(a), combined_bound(b)) < 1e-12);
            assert!(rel_err(pinelis_bound(a), pinelis_bound(b)) < 1e-12);
            assert!(rel_err(optimal_bound(a).value, optimal_bound(b).value) < 1e-9);
        }
    }
}

#[test]
fn maximal_moment_specializations() {
    // β = 0: Doob's tail inequality with k₁ = 1.
    let p = AlphaBeta::new(3.0, 0.0).unwrap();
    assert_eq!(maximal_moment_bound(p, 2.0, 0.5, 0.7).unwrap(), 0.7 / 1.5f64.powi(3));
    // β = α: Doob's moment inequality.
    let p = AlphaBeta::new(2.0, 2.0).unwrap();
    let via_k1 = maximal_moment_bound(p, 1.0, 0.0, 0.3).unwrap();
    assert!(rel_err(via_k1, doob_moment_bound(2.0, 0.3).unwrap()) < 1e-12);
    assert!(maximal_moment_bound(p, 0.0, 0.0, 1.0).is_err());
}

#[test]
fn rademacher_discrete_comparison() {
    assert_eq!(rademacher_tail_count(2, 2.0).unwrap(), (1, 2));
    assert_eq!(rademacher_tail_count(4, 0.0).unwrap(), (11, 4));
    assert!(rel_err(rademacher_discrete_bound(4, 2.0).unwrap(), 0.278_965_790_599_828_7) < 1e-14);
    assert!(rademacher_tail_count(0, 0.0).is_err());
    assert!(rademacher_tail_count(63, 0.0).is_err());
}

#[test]
fn truncation_is_additive() {
    let query = q(3.0, 1.0);
    let t = truncation_bound(&TruncationInput {
        exceed_probs: vec![0.01, 0.02],
        query,
    })
    .unwrap();
    assert!((t - combined_bound(query) - 0.03).abs() < 1e-15);
    let clamped = truncation_bound(&TruncationInput {
        exceed_probs: vec![0.6, 0.6],
        query,
    })
    .unwrap();
    assert_eq!(clamped, 1.0);
}

proptest! {
    #[test]
    fn pointwise_k_inequality(a in 0.5f64..6.0, frac in 0.0f64..=1.0, x in -5.0f64..5.0, gap in 0.01f64..5.0, u in -10.0f64..20.0) {
        let p = AlphaBeta::new(a, a * frac).unwrap();
        prop_assert!(pointwise_k_check(p, x, x - gap, u).unwrap());
    }

    #[test]
    fn tight_point_attains_equality(a in 0.5f64..6.0, frac in 0.0f64..0.95, x in -5.0f64..5.0, gap in 0.1f64..5.0) {
        let p = AlphaBeta::new(a, a * frac).unwrap();
        let t = x - gap;
        let u = tight_point(p, x, t).unwrap();
        let lhs = positive_power(u - x, p.beta());
        let rhs = normbound::constants::k_const(p) * positive_power(u - t, p.alpha()) / gap.powf(p.alpha() - p.beta());
        prop_assert!(rel_err(lhs, rhs) < 1e-10);
    }

    #[test]
    fn combined_is_min_of_parts(u in -3.0f64..10.0, s in 0.1f64..10.0) {
        let b = q(u * s, s);
        prop_assert_eq!(combined_bound(b), pinelis_bound(b).min(hoeffding_bound(b)).min(1.0));
    }
}
