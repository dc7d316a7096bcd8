use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;

use vstruct_core::analytic::{fixed_moments, random_covariance, scaling_limit_gaps, Summary};
use vstruct_core::combine::{delta_combined, optimal_alpha, variance_p, variance_p_star};
use vstruct_core::estimators::{estimate_set, Counts};
use vstruct_core::hypergeom::{f22_rational, f22_terminating, scaled_binom_term};
use vstruct_core::numeric::{format_rational, parse_rational, ratio_to_f64};
use vstruct_core::oracles::{enumerate_fixed, enumerate_random, mixture_random, EnumCaps};
use vstruct_core::simulate::{run_simulation, SimConfig};
use vstruct_core::sweep::valid_c_range;
use vstruct_core::{Design, EffectParams, Regime, VStructParams};

fn params() -> impl Strategy<Value = VStructParams<f64>> {
    (
        0.05..0.95f64,
        0.05..0.95f64,
        prop::array::uniform4(0.0..=1.0f64),
    )
        .prop_map(|(px, pz, py)| VStructParams::new(px, pz, py).unwrap())
}

fn rational_params() -> impl Strategy<Value = VStructParams<BigRational>> {
    let frac = |lo: i64, hi: i64| {
        (lo..=hi).prop_map(|k| BigRational::new(BigInt::from(k), BigInt::from(12)))
    };
    (frac(1, 11), frac(1, 11), prop::array::uniform4(frac(0, 12)))
        .prop_map(|(px, pz, py)| VStructParams::new(px, pz, py).unwrap())
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

/// Covariance triples with `c^2 <= v_r v_m` and a non-degenerate
/// combination.
fn moments() -> impl Strategy<Value = (f64, f64, f64)> {
    (1e-4..1.0f64, 1e-4..1.0f64, -0.999..0.999f64)
        .prop_map(|(vr, vm, rho)| (vr, vm, rho * (vr * vm).sqrt()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn optimal_alpha_minimises_variance((vr, vm, c) in moments(), alpha in -3.0..3.0f64) {
        let a = optimal_alpha(vr, vm, c).unwrap();
        let best = variance_p(vr, vm, c, a);
        prop_assert!(best <= variance_p(vr, vm, c, alpha) + 1e-15);
        prop_assert!(close(best, variance_p_star(vr, vm, c).unwrap(), 1e-12));
        prop_assert!(best <= vr.min(vm) * (1.0 + 1e-12));
        prop_assert!(delta_combined(vr, vm, c).unwrap() <= 0.0);
    }

    #[test]
    fn optimal_alpha_is_symmetric((vr, vm, c) in moments()) {
        let a = optimal_alpha(vr, vm, c).unwrap();
        let b = optimal_alpha(vm, vr, c).unwrap();
        prop_assert!(close(a + b, 1.0, 1e-9));
        prop_assert!(close(variance_p_star(vr, vm, c).unwrap(), variance_p_star(vm, vr, c).unwrap(), 1e-12));
    }

    #[test]
    fn fixed_variances_non_negative(p in params(), n0 in 1u32..40, n1 in 1u32..40) {
        let s = Summary::from(&fixed_moments(&p, n0, n1).unwrap());
        prop_assert!(s.var_r >= -1e-15 && s.var_m >= -1e-15);
        prop_assert!(s.cov_rm * s.cov_rm <= s.var_r * s.var_m * (1.0 + 1e-9) + 1e-18);
    }

    #[test]
    fn relabelling_x_keeps_second_moments(p in params(), n in 2u32..60, n0 in 1u32..20, n1 in 1u32..20) {
        let a = random_covariance(&p, n).unwrap().cov_rm;
        let b = random_covariance(&p.mirrored(), n).unwrap().cov_rm;
        prop_assert!(close(a, b, 1e-10));
        let f = Summary::from(&fixed_moments(&p, n0, n1).unwrap());
        let g = Summary::from(&fixed_moments(&p.mirrored(), n1, n0).unwrap());
        prop_assert!(close(f.var_r, g.var_r, 1e-10) && close(f.var_m, g.var_m, 1e-10) && close(f.cov_rm, g.cov_rm, 1e-10));
        prop_assert!(close(f.e_m, -g.e_m, 1e-10));
    }

    #[test]
    fn mixture_covariance_matches_analytic(p in params(), n in 2u32..80) {
        let mix = mixture_random(&p, n, 1).unwrap().summary();
        let c = random_covariance(&p, n).unwrap().cov_rm;
        prop_assert!((mix.cov_rm - c).abs() <= 1e-12, "{} vs {}", mix.cov_rm, c);
    }

    #[test]
    fn enumeration_is_a_probability_measure(p in params(), n in 1u32..7) {
        let e = enumerate_random(&p.cell_probs(), n, &EnumCaps::default(), 1).unwrap();
        prop_assert!((e.mass - 1.0).abs() <= 1e-12);
        prop_assert!(e.cauchy_schwarz_holds());
    }

    #[test]
    fn estimates_depend_only_on_proportions(n in prop::array::uniform8(0u64..6), k in 2u64..50) {
        prop_assume!(n.iter().sum::<u64>() > 0);
        let c = Counts::new(n).unwrap();
        prop_assert_eq!(estimate_set::<BigRational>(&c), estimate_set::<BigRational>(&c.scaled(k)));
    }

    #[test]
    fn f22_float_matches_rational(m in 0u32..60, num in -8i64..=8) {
        let z = BigRational::new(BigInt::from(num), BigInt::from(8));
        let exact = ratio_to_f64(&f22_rational(m, &z));
        prop_assert!(close(f22_terminating(m, num as f64 / 8.0), exact, 1e-12));
    }

    #[test]
    fn scaled_binom_term_approaches_one(n in 50u32..2000, pi in 0.1..0.9f64) {
        let v = scaled_binom_term(n, pi).unwrap();
        let lead = 1.0 + 1.0 / (n as f64 * pi);
        prop_assert!((v - lead).abs() <= 3.0 / (n as f64 * pi).powi(2));
    }

    #[test]
    fn valid_c_range_edges_are_valid(q0 in 0.0..=1.0f64, q1 in 0.0..=1.0f64, d in -0.3..0.3f64, pz in 0.05..0.95f64) {
        if let Some((lo, hi)) = valid_c_range(q0, q1, d, pz) {
            for c in [lo, hi, 0.5 * (lo + hi)] {
                let e = EffectParams { q0, q1, c, d, pz, px: 0.5 };
                prop_assert!(e.induced_py().iter().all(|&p| (-1e-12..=1.0 + 1e-12).contains(&p)));
            }
        }
    }

    #[test]
    fn scaling_limit_gaps_non_positive(q0 in 0.05..0.95f64, q1 in 0.05..0.95f64, c in -0.3..0.3f64, d in -0.3..0.3f64,
                                       pz in 0.05..0.95f64, f in 0.05..0.95f64, n in 10u32..1000) {
        let e = EffectParams { q0, q1, c, d, pz, px: f };
        for regime in [Regime::Random, Regime::Fixed] {
            prop_assert!(scaling_limit_gaps(&e, n, regime).unwrap().gaps_non_positive());
        }
    }

    #[test]
    fn rationals_round_trip(num in -1000i64..1000, den in 1i64..1000) {
        let r = BigRational::new(BigInt::from(num), BigInt::from(den));
        prop_assert_eq!(parse_rational(&format_rational(&r)).unwrap(), r);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn exact_fixed_moments_equal_rational_enumeration(p in rational_params(), n0 in 1u32..4, n1 in 1u32..4) {
        let a = fixed_moments(&p, n0, n1).unwrap();
        let e = enumerate_fixed(&p.cell_probs_fixed(), n0, n1, &EnumCaps::default(), 1).unwrap();
        prop_assert_eq!(&a.var_r, &e.moments.var_r);
        prop_assert_eq!(&a.var_m, &e.moments.var_m);
        prop_assert_eq!(&a.cov_rm, &e.moments.cov_rm);
    }

    #[test]
    fn exact_random_covariance_equals_rational_enumeration(p in rational_params(), n in 2u32..5) {
        let a = random_covariance(&p, n).unwrap();
        let e = enumerate_random(&p.cell_probs(), n, &EnumCaps::default(), 1).unwrap();
        prop_assert_eq!(&a.cov_rm, &e.moments.cov_rm);
        let m = mixture_random(&p, n, 1).unwrap();
        prop_assert_eq!(&m.moments.var_r, &e.moments.var_r);
        prop_assert_eq!(&m.moments.var_m, &e.moments.var_m);
    }

    #[test]
    fn simulation_ignores_worker_count(seed in any::<u64>(), reps in 1u64..3000, chunk in 1u64..700, workers in 2usize..6) {
        let p = VStructParams::new(0.3, 0.6, [0.1, 0.5, 0.4, 0.9]).unwrap();
        let mut cfg = SimConfig::new(Design::random(12).unwrap(), reps, seed);
        cfg.chunk_size = chunk;
        let one = run_simulation(&cfg, &p).unwrap();
        cfg.workers = workers;
        let many = run_simulation(&cfg, &p).unwrap();
        prop_assert_eq!(serde_json::to_string(&one).unwrap(), serde_json::to_string(&many).unwrap());
        prop_assert_eq!(one.variances_defined, reps >= 2);
    }
}
