use dispersive_core::decay_fit::fit_exponent;
use dispersive_core::dispersion::DispersionRelation;
use dispersive_core::propagator::{evolve, GridField};
use dispersive_core::special::BumpPair;
use dispersive_core::strichartz::{dual_exponent, exponent_case, Case};
use num_complex::Complex64;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partition_of_unity(log_r in -20.0f64..20.0) {
        let r = 2f64.powf(log_r);
        prop_assert!((BumpPair.partition_sum(r, 20) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn dual_exponent_is_an_involution(p in 1.0f64..1e6) {
        let q = dual_exponent(p);
        prop_assert!((1.0 / p + 1.0 / q - 1.0).abs() < 1e-12);
        prop_assert!((dual_exponent(q) - p).abs() <= 1e-9 * p);
    }

    #[test]
    fn power_of_two_rescaling_keeps_the_slope(j in -60i32..60, wiggle in 0.0f64..0.3) {
        let s: Vec<(f64, f64)> = (0..10)
            .map(|i| 10.0 * 1.6f64.powi(i))
            .map(|t| (t, t.powf(-0.8) * (1.0 + wiggle * t.cos())))
            .collect();
        let scaled: Vec<_> = s.iter().map(|&(t, m)| (t, m * 2f64.powi(j))).collect();
        prop_assert_eq!(fit_exponent(&s).unwrap().slope, fit_exponent(&scaled).unwrap().slope);
    }

    #[test]
    fn exponent_set_admits_interior_points(q in 2.0f64..1e3, lo in 0.01f64..0.99, hi in 0.01f64..0.99) {
        // 2/q strictly between theta1 < theta2 always admits q.
        let x = 2.0 / q;
        let (t1, t2) = (x - lo, x + hi);
        let case = exponent_case(q, t1, t2);
        prop_assert!(matches!(case, Some(Case::C) | Some(Case::D) | Some(Case::B)), "{:?}", case);
        prop_assert!(exponent_case(q, t2, t1).is_none());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn evolution_is_a_group(t1 in -20.0f64..20.0, t2 in -20.0f64..20.0, shift in -3.0f64..3.0) {
        let rel = DispersionRelation::builtin("klein_gordon").unwrap();
        let f = GridField::from_fn(1, 256, 40.0, |x| {
            Complex64::new((-(x[0] - shift).powi(2)).exp(), 0.3 * x[0] * (-(x[0] * x[0])).exp())
        })
        .unwrap();
        let two_steps = evolve(&rel, &evolve(&rel, &f, t1).unwrap(), t2).unwrap();
        let one_step = evolve(&rel, &f, t1 + t2).unwrap();
        let diff = two_steps.sub(&one_step).unwrap().max_abs();
        prop_assert!(diff < 1e-12, "difference {diff:e}");
    }
}
