//! End-to-end numerical checks that complement the acceptance gate.

use dispersive_core::decay_fit::{kernel_decay, TimeWindow};
use dispersive_core::dispersion::DispersionRelation;
use dispersive_core::exec::Execution;
use dispersive_core::kernel::SupGrid;
use dispersive_core::nonlinear::{small_data_threshold, NonlinearProblem};
use dispersive_core::propagator::{group_decay_check, predicted_group_exponent, GroupKind};
use dispersive_core::scenario::beam_group_decay;
use dispersive_core::strichartz::{hls_numeric_check, HlsCheckConfig, HlsKernelSpec};

const EXEC: Execution = Execution::Parallel;

#[test]
fn sup_norm_decays_at_least_as_fast_as_predicted() {
    let early = TimeWindow { t_min: 10.0, t_max: 1e3, samples: 8 };
    // phi''(4) is about 0.014 for Klein-Gordon, so at k = 1 the sup stays near
    // the trivial bound until t ~ 100 and the rate only shows later.
    let late = TimeWindow { t_min: 1e3, t_max: 1e4, samples: 8 };
    let grid = SupGrid::default();
    for (name, n, k, window) in [
        ("klein_gordon", 1, 1, &late),
        ("klein_gordon", 2, -1, &early),
        ("beam", 2, 0, &early),
        ("schrodinger4", 1, -1, &early),
        ("schrodinger4", 3, 0, &early),
        ("wave", 3, 0, &early),
    ] {
        let rel = DispersionRelation::builtin(name).unwrap();
        let s = kernel_decay(&rel, n, k, window, &grid, 0.1).unwrap();
        let r = &s.record;
        assert!(
            r.verdict.passed(),
            "{name} n={n} k={k}: fitted {} vs predicted {} (sharp {})",
            r.fitted,
            r.predicted,
            r.sharp
        );
    }
}

#[test]
fn beam_lq_decay_at_large_time() {
    // n = 2, q = 4: |t|^(n/(2q) - n/4) = |t|^(-1/4).
    let mut cfg = beam_group_decay();
    cfg.p = 4.0;
    let (predicted, _) = predicted_group_exponent(GroupKind::Beam, 2, 0.0, 0.0, 4.0).unwrap();
    assert!((predicted + 0.25).abs() < 1e-15);
    let r = group_decay_check(&cfg, EXEC).unwrap();
    assert!(r.series.fit.slope <= -0.25 + 0.1, "slope {}", r.series.fit.slope);
}

#[test]
fn hls_bounded_ratio_in_cases_a_and_d() {
    for spec in [
        HlsKernelSpec { gamma1: 0.5, gamma2: 2.0, p: 2.0, q: 2.0, n: 1 },
        HlsKernelSpec { gamma1: 0.5, gamma2: 0.5, p: 4.0 / 3.0, q: 4.0, n: 1 },
    ] {
        let r = hls_numeric_check(&HlsCheckConfig::new(spec), EXEC).unwrap();
        assert!(r.verdict.passed(), "{spec:?}: {} -> {}", r.max_ratio, r.refined_max_ratio);
    }
}

#[test]
fn threshold_is_monotone_in_the_horizon() {
    let long = NonlinearProblem::kg_1d();
    let short = NonlinearProblem {
        horizon: long.horizon / 2.0,
        steps: long.steps / 2,
        ..long.clone()
    };
    let a = small_data_threshold(&long, 1e-2, 10.0, 8, EXEC).unwrap();
    let b = small_data_threshold(&short, 1e-2, 10.0, 8, EXEC).unwrap();
    let (ta, tb) = (a.threshold.unwrap(), b.threshold.unwrap());
    assert!(tb >= ta, "T/2 threshold {tb} below T threshold {ta}");
    // Every scale reported as contracting lies at or below the threshold.
    for (scale, contracts) in a.trace {
        if contracts {
            assert!(scale <= ta);
        }
    }
}
