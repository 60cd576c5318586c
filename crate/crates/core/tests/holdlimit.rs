use proptest::prelude::*;

use ringhold::config::RunConfig;
use ringhold::holdlimit::{
    controller_for, grid_search, simulation_hold_limit, system_for, HumanErrorKind, JointScenario, ProbeResult,
    SweepParam,
};
use ringhold::simulator::{ensemble_converges, DisturbanceModel, Plant, SimConfig, VerdictStatus};
use ringhold::stats::{linear_fit, spearman};

/// Largest grid point `k·g` in the range that is at most `threshold`, by scanning.
fn scan_limit(range: (f64, f64), g: f64, threshold: f64) -> f64 {
    let mut best = 0.0;
    let mut k = 1i64;
    loop {
        let d = k as f64 * g;
        if d > range.1 + 1e-9 {
            return best;
        }
        if d >= range.0 - 1e-9 {
            if d <= threshold {
                best = d;
            } else {
                return best;
            }
        }
        k += 1;
    }
}

#[test]
fn simulated_limit_is_bracketed_by_its_witness() {
    let mut cfg = RunConfig::default();
    cfg.sim = SimConfig { n_seeds: 5, total_time: 150.0, ..cfg.sim };
    let sys = system_for(&cfg).unwrap();
    let c = controller_for(&cfg, &sys).unwrap();
    let dist = DisturbanceModel::default();
    let g = 0.1;
    let r = simulation_hold_limit(&sys, &c, &dist, Plant::NonlinearOvm, &cfg.sim, (0.0, 4.0), g).unwrap();
    assert!(r.limit > 0.5 && r.limit < 4.0, "limit {}", r.limit);
    let w = r.witness.as_ref().unwrap();
    assert_eq!(w.stable.status, VerdictStatus::Converged);
    assert_ne!(w.unstable.status, VerdictStatus::Converged);
    assert!((w.stable_delta - r.limit).abs() < 1e-12);
    assert!((w.unstable_delta - r.limit - g).abs() < 1e-12);
    assert!(ensemble_converges(&sys, &c, r.limit, &dist, Plant::NonlinearOvm, &cfg.sim).unwrap());
    assert!(!ensemble_converges(&sys, &c, r.limit + g, &dist, Plant::NonlinearOvm, &cfg.sim).unwrap());
    for p in &r.search.probes {
        let k = p.delta / g;
        assert!((k - k.round()).abs() < 1e-9);
    }
}

#[test]
fn grid_and_scenario_defaults() {
    assert_eq!(HumanErrorKind::NonvanishingBound.default_grid()[0], 0.0);
    for kind in [HumanErrorKind::NonvanishingBound, HumanErrorKind::VanishingHoldLimit, HumanErrorKind::DelayHoldLimit] {
        let g = kind.default_grid();
        assert!(g.len() >= 5);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(HumanErrorKind::parse(kind.as_str()), Some(kind));
    }
    let cfg = RunConfig::default();
    for s in JointScenario::defaults() {
        let c = s.apply(&cfg).unwrap();
        assert!(c.ovm.s_st < c.ovm.s_go);
    }
    let mut alpha = SweepParam::Alpha.default_grid();
    alpha.retain(|v| (v - cfg.ovm.alpha).abs() < 1e-12);
    assert_eq!(alpha.len(), 1, "alpha grid should contain the default");
    assert!(SweepParam::parse("warp").is_none());
}

#[test]
fn stats_against_closed_forms() {
    let x = [1.0, 2.0, 3.0, 4.0, 5.0];
    let y = [2.0, 1.0, 4.0, 3.0, 5.0];
    // 1 - 6Σd²/(n(n²-1)) with d = (1, 1, 1, 1, 0).
    assert!((spearman(&x, &y) - (1.0 - 6.0 * 4.0 / 120.0)).abs() < 1e-12);
    let fit = linear_fit(&x, &x.map(|v| 3.0 * v - 1.0));
    assert!((fit.slope - 3.0).abs() < 1e-12 && (fit.intercept + 1.0).abs() < 1e-12);
    assert!((fit.r_squared - 1.0).abs() < 1e-12);
    assert!((spearman(&x, &x.map(|v| -v.exp())) + 1.0).abs() < 1e-12);
}

proptest! {
    #[test]
    fn grid_search_agrees_with_scan(
        lo_steps in 0usize..50,
        span_steps in 1usize..2000,
        g in prop::sample::select(vec![0.01, 0.02, 0.05, 0.1, 0.25]),
        frac in -0.2f64..1.2,
    ) {
        let range = (lo_steps as f64 * g, (lo_steps + span_steps) as f64 * g);
        let threshold = range.0 + frac * (range.1 - range.0);
        let mut calls = 0usize;
        let r = grid_search(range, g, |d| {
            calls += 1;
            Ok(if d <= threshold { ProbeResult::Stable } else { ProbeResult::Unstable })
        })
        .unwrap();
        let want = scan_limit(range, g, threshold);
        prop_assert!((r.limit - want).abs() < 1e-9, "got {} want {}", r.limit, want);
        prop_assert_eq!(r.probes.len(), calls);
        let n_points = span_steps as f64 + 1.0;
        prop_assert!(calls as f64 <= n_points.log2().ceil() + 3.0, "{} probes for {} points", calls, n_points);
        prop_assert_eq!(r.unstable_at_floor, r.limit == 0.0);
        prop_assert_eq!(r.failures, 0);
    }

    #[test]
    fn spearman_is_rank_invariant(v in prop::collection::vec(-100.0f64..100.0, 3..30), shift in -5.0f64..5.0) {
        let n = v.len();
        let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let a = spearman(&x, &v);
        let b = spearman(&x, &v.iter().map(|t| (t + shift).powi(3)).collect::<Vec<_>>());
        if a.is_finite() {
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!(a.abs() <= 1.0 + 1e-12);
        }
    }
}
