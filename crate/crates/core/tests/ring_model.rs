use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;

use ringhold::linalg::{eigenvalues, spectral_abscissa};
use ringhold::ring_model::{
    build_system, closed_loop, embed, equilibrium, optimal_velocity, optimal_velocity_slope, project, reduce,
    string_stability_margin, Controller, GuidanceKind, OvmParams, Provenance,
};

/// Independent transcription of the cosine optimal-velocity law.
fn v_ref(s: f64, p: &OvmParams) -> f64 {
    if s <= p.s_st {
        0.0
    } else if s >= p.s_go {
        p.v_max
    } else {
        0.5 * p.v_max * (1.0 - (PI * (s - p.s_st) / (p.s_go - p.s_st)).cos())
    }
}

fn fd_slope(s: f64, p: &OvmParams, h: f64) -> f64 {
    (v_ref(s + h, p) - v_ref(s - h, p)) / (2.0 * h)
}

/// Follower acceleration `α(V(s) - v) + β(v_prev - v)`.
fn follower_acc(s: f64, v: f64, v_prev: f64, p: &OvmParams) -> f64 {
    p.alpha * (v_ref(s, p) - v) + p.beta * (v_prev - v)
}

/// Jacobian of the physical ring dynamics at uniform flow by central differences.
fn fd_jacobian(p: &OvmParams) -> DMatrix<f64> {
    let n = p.n;
    let s_star = p.l / n as f64;
    let v_star = v_ref(s_star, p);
    let f = |x: &DVector<f64>| -> DVector<f64> {
        let mut out = DVector::zeros(2 * n);
        for i in 0..n {
            let prev = if i == 0 { n - 1 } else { i - 1 };
            let (s, v, vp) = (x[2 * i] + s_star, x[2 * i + 1] + v_star, x[2 * prev + 1] + v_star);
            out[2 * i] = vp - v;
            out[2 * i + 1] = if i == 0 { 0.0 } else { follower_acc(s, v, vp, p) };
        }
        out
    };
    let h = 1e-6;
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for c in 0..2 * n {
        let mut xp = DVector::zeros(2 * n);
        let mut xm = DVector::zeros(2 * n);
        xp[c] = h;
        xm[c] = -h;
        let col = (f(&xp) - f(&xm)) / (2.0 * h);
        j.set_column(c, &col);
    }
    j
}

fn params_strategy() -> impl Strategy<Value = OvmParams> {
    (
        2usize..12,
        1.0f64..8.0,
        10.0f64..30.0,
        0.0f64..1.0,
        10.0f64..40.0,
        0.2f64..1.2,
        0.2f64..2.0,
    )
        .prop_map(|(n, s_st, width, frac, v_max, alpha, beta)| {
            let s_go = s_st + width;
            let s_star = s_st + 0.05 * width + 0.9 * width * frac;
            OvmParams {
                l: s_star * n as f64,
                n,
                s_st,
                s_go,
                v_max,
                alpha,
                beta,
            }
        })
}

fn random_gain(dim: usize, seed: u64) -> Controller {
    let mut x = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let k = DVector::from_fn(dim, |_, _| {
        x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((x >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    });
    Controller::new(k, Provenance::Manual)
}

/// Greedy matching distance between two eigenvalue multisets of equal size.
fn spectrum_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for x in a {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, y)| (j, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .unwrap();
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}

#[test]
fn velocity_and_slope_examples() {
    let p = OvmParams::default();
    assert_eq!(optimal_velocity(5.0, &p), 0.0);
    assert!((optimal_velocity(20.0, &p) - 15.0).abs() < 1e-12);
    assert_eq!(optimal_velocity(35.0, &p), 30.0);
    assert_eq!(optimal_velocity_slope(4.0, &p), 0.0);
    let sl = optimal_velocity_slope(20.0, &p);
    assert!((sl - PI / 2.0).abs() < 1e-12);
    assert!((sl - fd_slope(20.0, &p, 1e-6)).abs() < 1e-6);
    let p60 = OvmParams { v_max: 60.0, ..p };
    assert!((optimal_velocity_slope(20.0, &p60) - PI).abs() < 1e-12);
    assert!((optimal_velocity_slope(20.0, &p60) - fd_slope(20.0, &p60, 1e-6)).abs() < 1e-6);
}

#[test]
fn velocity_law_on_dense_grid() {
    let p = OvmParams::default();
    let mut prev = f64::NEG_INFINITY;
    for i in 0..=10_000 {
        let s = -5.0 + 50.0 * i as f64 / 10_000.0;
        let v = optimal_velocity(s, &p);
        assert!((0.0..=p.v_max).contains(&v));
        assert!(v >= prev);
        if i > 0 {
            assert!(v - prev < 0.02, "jump at s = {s}");
        }
        assert!((v - v_ref(s, &p)).abs() < 1e-12);
        prev = v;
    }
    for i in 1..1000 {
        let s = p.s_st + (p.s_go - p.s_st) * i as f64 / 1000.0;
        assert!((optimal_velocity_slope(s, &p) - fd_slope(s, &p, 1e-6)).abs() < 1e-6);
    }
}

#[test]
fn equilibrium_examples() {
    let e = equilibrium(&OvmParams::default());
    assert!((e.s_star - 20.0).abs() < 1e-12);
    assert!((e.v_star - 15.0).abs() < 1e-12);
    assert!((e.a1 - 0.6 * PI / 2.0).abs() < 1e-12);
    assert!((e.a1 - 0.6 * fd_slope(20.0, &OvmParams::default(), 1e-6)).abs() < 1e-6);
    assert!((e.a2 - 1.5).abs() < 1e-12);
    assert!((e.a3 - 0.9).abs() < 1e-12);

    let jam = equilibrium(&OvmParams { l: 100.0, ..Default::default() });
    assert_eq!((jam.v_star, jam.a1), (0.0, 0.0));
    let free = equilibrium(&OvmParams { l: 700.0, ..Default::default() });
    assert_eq!((free.v_star, free.a1), (30.0, 0.0));
}

#[test]
fn margin_examples() {
    let m = string_stability_margin(&OvmParams::default());
    assert!((m - (2.4 - PI)).abs() < 1e-12);
    assert!(m < 0.0);
    let m = string_stability_margin(&OvmParams { beta: 2.0, ..Default::default() });
    assert!((m - (4.6 - PI)).abs() < 1e-12);
    let m = string_stability_margin(&OvmParams { l: 700.0, ..Default::default() });
    assert!((m - 2.4).abs() < 1e-12);
}

#[test]
fn acceleration_matrices_match_finite_difference_linearisation() {
    let p = OvmParams::default();
    let sys = build_system(&p, GuidanceKind::PiecewiseAcceleration).unwrap();
    let j = fd_jacobian(&p);
    assert!((&sys.a - &j).amax() < 1e-6, "max deviation {}", (&sys.a - &j).amax());
    // D1, D2 and B1 at the documented values.
    let d1 = sys.a.view((2, 2), (2, 2)).into_owned();
    let d2 = sys.a.view((2, 0), (2, 2)).into_owned();
    assert!((d1 - DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 0.9424777961, -1.5])).amax() < 1e-9);
    assert!((d2 - DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.9])).amax() < 1e-12);
    assert_eq!(sys.b[(1, 0)], 1.0);
    assert_eq!(sys.b.iter().filter(|v| **v != 0.0).count(), 1);
}

#[test]
fn velocity_guidance_blocks() {
    let sys = build_system(&OvmParams::default(), GuidanceKind::PiecewiseVelocity).unwrap();
    let c1 = sys.a.view((0, 0), (2, 2)).into_owned();
    assert!((c1 - DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 0.0, -1.5])).amax() < 1e-12);
    assert!((sys.b[(1, 0)] - 0.6).abs() < 1e-12);
}

#[test]
fn smallest_ring_layout() {
    let p = OvmParams { l: 40.0, n: 2, ..Default::default() };
    let sys = build_system(&p, GuidanceKind::PiecewiseAcceleration).unwrap();
    assert_eq!(sys.a.shape(), (4, 4));
    let e = equilibrium(&p);
    let expect = DMatrix::from_row_slice(
        4,
        4,
        &[0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, -1.0, 0.0, e.a3, e.a1, -e.a2],
    );
    assert!((&sys.a - expect).amax() < 1e-12);
}

#[test]
fn h2_closed_loop_is_hurwitz() {
    let sys = build_system(&OvmParams::default(), GuidanceKind::PiecewiseAcceleration).unwrap();
    let sol = ringhold::h2_synth::h2_controller(&sys, &Default::default(), &Default::default()).unwrap();
    let red = reduce(&sys, &sol.controller).unwrap();
    assert_eq!(red.a.shape(), (39, 39));
    assert!(spectral_abscissa(&red.closed_loop()) < 0.0);
    let zero = Controller::zero(sys.dim());
    assert_eq!(closed_loop(&sys, &zero).unwrap(), sys.a);
    let off = ringhold::ring_model::scale_controller(&sol.controller, 0.0).unwrap();
    assert_eq!(closed_loop(&sys, &off).unwrap(), sys.a);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn block_pattern_and_ring_conservation(p in params_strategy(), velocity in any::<bool>()) {
        let g = if velocity { GuidanceKind::PiecewiseVelocity } else { GuidanceKind::PiecewiseAcceleration };
        let sys = build_system(&p, g).unwrap();
        let n = p.n;
        for bi in 0..n {
            for bj in 0..n {
                let allowed = bi == bj || (bi > 0 && bj == bi - 1) || (bi == 0 && bj == n - 1);
                if !allowed {
                    prop_assert!(sys.a.view((2 * bi, 2 * bj), (2, 2)).amax() == 0.0);
                }
            }
        }
        let mut total = DVector::zeros(2 * n);
        for i in 0..n {
            total += sys.a.row(2 * i).transpose();
        }
        prop_assert!(total.amax() == 0.0);
    }

    #[test]
    fn linearisation_matches_finite_differences(p in params_strategy()) {
        let sys = build_system(&p, GuidanceKind::PiecewiseAcceleration).unwrap();
        prop_assert!((&sys.a - fd_jacobian(&p)).amax() < 1e-5);
    }

    #[test]
    fn reduced_dynamics_agree_with_full(p in params_strategy(), seed in any::<u64>(), xs in proptest::collection::vec(-10.0f64..10.0, 23)) {
        let sys = build_system(&p, GuidanceKind::PiecewiseAcceleration).unwrap();
        let c = random_gain(sys.dim(), seed);
        let red = reduce(&sys, &c).unwrap();
        let m = red.dim();
        let x_red = DVector::from_fn(m, |i, _| xs[i % xs.len()] * (1.0 + i as f64 / 7.0));
        let x = embed(&x_red);
        let spacing_sum: f64 = (0..p.n).map(|i| x[2 * i]).sum();
        prop_assert!(spacing_sum.abs() < 1e-9);
        prop_assert_eq!(project(&x), x_red.clone());
        let full = closed_loop(&sys, &c).unwrap() * &x;
        let reduced = red.closed_loop() * &x_red;
        let scale = 1.0 + full.amax();
        prop_assert!((project(&full) - reduced).amax() <= 1e-10 * scale);
    }

    #[test]
    fn reduction_drops_one_zero_mode(p in params_strategy()) {
        let sys = build_system(&p, GuidanceKind::PiecewiseAcceleration).unwrap();
        let red = reduce(&sys, &Controller::zero(sys.dim())).unwrap();
        let mut full = eigenvalues(&sys.a);
        let j = full
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .map(|(j, _)| j)
            .unwrap();
        prop_assert!(full[j].norm() < 1e-8);
        full.remove(j);
        let d = spectrum_distance(&full, &eigenvalues(&red.a));
        prop_assert!(d <= 1e-8, "spectrum distance {}", d);
    }
}
