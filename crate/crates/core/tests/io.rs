use proptest::prelude::*;

use ringhold::config::RunConfig;
use ringhold::error::Error;
use ringhold::h2_synth::H2Weights;
use ringhold::io::{
    fmt_f64, format_controller, format_matrix, parse_controller, parse_matrix, provenance_header, trajectory_csv,
    ControllerFile,
};
use ringhold::linalg::{Mat, Vector};
use ringhold::ring_model::{build_system, Controller, GuidanceKind, OvmParams, Provenance};
use ringhold::simulator::{simulate, DisturbanceModel, Plant, SimConfig};

fn significant_digits(s: &str) -> usize {
    let mant = s.split('e').next().unwrap();
    let digits: String = mant.chars().filter(|c| c.is_ascii_digit()).collect();
    let digits = digits.trim_start_matches('0');
    if mant.contains('.') {
        digits.len()
    } else {
        digits.trim_end_matches('0').len()
    }
}

#[test]
fn fmt_f64_examples() {
    assert_eq!(fmt_f64(0.0), "0");
    assert_eq!(fmt_f64(1.5), "1.5");
    assert_eq!(fmt_f64(-2.0), "-2");
    assert_eq!(fmt_f64(1.0 / 3.0), "0.3333333333");
    assert_eq!(fmt_f64(400.0), "400");
    assert_eq!(fmt_f64(f64::NAN), "nan");
    assert_eq!(fmt_f64(f64::INFINITY), "inf");
    assert_eq!(fmt_f64(1.23e-9), "1.23e-9");
}

#[test]
fn provenance_header_lines() {
    let cfg = RunConfig::default();
    let h = provenance_header(&cfg.hash(), 9);
    let lines: Vec<&str> = h.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("# ringhold "));
    assert_eq!(lines[1], format!("# config_hash {}", cfg.hash()));
    assert_eq!(lines[2], "# rng_seed 9");
    assert_eq!(cfg.hash().len(), 64);
}

#[test]
fn matrix_parse_errors() {
    assert!(matches!(parse_matrix(""), Err(Error::EmptyInput(_))));
    assert!(matches!(parse_matrix("2 2\n1 2\n3\n"), Err(Error::Parse { line: 3, .. })));
    assert!(parse_matrix("1 1\n1\n2\n").is_err());
    assert!(parse_matrix("1 1\nx\n").is_err());
    assert!(parse_matrix("1 1\ninf\n").is_err());
    assert!(parse_matrix("99999 99999\n").is_err());
    let m = parse_matrix("# comment\n2 1\n\n1.5\n# mid\n-2\n").unwrap();
    assert_eq!(m, Mat::from_row_slice(2, 1, &[1.5, -2.0]));
}

#[test]
fn controller_parse_errors() {
    assert!(parse_controller("# provenance: h2\n").is_err());
    assert!(parse_controller("1 2 3\n").is_err());
    assert!(parse_controller("1 2\n3 4\n").is_err());
    assert!(parse_controller("# provenance: magic\n1 2\n").is_err());
    assert!(parse_controller("# k_mult: -1\n1 2\n").is_err());
    assert!(parse_controller("# gamma_s: 1\n1 2\n").is_err());
    assert!(parse_controller("# colour: blue\n1 2\n").is_err());
    let f = parse_controller("# stray comment\n# k_mult: 0.5\n1 -2\n").unwrap();
    assert_eq!(f.controller.k_mult, 0.5);
    assert_eq!(f.controller.provenance, Provenance::Manual);
    assert_eq!(f.controller.k.as_slice(), &[1.0, -2.0]);
}

#[test]
fn config_rejects_bad_text() {
    for bad in [
        "gamma = 1",
        "[ovm]\nrng_seed = 1",
        "[ovm\nL = 1",
        "n = 1",
        "n = -3",
        "s_st = 40\ns_go = 30",
        "aeb = maybe",
        "guidance = sideways",
        "bernoulli_p = 1.5",
        "search_min = 5\nsearch_max = 4",
        "granularity = 0.001",
        "d_margin = 1",
        "L = inf",
    ] {
        assert!(RunConfig::parse(bad).is_err(), "accepted {bad:?}");
    }
    let cfg = RunConfig::parse("[sim]\naeb = off\n[theory]\nd_v_bar = auto\n").unwrap();
    assert!(!cfg.sim.aeb);
    assert_eq!(cfg.d_v_bar, None);
}

#[test]
fn trajectory_csv_layout() {
    let p = OvmParams { n: 3, l: 60.0, ..Default::default() };
    let sys = build_system(&p, GuidanceKind::PiecewiseAcceleration).unwrap();
    let cfg = SimConfig { total_time: 0.05, ..Default::default() };
    let t = simulate(&sys, &Controller::zero(6), 0.02, &DisturbanceModel::default(), Plant::NonlinearOvm, &cfg, 0)
        .unwrap();
    let csv = trajectory_csv(&t, "# h\n");
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "# h");
    assert_eq!(lines[1], "t,s1,v1,s2,v2,s3,v3,u,event");
    assert_eq!(lines.len(), 2 + 6);
    for l in &lines[2..] {
        assert_eq!(l.split(',').count(), 9);
    }
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e6f64..1e6,
        (-300i32..300, -1.0f64..1.0).prop_map(|(e, m)| m * 10f64.powi(e)),
        Just(0.0),
    ]
}

proptest! {
    #[test]
    fn fmt_f64_keeps_ten_significant_digits(x in finite()) {
        let s = fmt_f64(x);
        prop_assert!(significant_digits(&s) <= 10, "{s}");
        let back: f64 = s.parse().unwrap();
        prop_assert!((back - x).abs() <= 5e-10 * x.abs(), "{x} -> {s}");
        // Formatting is idempotent after one round.
        prop_assert_eq!(fmt_f64(back), s);
    }

    #[test]
    fn matrix_text_roundtrips_exactly(r in 0usize..6, c in 0usize..6, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let m = Mat::from_fn(r, c, |_, _| {
            let e: i32 = rng.random_range(-200..200);
            rng.random_range(-1.0..1.0) * 10f64.powi(e)
        });
        let back = parse_matrix(&format_matrix(&m)).unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn controller_text_roundtrips_exactly(
        gains in prop::collection::vec(finite(), 1..20),
        k_mult in 0.0f64..5.0,
        weights in prop::option::of((1e-3f64..10.0, 1e-3f64..10.0, 1e-3f64..10.0)),
        note in prop::option::of("[a-z0-9 =.]{0,20}"),
        prov in prop::sample::select(vec![Provenance::H2, Provenance::LkSynthesized, Provenance::Manual]),
    ) {
        let mut k = gains.clone();
        if k.len() % 2 == 1 {
            k.push(0.5);
        }
        let file = ControllerFile {
            controller: Controller { k: Vector::from_vec(k), k_mult, provenance: prov },
            weights: weights.map(|(gamma_s, gamma_v, gamma_u)| H2Weights { gamma_s, gamma_v, gamma_u }),
            note: note.map(|n| n.trim().to_string()),
        };
        let back = parse_controller(&format_controller(&file)).unwrap();
        prop_assert_eq!(back, file);
    }

    #[test]
    fn config_echo_is_a_fixed_point(
        l in 50.0f64..2000.0,
        n in 2usize..60,
        alpha in 0.05f64..3.0,
        beta in 0.05f64..3.0,
        gamma_u in 0.01f64..10.0,
        seed in any::<u64>(),
        aeb in any::<bool>(),
        velocity in any::<bool>(),
        d_v_bar in prop::option::of(0.1f64..10.0),
    ) {
        let text = format!(
            "[ovm]\nL = {l}\nn = {n}\nalpha = {alpha}\nbeta = {beta}\nguidance = {}\n\
             [control]\ngamma_u = {gamma_u}\n[sim]\nrng_seed = {seed}\naeb = {aeb}\n[theory]\nd_v_bar = {}\n",
            if velocity { "velocity" } else { "acceleration" },
            d_v_bar.map_or("auto".to_string(), |v| v.to_string()),
        );
        let cfg = RunConfig::parse(&text).unwrap();
        prop_assert_eq!(cfg.ovm.alpha, alpha);
        prop_assert_eq!(cfg.sim.rng_seed, seed);
        let once = RunConfig::parse(&cfg.echo()).unwrap();
        let twice = RunConfig::parse(&once.echo()).unwrap();
        prop_assert_eq!(once.echo(), twice.echo());
        prop_assert_eq!(once.hash(), twice.hash());
        prop_assert_eq!(once.sim.rng_seed, seed);
        prop_assert_eq!(once.ovm.n, n);
        prop_assert!((once.ovm.beta - beta).abs() <= 5e-10 * beta);
    }

    #[test]
    fn config_rejects_unknown_keys(key in "[a-z_]{1,12}") {
        let known = RunConfig::default().echo();
        prop_assume!(!known.lines().any(|l| l.split('=').next().unwrap().trim() == key));
        prop_assume!(key != "lmi_box");
        let r = RunConfig::parse(&format!("{key} = 1\n"));
        prop_assert!(
            matches!(r, Err(Error::Parse { line: 1, .. })),
            "unknown key '{}' was not a line-1 parse error",
            key
        );
    }
}
