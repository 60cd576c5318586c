use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ringhold::config::RunConfig;
use ringhold::io::parse_controller;

fn ringhold(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ringhold"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn listing(dir: &Path) -> BTreeSet<String> {
    fs::read_dir(dir)
        .map(|it| it.map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect())
        .unwrap_or_default()
}

fn value(csv: &str, name: &str) -> String {
    csv.lines()
        .find_map(|l| l.strip_prefix(&format!("{name},")))
        .unwrap_or_else(|| panic!("{name} missing from\n{csv}"))
        .to_string()
}

/// Header lines every output file starts with, for the config echoed in `out`.
fn assert_headers(out: &Path) {
    let echo = fs::read_to_string(out.join("config.ini")).unwrap();
    let hash = RunConfig::parse(&echo).unwrap().hash();
    for name in listing(out) {
        let text = fs::read_to_string(out.join(&name)).unwrap();
        let head: Vec<&str> = text.lines().take(3).collect();
        assert!(head[0].starts_with("# ringhold "), "{name}: {:?}", head[0]);
        assert_eq!(head[1], format!("# config_hash {hash}"), "{name}");
        assert!(head[2].starts_with("# rng_seed "), "{name}");
    }
}

const SMALL: &str = "[ovm]\nn = 4\nL = 80\n[sim]\nn_seeds = 3\ntotal_time = 60\n";

#[test]
fn usage_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&ringhold(&[], tmp.path())), 2);
    assert_eq!(code(&ringhold(&["frobnicate"], tmp.path())), 2);
    assert_eq!(code(&ringhold(&["simulate"], tmp.path())), 2);
    assert_eq!(code(&ringhold(&["simulate", "--delta", "abc"], tmp.path())), 2);
    assert_eq!(code(&ringhold(&["--help"], tmp.path())), 0);
    assert_eq!(code(&ringhold(&["sweep", "--param", "warp", "--out", "o"], tmp.path())), 2);
    assert!(listing(tmp.path()).is_empty(), "usage errors wrote {:?}", listing(tmp.path()));
}

#[test]
fn bad_inputs_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("bad.ini"), "[ovm]\nwarp = 9\n").unwrap();
    fs::write(dir.join("bad_ctrl.txt"), "1 2 3\n").unwrap();
    fs::write(dir.join("short_ctrl.txt"), "1 2\n").unwrap();
    let o = ringhold(&["certify-lyap", "--config", "bad.ini", "--out", "o1"], dir);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    assert_eq!(code(&ringhold(&["certify-lyap", "--config", "missing.ini", "--out", "o2"], dir)), 2);
    assert_eq!(code(&ringhold(&["certify-lyap", "--controller", "bad_ctrl.txt", "--out", "o3"], dir)), 2);
    assert_eq!(code(&ringhold(&["certify-lyap", "--controller", "short_ctrl.txt", "--out", "o4"], dir)), 2);
    assert_eq!(code(&ringhold(&["certify-lyap", "--controller", "nope.txt", "--out", "o5"], dir)), 2);
}

#[test]
fn invalid_hold_length_fails_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let o = ringhold(&["simulate", "--delta", "0.001", "--out", "o"], tmp.path());
    assert_eq!(code(&o), 1);
    assert!(!String::from_utf8_lossy(&o.stderr).contains("panicked"));
}

#[test]
fn synth_h2_then_reuse_the_controller() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let o = ringhold(&["synth-h2", "--out", "h2"], dir);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(listing(dir), BTreeSet::from(["h2".to_string()]));
    assert_eq!(listing(&dir.join("h2")), BTreeSet::from(["config.ini".into(), "controller.txt".into()]));
    assert_headers(&dir.join("h2"));
    let file = parse_controller(&fs::read_to_string(dir.join("h2/controller.txt")).unwrap()).unwrap();
    assert_eq!(file.controller.k.len(), 40);
    assert!(file.weights.is_some());

    let a = ringhold(&["certify-lyap", "--out", "lyap_default"], dir);
    let b = ringhold(&["certify-lyap", "--controller", "h2/controller.txt", "--out", "lyap_file"], dir);
    assert_eq!((code(&a), code(&b)), (0, 0));
    let ya = fs::read_to_string(dir.join("lyap_default/lyapunov.csv")).unwrap();
    let yb = fs::read_to_string(dir.join("lyap_file/lyapunov.csv")).unwrap();
    let bound: f64 = value(&ya, "delta_bound").parse().unwrap();
    assert!((6.8e-4..=1.9e-3).contains(&bound), "{bound}");
    assert_eq!(value(&ya, "delta_bound"), value(&yb, "delta_bound"));
    assert_headers(&dir.join("lyap_file"));
}

#[test]
fn simulate_writes_trajectory_and_verdict() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("small.ini"), SMALL).unwrap();
    let run = |threads: &str, out: &str, delta: &str| {
        let o = ringhold(
            &["--threads", threads, "simulate", "--config", "small.ini", "--delta", delta, "--out", out],
            dir,
        );
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    };
    run("1", "a", "0.5");
    run("2", "b", "0.5");
    for f in ["trajectory.csv", "verdict.csv", "config.ini"] {
        assert_eq!(fs::read(dir.join("a").join(f)).unwrap(), fs::read(dir.join("b").join(f)).unwrap(), "{f}");
    }
    assert_headers(&dir.join("a"));
    let traj = fs::read_to_string(dir.join("a/trajectory.csv")).unwrap();
    let rows: Vec<&str> = traj.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "t,s1,v1,s2,v2,s3,v3,s4,v4,u,event");
    assert_eq!(rows.len(), 1 + 6001);
    let verdict = fs::read_to_string(dir.join("a/verdict.csv")).unwrap();
    assert_eq!(value(&verdict, "n_runs"), "3");
}

#[test]
fn long_hold_is_not_converged() {
    let tmp = tempfile::tempdir().unwrap();
    let o = ringhold(&["simulate", "--delta", "2.29", "--out", "o"], tmp.path());
    assert_eq!(code(&o), 0);
    let verdict = fs::read_to_string(tmp.path().join("o/verdict.csv")).unwrap();
    assert_ne!(value(&verdict, "status"), "converged");
    assert_eq!(value(&verdict, "n_runs"), "50");
}

#[test]
fn lk_and_hinf_on_small_ring() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("small.ini"), SMALL).unwrap();
    let o = ringhold(&["certify-lk", "--config", "small.ini", "--delta", "0.01", "--dump-lmi", "--out", "lk"], dir);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let lk = fs::read_to_string(dir.join("lk/lk.csv")).unwrap();
    assert_eq!(value(&lk, "status"), "feasible");
    assert!(dir.join("lk/lmi_dump.txt").exists());
    assert_headers(&dir.join("lk"));

    let o = ringhold(
        &["certify-hinf", "--config", "small.ini", "--delta", "0.01", "--gamma", "10000", "--out", "hinf"],
        dir,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let h = fs::read_to_string(dir.join("hinf/hinf.csv")).unwrap();
    assert_eq!(value(&h, "status"), "feasible");

    let o = ringhold(&["certify-lk", "--config", "small.ini", "--delta", "10", "--out", "lk10"], dir);
    assert_eq!(code(&o), 0);
    let lk = fs::read_to_string(dir.join("lk10/lk.csv")).unwrap();
    assert_eq!(value(&lk, "status"), "infeasible");
}

#[test]
fn sweep_accepts_explicit_values() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("small.ini"), SMALL).unwrap();
    let o = ringhold(&["sweep", "--config", "small.ini", "--param", "beta", "--values", "0.8,1.2", "--out", "s"], dir);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.join("s/sweep_beta.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("beta,0.8,"));
    assert!(rows[2].starts_with("beta,1.2,"));
    assert_headers(&dir.join("s"));
}
