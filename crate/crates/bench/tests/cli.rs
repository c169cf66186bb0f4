use std::path::PathBuf;

use ncopt::stationarity::stationarity_report;
use ncopt::{Setting, Vector};
use ncopt_bench::cli::run;
use ncopt_bench::problem::{split_point, ProblemFile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name).display().to_string()
}

fn ncopt(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(std::iter::once("ncopt").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn value(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.trim_start().strip_prefix('=')))
        .unwrap_or_else(|| panic!("no {key} in {text}"))
        .trim()
        .parse()
        .unwrap()
}

#[test]
fn params_examples() {
    let (code, out, _) = ncopt(&["params", "--algorithm", "admm-g", "-L", "1", "--h", "3I", "--margin", "1.1"]);
    assert_eq!(code, 0);
    let beta = value(&out, "beta");
    assert!((beta - 3.1457).abs() < 1e-4);
    let gamma = value(&out, "gamma");
    let mid = 13.0 * beta / (6.0 + beta + 13.0 * beta * beta);
    assert!((gamma - mid).abs() < 1e-6);
    assert!(value(&out, "tau") > 0.0);
    assert!(value(&out, "K") >= 1.0);

    let (code, out, _) =
        ncopt(&["params", "--algorithm", "admm-m", "-L", "1", "--sigma-n", "1", "--h", "3", "--margin", "1.000001"]);
    assert_eq!(code, 0);
    assert!((value(&out, "beta") - 18.0).abs() < 1e-3);

    let (code, _, err) = ncopt(&["params", "--algorithm", "admm-m", "-L", "1", "--h", "3"]);
    assert_eq!(code, 2, "{err}");

    let (code, out, _) = ncopt(&["params", "--algorithm", "prox-bcd", "-L", "1", "--h", "2,2", "--diam", "2"]);
    assert_eq!(code, 0);
    assert!(value(&out, "kappa6") == 4.0);
}

#[test]
fn params_violations_exit_3() {
    // no admissible gamma
    let (code, _, _) = ncopt(&["params", "--algorithm", "admm-g", "-L", "1", "--beta", "2"]);
    assert_eq!(code, 3);
    // admissible gamma but tau <= 0 from a tiny H
    let (code, _, err) =
        ncopt(&["params", "--algorithm", "admm-g", "-L", "1", "--h", "0.01", "--beta", "3", "--gamma", "0.3"]);
    assert_eq!(code, 3, "{err}");
    assert!(err.contains("tau"));
    let (code, _, _) = ncopt(&["params", "--algorithm", "admm-g", "-L=-1"]);
    assert_eq!(code, 3);
    let (code, _, _) = ncopt(&["params", "--algorithm", "admm-x", "-L", "1"]);
    assert_eq!(code, 2);
}

#[test]
fn check_stationary_point() {
    let (code, out, err) = ncopt(&[
        "check",
        "--problem",
        &data("convex_l1.json"),
        "--point",
        &data("convex_l1_solution.json"),
        "--setting",
        "2",
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(value(&out, "epsilon") <= 1e-8);
}

#[test]
fn check_matches_library_at_random_points() {
    let dir = tempfile::tempdir().unwrap();
    let file = ProblemFile::load(std::path::Path::new(&data("coupled_qp.json"))).unwrap();
    let p = file.build(Setting::Setting2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for trial in 0..10 {
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        let lam = vec![rng.random_range(-1.0..1.0)];
        let xp = dir.path().join(format!("x{trial}.json"));
        let lp = dir.path().join(format!("l{trial}.json"));
        std::fs::write(&xp, serde_json::to_string(&x).unwrap()).unwrap();
        std::fs::write(&lp, serde_json::to_string(&lam).unwrap()).unwrap();
        let (code, out, err) = ncopt(&[
            "check",
            "--problem",
            &data("coupled_qp.json"),
            "--point",
            xp.to_str().unwrap(),
            "--lambda",
            lp.to_str().unwrap(),
            "--setting",
            "2",
        ]);
        assert_eq!(code, 0, "{err}");
        let bx = split_point(&Vector::from_vec(x), p.dims()).unwrap();
        let rep = stationarity_report(&p, &bx, Some(&Vector::from_vec(lam)), None).unwrap();
        assert_eq!(out, rep.to_text());
    }
}

#[test]
fn check_errors() {
    // l1 blocks over the whole space are not Setting 1
    let (code, _, _) = ncopt(&[
        "check",
        "--problem",
        &data("convex_l1.json"),
        "--point",
        &data("convex_l1_solution.json"),
        "--setting",
        "1",
    ]);
    assert_eq!(code, 3);
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "[1, 2,").unwrap();
    let (code, _, err) =
        ncopt(&["check", "--problem", &data("convex_l1.json"), "--point", bad.to_str().unwrap(), "--setting", "2"]);
    assert_eq!(code, 2);
    assert!(err.contains("line"));
    std::fs::write(&bad, "[1, 2]").unwrap();
    let (code, _, _) =
        ncopt(&["check", "--problem", &data("convex_l1.json"), "--point", bad.to_str().unwrap(), "--setting", "2"]);
    assert_eq!(code, 2);
    let (code, _, _) =
        ncopt(&["check", "--problem", "/nonexistent.json", "--point", bad.to_str().unwrap(), "--setting", "2"]);
    assert_eq!(code, 2);
}

#[test]
fn solve_drivers() {
    for alg in ["admm-g", "admm-m"] {
        let (code, out, err) =
            ncopt(&["solve", "--problem", &data("coupled_qp.json"), "--algorithm", alg, "--setting", "2", "--eps", "1e-20"]);
        assert_eq!(code, 0, "{err}");
        assert!(value(&out, "epsilon") <= 1e-6, "{out}");
    }
    let dir = tempfile::tempdir().unwrap();
    let sol = dir.path().join("sol.json");
    let (code, out, _) = ncopt(&[
        "solve",
        "--problem",
        &data("convex_l1.json"),
        "--algorithm",
        "prox-bcd",
        "--setting",
        "2",
        "--eps",
        "1e-24",
        "--out",
        sol.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(value(&out, "epsilon") <= 1e-8);
    let written: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&sol).unwrap()).unwrap();
    let x: Vec<f64> = serde_json::from_value(written["x"].clone()).unwrap();
    for (a, b) in x.iter().zip([0.5, 0.0, 2.0]) {
        assert!((a - b).abs() <= 1e-8);
    }
    let (code, _, _) =
        ncopt(&["solve", "--problem", &data("convex_l1.json"), "--algorithm", "bcd", "--setting", "2"]);
    assert_eq!(code, 3);
    // conditional gradient needs a single block
    let (code, _, _) =
        ncopt(&["solve", "--problem", &data("convex_l1.json"), "--algorithm", "gcg", "--setting", "2"]);
    assert_eq!(code, 3);
}

#[test]
fn solve_gcg_on_a_ball() {
    let dir = tempfile::tempdir().unwrap();
    let prob = dir.path().join("ball.json");
    std::fs::write(
        &prob,
        r#"{"dims": [2], "q": [[1, 0], [0, 1]], "c": [-3, -4],
            "blocks": [{"reg": {"kind": "l1", "alpha": 0.1}, "set": {"kind": "ball", "radius": 1}}]}"#,
    )
    .unwrap();
    let (code, out, err) =
        ncopt(&["solve", "--problem", prob.to_str().unwrap(), "--algorithm", "gcg", "--setting", "1", "--eps", "1e-8"]);
    assert_eq!(code, 0, "{err}");
    assert!(value(&out, "iterations") >= 1.0);
}

fn write_config(dir: &tempfile::TempDir, name: &str, body: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p.display().to_string()
}

const SMALL: &str = r#"{"algorithm": ["admm-g", "prox-bcd"], "dims": [6, 7, 8], "R_cp": [2], "R_init_rule": "plus1",
  "num_instances": 3, "max_iters": 300, "base_seed": 11}"#;

#[test]
fn bench_rpca_is_deterministic_and_writes_out() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir, "small.json", SMALL);
    let outp = dir.path().join("out.csv");
    let (c1, a, err) = ncopt(&["bench-rpca", &cfg, "--jobs", "1", "--out", outp.to_str().unwrap()]);
    assert_eq!(c1, 0, "{err}");
    let (c2, b, _) = ncopt(&["bench-rpca", &cfg, "--jobs", "2"]);
    assert_eq!(c2, 0);
    assert_eq!(a, b);
    assert_eq!(std::fs::read_to_string(&outp).unwrap(), a);
    let lines: Vec<&str> = a.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(lines[0], "algorithm,I1,I2,I3,Rcp,Rinit,iter_mean,err_mean,num_success");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("admm-g,6,7,8,2,3,"));
    assert!(lines[2].starts_with("prox-bcd,6,7,8,2,3,"));
    assert!(a.lines().next().unwrap().starts_with("# seeds: 11..=13"));
    let (_, c, _) = ncopt(&["bench-rpca", &cfg, "--seed", "12"]);
    assert_ne!(a, c);
    assert!(c.starts_with("# seeds: 12..=14"));
}

#[test]
fn bench_rpca_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write_config(
        &dir,
        "empty.json",
        r#"{"algorithm": "admm-g", "dims": [6, 7, 8], "R_cp": 2, "num_instances": 0}"#,
    );
    let (code, out, _) = ncopt(&["bench-rpca", &empty]);
    assert_eq!(code, 0);
    let body: Vec<&str> = out.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body, vec!["algorithm,I1,I2,I3,Rcp,Rinit,iter_mean,err_mean,num_success"]);

    let bad = write_config(&dir, "bad.json", "{\n  \"algorithm\": \"admm-g\",\n  \"dims\": [6, 7, 8],\n  \"R_cp\": 2,\n  \"extra\": 1\n}");
    let (code, _, err) = ncopt(&["bench-rpca", &bad]);
    assert_eq!(code, 2);
    assert!(err.contains("line 5"), "{err}");

    let gcg = write_config(&dir, "gcg.json", r#"{"algorithm": "gcg", "dims": [6, 7, 8], "R_cp": 2}"#);
    assert_eq!(ncopt(&["bench-rpca", &gcg]).0, 3);
    let pen = write_config(&dir, "pen.json", r#"{"algorithm": ["admm-g", "penalty"], "dims": [6, 7, 8], "R_cp": 2}"#);
    assert_eq!(ncopt(&["bench-rpca", &pen]).0, 3);
    assert_eq!(ncopt(&["bench-rpca", "/nonexistent.json"]).0, 2);
    assert_eq!(ncopt(&["bench-rpca"]).0, 2);
}

#[test]
fn help_exits_zero() {
    let (code, out, _) = ncopt(&["--help"]);
    assert_eq!(code, 0);
    for sub in ["bench-rpca", "params", "check", "solve"] {
        assert!(out.contains(sub));
    }
}
