use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hecke-virt")).args(args).output().expect("spawn hecke-virt")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("JSON on stdout")
}

#[test]
fn cosets_examples() {
    let o = run(&["cosets", "--p", "2", "--sigma", "1,0,0,2"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["schema"], 1);
    assert_eq!(v["double_coset"]["degree"]["value"], 3);
    assert_eq!(v["double_coset"]["right_reps"].as_array().unwrap().len(), 3);

    let v = json(&run(&["cosets", "--p", "2", "--level", "gamma"]));
    assert_eq!(v["index"]["value"], 1);
    assert_eq!(v["transversal"], serde_json::json!([[[1, 0], [0, 1]]]));

    let v = json(&run(&["cosets", "--p", "3", "--sigma", "1,0,0,9"]));
    assert_eq!(v["double_coset"]["degree"]["value"], 12);

    let v = json(&run(&["cosets", "--p", "2", "--level", "gamma0:4"]));
    assert_eq!(v["index"]["value"], 6);
}

fn terms(v: &Value) -> Vec<(u64, i64)> {
    v["terms"].as_array().unwrap().iter().map(|t| (t["m"].as_u64().unwrap(), t["coeff"].as_i64().unwrap())).collect()
}

#[test]
fn hecke_mul_examples() {
    for p in [2i64, 3] {
        let ps = p.to_string();
        assert_eq!(terms(&json(&run(&["hecke-mul", "Tp", "Tp", "--p", &ps]))), vec![(0, p + 1), (2, 1)]);
        assert_eq!(terms(&json(&run(&["hecke-mul", "e", "Tp", "--p", &ps]))), vec![(1, 1)]);
        assert_eq!(terms(&json(&run(&["hecke-mul", "Tp", "Tp^2", "--p", &ps]))), vec![(1, p), (3, 1)]);
    }
}

#[test]
fn trace_identity_only() {
    let o = run(&["trace", "--n", "12", "--height", "0"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert!((v["value"][0].as_f64().unwrap() - 11.0 / 12.0).abs() < 1e-6);
}

#[test]
fn trace_hecke_eigenvalue() {
    let v = json(&run(&["trace", "--n", "12", "--sigma", "1,0,0,2", "--height", "60"]));
    let t = -24.0 * 2f64.powf(-5.5);
    let x = v["value"][0].as_f64().unwrap();
    assert!((x - t).abs() <= 0.01 * t.abs(), "{x}");
    assert_eq!(v["normalization"]["value"], 3);
}

#[test]
fn config_errors_exit_2() {
    for args in [
        vec!["trace", "--p", "4"],
        vec!["trace", "--n", "7"],
        vec!["trace", "--sigma", "1,0,0,3"],
        vec!["trace", "--level", "gamma0:6"],
        vec!["trace", "--quad-rel-tol", "0"],
        vec!["trace", "--y-max", "1"],
        vec!["matrix", "--galerkin-dim", "0"],
        vec!["trace", "--threads", "0"],
        vec!["hecke-mul", "Tq", "Tp"],
    ] {
        let o = run(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        let err = String::from_utf8(o.stderr).unwrap();
        assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    }
}

#[test]
fn budget_exit_3() {
    let o = run(&["matrix", "--level", "gamma0:64", "--height", "5", "--galerkin-dim", "4"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn tiny_height_fails_verification() {
    let o = run(&["verify", "--height", "1", "--galerkin-dim", "8"]);
    assert_eq!(o.status.code(), Some(4));
    let v = json(&o);
    let checks = v["checks"].as_array().unwrap();
    let idem = checks.iter().find(|c| c["name"] == "idempotency_gamma").unwrap();
    assert_eq!(idem["pass"], false);
    assert!(idem["residual"].as_f64().unwrap() > idem["budget"].as_f64().unwrap());
}

#[test]
fn threads_from_environment_and_out_file() {
    let dir = std::env::temp_dir().join(format!("hecke-virt-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("t.json");
    let o = Command::new(env!("CARGO_BIN_EXE_hecke-virt"))
        .args(["trace", "--height", "10", "--out", path.to_str().unwrap()])
        .env("HECKE_VIRT_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let a = std::fs::read(&path).unwrap();
    let b = run(&["trace", "--height", "10", "--threads", "1"]).stdout;
    assert_eq!(a, b);
    std::fs::remove_dir_all(&dir).ok();
}
