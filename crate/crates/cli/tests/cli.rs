use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const H: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_weakval"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

struct Files {
    _dir: TempDir,
    psi: PathBuf,
    plus: PathBuf,
    zero: PathBuf,
    one: PathBuf,
    z: PathBuf,
    x: PathBuf,
    bell: PathBuf,
    werner: PathBuf,
}

fn files() -> Files {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let psi = write(d, "psi.json", r#"{"kind":"pure","dims":[2],"data":[[0.6,0],[0,0.8]]}"#);
    let plus = write(d, "plus.json", &format!(r#"{{"kind":"pure","dims":[2],"data":[[{H},0],[{H},0]]}}"#));
    let zero = write(d, "zero.json", r#"{"kind":"pure","dims":[2],"data":[[1,0],[0,0]]}"#);
    let one = write(d, "one.json", r#"{"kind":"pure","dims":[2],"data":[[0,0],[1,0]]}"#);
    let z = write(d, "z.json", r#"{"kind":"observable","dims":[2],"data":[[1,0],[0,0],[0,0],[-1,0]]}"#);
    let x = write(d, "x.json", r#"{"kind":"observable","dims":[2],"data":[[0,0],[1,0],[1,0],[0,0]]}"#);
    let bell = write(d, "bell.json", &format!(r#"{{"kind":"pure","dims":[2,2],"data":[[{H},0],[0,0],[0,0],[{H},0]]}}"#));
    // Werner state at p = 0.8 with the singlet
    let (a, b) = ((1.0 - 0.8) / 4.0, 0.8 / 2.0);
    let werner = write(
        d,
        "werner.json",
        &format!(
            r#"{{"kind":"mixed","dims":[2,2],"data":[[{a},0],[0,0],[0,0],[0,0],[0,0],[{},0],[{},0],[0,0],[0,0],[{},0],[{},0],[0,0],[0,0],[0,0],[0,0],[{a},0]]}}"#,
            a + b,
            -b,
            -b,
            a + b
        ),
    );
    Files { _dir: dir, psi, plus, zero, one, z, x, bell, werner }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid json")
}

fn complex(v: &Value) -> (f64, f64) {
    (v[0].as_f64().unwrap(), v[1].as_f64().unwrap())
}

#[test]
fn weak_value_check_passes() {
    let f = files();
    let out = run(&["weak-value", "--pre", s(&f.psi), "--post", s(&f.plus), "--observable", s(&f.z), "--check", "--format", "json"]);
    let v = json(&out);
    let (re, im) = complex(&v["weak_value"]);
    assert!((re + 0.28).abs() < 1e-12 && (im + 0.96).abs() < 1e-12);
    assert!(v["abs_diff"].as_f64().unwrap() < 1e-12);
}

#[test]
fn moment_check_prints_both_values() {
    let f = files();
    let out = run(&["moment", "--pre", s(&f.psi), "--post", s(&f.plus), "--observable", s(&f.z), "--n", "4", "--check"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("moment_recursive") && text.contains("moment_direct") && text.contains("abs_diff"));
}

#[test]
fn orthogonal_postselection_exits_3() {
    let f = files();
    let out = run(&["weak-value", "--pre", s(&f.zero), "--post", s(&f.one), "--observable", s(&f.x)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn invalid_input_exits_2() {
    let f = files();
    let bad = write(f.psi.parent().unwrap(), "bad.json", r#"{"kind":"pure","dims":[2],"data":[[1,0],[1,0]]}"#);
    let out = run(&["weak-value", "--pre", s(&bad), "--post", s(&f.plus), "--observable", s(&f.z)]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["weak-value", "--pre", "/nonexistent.json", "--post", s(&f.plus), "--observable", s(&f.z)]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["weak-value", "--pre", s(&f.psi), "--post", s(&f.plus), "--observable", s(&f.z), "--tol", "-1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["demo", "--suite", "nope"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn product_local_matches_direct() {
    let f = files();
    let out = run(&[
        "product", "--pre", s(&f.bell), "--observable", s(&f.z), "--observable-b", s(&f.x), "--post", s(&f.plus), "--post",
        s(&f.plus), "--check", "--format", "json",
    ]);
    let v = json(&out);
    assert!(v["abs_diff"].as_f64().unwrap() < 1e-12);
}

#[test]
fn tomo_bipartite_reports_fidelity() {
    let f = files();
    let v = json(&run(&["tomo-bipartite", "--hidden", s(&f.bell), "--format", "json"]));
    assert_eq!(v["scheme"], "bipartite-pure");
    assert!(v["fidelity"].as_f64().unwrap() > 1.0 - 1e-12);
    let v = json(&run(&["tomo-bipartite", "--hidden", s(&f.werner), "--format", "json"]));
    assert_eq!(v["scheme"], "bipartite-mixed");
    assert!(v["trace_distance"].as_f64().unwrap() < 1e-10);
}

#[test]
fn tomo_pure_and_mixed() {
    let f = files();
    for ops in ["moments", "basis-transfer", "cyclic"] {
        let v = json(&run(&["tomo-pure", "--hidden", s(&f.psi), "--ops", ops, "--format", "json"]));
        assert!(v["fidelity"].as_f64().unwrap() > 1.0 - 1e-12, "{ops}");
    }
    let v = json(&run(&["tomo-mixed", "--hidden", s(&f.psi), "--format", "json"]));
    assert!(v["trace_distance"].as_f64().unwrap() < 1e-10);
}

#[test]
fn entangle_family_and_files() {
    let f = files();
    let v = json(&run(&["entangle", "--family", "werner2", "--params", "0.8", "--format", "json"]));
    assert_eq!(v["violated"], true);
    let v = json(&run(&["entangle", "--family", "werner2", "--params", "0.2", "--format", "json"]));
    assert_eq!(v["violated"], false);
    let sx = write(f.psi.parent().unwrap(), "sx.json", r#"{"kind":"observable","dims":[2],"data":[[0,0],[0.5,0],[0.5,0],[0,0]]}"#);
    let v = json(&run(&[
        "entangle", "--pre", s(&f.werner), "--observable", s(&sx), "--observable-b", s(&sx), "--post", s(&f.one), "--post",
        s(&f.zero), "--format", "json",
    ]));
    assert_eq!(v["violated"], true);
    assert!(v["ppt_min_eigenvalue"].as_f64().unwrap() < 0.0);
}

#[test]
fn scan_finds_werner_threshold() {
    let v = json(&run(&["scan", "--family", "werner2", "--format", "json"]));
    assert!((v["detected_threshold"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-6);
    assert!((v["ppt_threshold"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-6);
}

#[test]
fn robust_reports_bound() {
    let f = files();
    let mixed = &f.werner;
    let z2 = write(
        f.psi.parent().unwrap(),
        "zz.json",
        r#"{"kind":"observable","dims":[4],"data":[[1,0],[0,0],[0,0],[0,0],[0,0],[-1,0],[0,0],[0,0],[0,0],[0,0],[-1,0],[0,0],[0,0],[0,0],[0,0],[1,0]]}"#,
    );
    let post = write(f.psi.parent().unwrap(), "p4.json", r#"{"kind":"pure","dims":[4],"data":[[0.5,0],[0.5,0],[0.5,0],[0.5,0]]}"#);
    let v = json(&run(&["robust", "--pre", s(mixed), "--observable", s(&z2), "--post", s(&post), "--format", "json"]));
    assert_eq!(v["observable error"]["satisfied"], true);
    assert!(v["noisy post-selection"]["remainder"].as_f64().is_some());
}

#[test]
fn demo_is_deterministic() {
    let a = run(&["demo"]);
    let b = run(&["demo"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = run(&["demo", "--seed", "7"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn demo_entanglement_suite() {
    let out = run(&["demo", "--suite", "entanglement", "--format", "json"]);
    let v = json(&out);
    let rows = v.as_array().unwrap();
    assert!(rows.len() >= 10);
    for row in rows {
        if let (Some(e), Some(d)) = (row["expected"].as_f64(), row["detected"].as_f64()) {
            assert!((e - d).abs() < 1e-6, "{row}");
        }
    }
}
