use std::path::Path;
use std::process::{Command, Output};

use wigglehair::export::validate_certificate_json;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wigglehair"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().expect("spawn wigglehair")
}

fn calibrated(dir: &Path) {
    let o = run(&["calibrate", "--out", "model.json"], dir);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["frobnicate"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["hair", "--depth", "x"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["render", "--size", "0x4", "--out", "a.ppm"], dir.path()).status.code(), Some(2));
}

#[test]
fn model_free_suites_pass() {
    let dir = tempfile::tempdir().unwrap();
    for suite in ["geometry", "tract"] {
        let o = run(&["verify", "--no-model", "--suite", suite], dir.path());
        assert!(o.status.success(), "{suite}: {}", String::from_utf8_lossy(&o.stderr));
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        let checks = v["checks"].as_array().unwrap();
        assert!(!checks.is_empty());
        for c in checks {
            assert!(c["id"].as_str().unwrap().starts_with(suite), "{c}");
            assert_eq!(c["passed"], true, "{c}");
        }
    }
}

#[test]
fn bad_kappa_fails_verify() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), r#"{"quadrature": {"kappa": 0.3}}"#).unwrap();
    let o = run(&["--config", "bad.json", "verify", "--no-model", "--suite", "cauchy"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let failed: Vec<&str> = v["checks"].as_array().unwrap().iter().filter(|c| c["passed"] == false).map(|c| c["id"].as_str().unwrap()).collect();
    assert!(failed.contains(&"cauchy.continuity"));
}

#[test]
fn artifacts_roundtrip_and_validate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    calibrated(d);

    // exporting a loaded model reproduces the file
    let o = run(&["--model", "model.json", "export", "model"], d);
    assert!(o.status.success());
    assert_eq!(o.stdout, std::fs::read(d.join("model.json")).unwrap());

    let o = run(&["--model", "model.json", "hair", "--address", "0,0,(1)", "--samples", "25", "--out", "hair.csv"], d);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(d.join("hair.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("param,re,im,depth,err"));
    assert_eq!(lines.count(), 25);

    let o = run(&["--model", "model.json", "certify", "--address", "(1,-1)", "--param", "1e50", "--levels", "4", "--out", "cert.json"], d);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let cert: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("cert.json")).unwrap()).unwrap();
    validate_certificate_json(&cert).unwrap();
    assert_eq!(cert["levels"].as_array().unwrap().len(), 4);

    let o = run(&["--model", "model.json", "export", "cert", "--format", "csv"], d);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn boundary_dump_columns() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["tract", "dump-boundary", "--tmax", "4", "--step", "0.5", "--out", "b.csv"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("b.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,re,im,tangent_re,tangent_im"));
    assert_eq!(csv.lines().count(), 1 + 17);
    assert!(csv.lines().skip(1).all(|l| l.split(',').count() == 5));
}

#[test]
fn eval_oracle_json() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["eval", "--re", "1", "--im", "0.5", "--oracle", "ps"], dir.path());
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let re = v["f"]["value"][0].as_f64().unwrap();
    let im = v["f"]["value"][1].as_f64().unwrap();
    let z = wigglehair::C64::new(1.0, 0.5);
    let ee = z.exp().exp();
    let bound = v["f_tilde_bound"].as_f64().unwrap();
    assert!(((re - ee.re).powi(2) + (im - ee.im).powi(2)).sqrt() <= bound);
}

#[test]
fn verify_and_render_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    calibrated(d);
    for i in 0..2 {
        let o = run(&["--model", "model.json", "--seed", "3", "verify", "--out", &format!("v{i}.json")], d);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let o = run(&["--model", "model.json", "render", "--size", "64x32", "--overlay", "(0)", "--out", &format!("r{i}.ppm")], d);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for (a, b) in [("v0.json", "v1.json"), ("r0.ppm", "r1.ppm"), ("r0.ppm.json", "r1.ppm.json")] {
        assert_eq!(std::fs::read(d.join(a)).unwrap(), std::fs::read(d.join(b)).unwrap(), "{a} vs {b}");
    }
    // thread count does not change the image
    let o = run(&["--model", "model.json", "--threads", "1", "render", "--size", "64x32", "--overlay", "(0)", "--out", "r2.ppm"], d);
    assert!(o.status.success());
    assert_eq!(std::fs::read(d.join("r0.ppm")).unwrap(), std::fs::read(d.join("r2.ppm")).unwrap());
}
