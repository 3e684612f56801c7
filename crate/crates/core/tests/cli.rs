use std::path::Path;
use std::process::{Command, Output};

fn vwl(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vwl")).args(args).current_dir(dir).output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) {
    std::fs::write(dir.join("c.json"), body).unwrap();
}

#[test]
fn trivial_extreme_from_config() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), r#"{"gamma":{"kind":"poly","coeffs":[-1.0],"B":1.0}}"#);
    let out = vwl(&["--config", "c.json", "--out", "o", "laminar", "extreme"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["result"]["stagnation_points"], 128);
    assert!((doc["result"]["Q"].as_f64().unwrap() - 2.0 * 2f64.sqrt()).abs() < 1e-12);
    let csv = std::fs::read_to_string(dir.path().join("o/laminar.csv")).unwrap();
    assert!(csv.starts_with("# g,B,L,F,Q,Nx,Ny"));
}

#[test]
fn outputs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = |o: &'static str| vec!["--seed", "11", "--out", o, "theta", "solve"];
    write_config(dir.path(), r#"{"gamma":{"kind":"poly","coeffs":[0],"B":1},"params":{"init":"random","nodes":256,"x_min":1e-3,"x_max":1e3}}"#);
    let mut a = args("a");
    a.splice(0..0, ["--config", "c.json"]);
    let mut b = args("b");
    b.splice(0..0, ["--config", "c.json"]);
    let ra = vwl(&a, dir.path());
    let rb = vwl(&b, dir.path());
    assert!(ra.status.success(), "{}", String::from_utf8_lossy(&ra.stderr));
    let strip = |o: &Output| String::from_utf8_lossy(&o.stdout).replace("a/theta.csv", "").replace("b/theta.csv", "");
    assert_eq!(strip(&ra), strip(&rb));
    for f in ["theta.csv", "theta_log.json"] {
        assert_eq!(std::fs::read(dir.path().join("a").join(f)).unwrap(), std::fs::read(dir.path().join("b").join(f)).unwrap());
    }
}

#[test]
fn schema_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), r#"{"g": 1.0}"#);
    let out = vwl(&["--config", "c.json", "vort", "qbound"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`gamma`"));
    let out = vwl(&["--grid", "12", "theta", "quad"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failing_check_sets_its_category() {
    let dir = tempfile::tempdir().unwrap();
    // gamma = 1 violates the hypotheses for a bounded branch
    write_config(dir.path(), r#"{"gamma":{"kind":"poly","coeffs":[1.0],"B":1.0}}"#);
    let out = vwl(&["--config", "c.json", "vort", "zxc"], dir.path());
    assert_eq!(out.status.code(), Some(10));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["failed"][0], "hypothesis");
}

#[test]
fn floats_use_seventeen_digits() {
    let dir = tempfile::tempdir().unwrap();
    let out = vwl(&["blowup", "corner"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("\"grad_sq_at_1\": 1.15470053837925"), "{text}");
}

#[test]
fn field_residuals_round_trip_through_csv() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), r#"{"gamma":{"kind":"poly","coeffs":[-1.0],"B":1.0},"grid":[32,32]}"#);
    assert!(vwl(&["--config", "c.json", "--out", ".", "laminar", "extreme"], dir.path()).status.success());
    write_config(dir.path(), r#"{"gamma":{"kind":"poly","coeffs":[-1.0],"B":1.0},"params":{"input":"laminar.csv"}}"#);
    let out = vwl(&["--config", "c.json", "field", "residuals"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let out = vwl(&["--config", "c.json", "pressure", "nqt"], dir.path());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(doc["result"].is_object());
}
