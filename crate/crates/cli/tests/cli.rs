use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"{
  "mx": 8, "my": 8, "slots": 20, "trials": 2,
  "sensing": { "nx": 16, "ny": 16 }
}"#;

fn holoidet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_holoidet")).args(args).output().expect("binary runs")
}

fn small_scenario(dir: &Path) -> String {
    let p = dir.join("small.json");
    std::fs::write(&p, SMALL).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn sense_writes_estimates() {
    let dir = tempfile::tempdir().unwrap();
    let sc = small_scenario(dir.path());
    let out = dir.path().to_str().unwrap();
    let o = holoidet(&["sense", "--scenario", &sc, "--seed", "7", "--out", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("estimates.json")).unwrap()).unwrap();
    assert_eq!(v["estimates"].as_array().unwrap().len(), 3);
    assert_eq!(v["master_seed"], 7);
}

#[test]
fn missing_scenario_exits_1() {
    let o = holoidet(&["sense", "--scenario", "/does/not/exist.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/does/not/exist.json"));
}

#[test]
fn bad_arguments_exit_1() {
    assert_eq!(holoidet(&["orbit"]).status.code(), Some(1));
    assert_eq!(holoidet(&["sense", "--scheme", "nope"]).status.code(), Some(1));
    assert_eq!(holoidet(&["experiment", "--fig", "3", "--trials", "1"]).status.code(), Some(1));
}

#[test]
fn unknown_scenario_key_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(&p, r#"{"mxx": 4}"#).unwrap();
    assert_eq!(holoidet(&["sense", "--scenario", p.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn unreachable_rate_floor_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("hard.json");
    std::fs::write(&p, SMALL.replace("\"trials\": 2", "\"trials\": 2, \"r0\": 40")).unwrap();
    let o = holoidet(&["transmit", "--scenario", p.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("transmit.json").exists());
}

#[test]
fn transmit_and_orient_write_json() {
    let dir = tempfile::tempdir().unwrap();
    let sc = small_scenario(dir.path());
    let out = dir.path().to_str().unwrap();
    assert!(holoidet(&["orient", "--scenario", &sc, "--out", out, "--scheme", "fpa"]).status.success());
    assert!(holoidet(&["transmit", "--scenario", &sc, "--out", out, "--trial", "1"]).status.success());
    let t: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("transmit.json")).unwrap()).unwrap();
    assert!(t["metrics"]["min_eh"].as_f64().unwrap() > 0.0);
    let o: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("orientation.json")).unwrap()).unwrap();
    assert_eq!(o["scheme"], "fpa");
}

#[test]
fn experiment_manifest_rerun_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let sc = small_scenario(dir.path());
    let first = dir.path().join("a");
    let second = dir.path().join("b");
    let o = holoidet(&["experiment", "--fig", "7", "--scenario", &sc, "--out", first.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = first.join("fig7_manifest.json");
    let o = holoidet(&["experiment", "--manifest", manifest.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let a = std::fs::read(first.join("fig7.csv")).unwrap();
    let b = std::fs::read(second.join("fig7.csv")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn gainmap_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let sc = small_scenario(dir.path());
    let o = holoidet(&["gainmap", "--scenario", &sc, "--n-theta", "12", "--n-phi", "5", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(dir.path().join("gainmap.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("theta_deg,phi_deg,gain"));
    assert!(text.lines().count() > 10);
}
