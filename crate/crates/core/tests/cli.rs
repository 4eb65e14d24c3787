use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_robin-plap")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn bounds_prints_a_certificate() {
    let o = cli(&["bounds", "--domain", "disk", "--p", "2", "--alpha", "8"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    for key in ["p", "alpha", "epsilon", "c", "delta_star", "upper", "lower", "provenance"] {
        assert!(v.get(key).is_some(), "missing {key} in {v}");
    }
    assert_eq!(v["upper"].as_f64().unwrap(), -64.0);
}

#[test]
fn solve_prints_a_record() {
    let o = cli(&["solve", "--domain", "interval", "--p", "2", "--h", "0.01", "--alpha", "2"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["lambda"].as_f64().unwrap() < -4.0);
}

#[test]
fn sweep_without_outputs_prints_csv() {
    let o = cli(&["sweep", "--domain", "interval", "--p", "3", "--h", "0.02", "--alphas", "1,2"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 3);
    assert_eq!(text.lines().next().unwrap(), robin_plap::harness::CSV_HEADER.join(","));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(&path, "domain = \"interval\"\np = 3.0\nh = 0.02\nalphas = [1.0]\n").unwrap();
    let file = cli(&["sweep", "--config", path.to_str().unwrap()]);
    let flagged = cli(&["sweep", "--config", path.to_str().unwrap(), "--p", "2"]);
    assert!(file.status.success() && flagged.status.success());
    let row = |o: &Output| stdout(o).lines().nth(1).unwrap().to_string();
    assert_ne!(row(&file), row(&flagged));
    let direct = cli(&["sweep", "--domain", "interval", "--p", "2", "--h", "0.02", "--alphas", "1"]);
    assert_eq!(row(&flagged), row(&direct));
}

#[test]
fn invalid_input_exits_with_an_error() {
    let o = cli(&["sweep", "--domain", "disk", "--p", "0.9", "--alphas", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
    let o = cli(&["sweep", "--domain", "disk", "--p", "2", "--alphas", "64", "--h", "0.3", "--uniform"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn divergence_check_passes() {
    let o = cli(&["check", "--suite", "divergence", "--seed", "1"]);
    assert!(o.status.success(), "{}", stdout(&o));
}
