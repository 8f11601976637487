use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ergodic-cdf")).args(args).env_remove("ERGODIC_CDF_WORKERS").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn truth_grid_csv() {
    let o = cli(&["truth", "--model", "ou", "--grid", "-3:3:61"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x,F,f");
    assert_eq!(lines.len(), 62);
    let mid: Vec<f64> = lines[31].split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(mid[0], 0.0);
    assert!((mid[1] - 0.5).abs() < 1e-12);
    assert!((mid[2] - 1.0 / std::f64::consts::PI.sqrt()).abs() < 1e-12);
    // 17 significant digits
    assert_eq!(lines[1].split(',').next().unwrap(), "-3.0000000000000000e0");
}

#[test]
fn bound_json() {
    let o = cli(&["bound", "--model", "ou", "--nu", "gauss:0,1"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let b = v["bound"].as_f64().unwrap();
    assert!(b > 0.0 && (b - 0.1697758273).abs() < 1e-6, "{b}");
    assert_eq!(v["local_bound"].as_array().unwrap().len(), 101);
}

#[test]
fn simulate_and_estimate_csv() {
    let o = cli(&["simulate", "--horizon", "1", "--dt", "0.1", "--seed", "4", "--wiener"]);
    let text = stdout(&o);
    assert_eq!(text.lines().next(), Some("t,x,dW"));
    assert_eq!(text.lines().count(), 12);
    assert_eq!(text, stdout(&cli(&["simulate", "--horizon", "1", "--dt", "0.1", "--seed", "4", "--wiener"])));

    let o = cli(&["estimate", "--estimator", "unbiased:exp:delta=1", "--horizon", "5", "--grid", "-1:1:5"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().next(), Some("x,estimate"));
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn screens_and_identities_json() {
    let o = cli(&["check-model", "--model", "quartic"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["all_ok"], true);

    let o = cli(&["check-conditions", "--estimator", "unbiased:poly:p=1", "--x", "-1,2"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["q2"]["holds"], true);
    assert_eq!(v["estimators"][0]["q3"]["holds"], true);
    assert_eq!(v["estimators"][0]["cond1"].as_array().unwrap().len(), 2);

    let o = cli(&["identity-checks", "--x", "-0.5", "--horizon", "5"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["representation"]["discrepancy"].as_f64().unwrap() < 0.1);
    assert!(v["m"].as_array().unwrap().iter().all(|r| r["rel_diff"].as_f64().unwrap() < 1e-6));
}

#[test]
fn exit_codes() {
    assert_eq!(cli(&["truth", "--bogus"]).status.code(), Some(2));
    assert!(!cli(&["truth", "--bogus"]).stderr.is_empty());
    assert_eq!(cli(&["truth", "--model", "ou:theta=0"]).status.code(), Some(2));
    assert_eq!(cli(&["bound", "--nu", "gauss:0,-1"]).status.code(), Some(2));
    assert_eq!(cli(&["simulate", "--horizon", "1e9", "--dt", "1"]).status.code(), Some(2));
    // Euler steps of size 1 from 100 under S = -x³ blow up at once.
    assert_eq!(cli(&["simulate", "--model", "quartic", "--x0", "100", "--dt", "1", "--horizon", "10"]).status.code(), Some(4));
}

fn write_config(dir: &Path, workers: &str) -> std::path::PathBuf {
    let cfg = dir.join("exp.json");
    let text = format!(
        r#"{{ "model": "ou", "estimators": ["edf", "unbiased:exp:delta=1"],
            "sim": {{ "horizon": 1, "dt": 0.01, "seed": 7 }}, "replications": 2,
            "output_dir": "{}", "workers": {workers} }}"#,
        dir.join("out").display()
    );
    std::fs::write(&cfg, text).unwrap();
    cfg
}

#[test]
fn experiment_writes_the_documented_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "1");
    let o = cli(&["experiment", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out");
    for f in ["risk_edf.csv", "risk_unbiased_exp.csv", "result.json", "timing.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let first = std::fs::read(out.join("risk_unbiased_exp.csv")).unwrap();
    let result = std::fs::read(out.join("result.json")).unwrap();
    assert_eq!(cli(&["experiment", "--config", cfg.to_str().unwrap(), "--workers", "3"]).status.code(), Some(0));
    assert!(std::fs::read(out.join("risk_unbiased_exp.csv")).unwrap() == first);
    // Only the recorded worker count may change.
    let v: serde_json::Value = serde_json::from_slice(&result).unwrap();
    let w: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("result.json")).unwrap()).unwrap();
    assert_eq!(v["reports"], w["reports"]);
    assert_eq!((v["config"]["workers"].as_u64(), w["config"]["workers"].as_u64()), (Some(1), Some(3)));
    assert_eq!(v["reports"][0]["config"]["path_seeds"], v["reports"][1]["config"]["path_seeds"]);
}

#[test]
fn experiment_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "\"lots\"");
    assert_eq!(cli(&["experiment", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{ "model": "ou:theta=-1", "estimators": ["kde"], "sim": { "horizon": 1, "dt": 0, "seed": 1 },
            "replications": 1, "output_dir": "x" }"#,
    )
    .unwrap();
    let o = cli(&["experiment", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    for needle in ["theta", "kde", "dt", "replications"] {
        assert!(err.contains(needle), "{needle} missing from: {err}");
    }
}
