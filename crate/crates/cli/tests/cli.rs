use std::process::{Command, Output};

fn thinlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thinlab"))
        .args(args)
        .env_remove("THINLAB_SEED")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn suite_passes_and_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<_> = ["a.json", "b.json"].iter().map(|n| dir.path().join(n)).collect();
    for p in &paths {
        let out = thinlab(&["suite", "--seed", "9", "--mc-samples", "100000", "--output", p.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8_lossy(&out.stderr).contains("overall: PASS"));
    }
    let (a, b) = (std::fs::read(&paths[0]).unwrap(), std::fs::read(&paths[1]).unwrap());
    assert_eq!(a, b);
    let v: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(v["header"]["seed_source"], "flag");
    assert_eq!(v["result"]["overall"], true);
}

#[test]
fn custom_family_makes_the_suite_fail() {
    let out = thinlab(&[
        "suite",
        "--seed",
        "1",
        "--mc-samples",
        "0",
        "--extra-family",
        r#"{"kind":"custom","coeffs":[1,1,1]}"#,
    ]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    let failed: Vec<_> = v["result"]["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["passed"] == false)
        .map(|c| c["name"].as_str().unwrap().to_owned())
        .collect();
    assert_eq!(failed, ["invariance/custom([1,1,1])"]);
}

#[test]
fn seed_is_required_and_env_fallback_is_recorded() {
    let out = thinlab(&["suite"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`seed`"));

    let out = Command::new(env!("CARGO_BIN_EXE_thinlab"))
        .args(["thin", "--mode", "mc", "--samples", "1000", "--theta", "2", "--p", "0.3"])
        .env("THINLAB_SEED", "42")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["header"]["seed"], 42);
    assert_eq!(v["header"]["seed_source"], "env:THINLAB_SEED");
    assert!(v["result"]["tv_to_exact"].as_f64().unwrap() < 0.1);
}

#[test]
fn exact_thin_needs_no_seed() {
    let out = thinlab(&["thin", "--family", "binomial:4", "--theta", "1", "--p", "0.5", "--out", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,series,value"));
    assert_eq!(lines.count(), 5);
}

#[test]
fn cgs_reports_worst_point() {
    let out = thinlab(&["cgs", "--family", "log", "--params", r#"{"alpha":1,"a":2}"#, "--grid", "0:100:2.5"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["result"]["stats"]["n_points"], 1681);
    assert!(v["result"]["stats"]["worst_point"].is_array());

    let out = thinlab(&["cgs", "--family", "theorem1b", "--magma", "words", "--params", r#"{"s0":"3/4","a":"x"}"#]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["result"]["stats"]["max_residual"], 0.0);

    let out = thinlab(&["cgs", "--family", "theorem1a", "--equation", "rew"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("kernel"));
}

#[test]
fn invariance_and_config_files() {
    let out = thinlab(&["invariance", "--family", "negbin:3", "--thetas", "0.1,0.5", "--ps", "0.3,0.9"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["result"].as_array().unwrap().len(), 4);

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"command": "invariance", "thetas": []}"#).unwrap();
    let out = thinlab(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`thetas`"));

    std::fs::write(
        &cfg,
        r#"{"command": "invariance", "family": {"kind": "custom", "coeffs": [1, 1, 1]}, "thetas": [1.0], "ps": [0.5]}"#,
    )
    .unwrap();
    let out = thinlab(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}
