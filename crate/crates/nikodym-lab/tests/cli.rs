use std::process::Command;

fn lab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nikodym-lab"))
}

#[test]
fn boxdim_writes_json_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("square.toml");
    std::fs::write(&cfg, "expected_dimension = 2.0\n").unwrap();
    let out = lab()
        .args(["boxdim", "--delta-list", "0.03125,0.015625,0.0078125", "--format", "json", "--svg", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("boxdim.json")).unwrap()).unwrap();
    assert_eq!(report["rows"].as_array().unwrap().len(), 3);
    let dim = report["details"]["dimension"].as_f64().unwrap();
    assert!((dim - 2.0).abs() < 0.05, "{dim}");
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("boxdim.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["passed"], true);
    assert!(dir.path().join("boxdim.volume.svg").exists());
}

#[test]
fn metric_flag_and_failure_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab().args(["curvature-report", "--metric", "space_form:-1", "--out"]).arg(dir.path()).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("space_form(-1)"));
    // the planar square is not a solid: a failed check exits with code 2
    let cfg = dir.path().join("solid.toml");
    std::fs::write(&cfg, "expected_dimension = 3.0\ndeltas = [0.0625, 0.03125, 0.015625]\n").unwrap();
    let out = lab().arg("boxdim").arg("--config").arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_input_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["boxdim", "--delta-list", "0.01,0.02"],
        vec!["counterexample-sogge", "--metric", "euclidean"],
        vec!["nikodym-degenerate", "--metric", "sogge_example"],
    ] {
        let out = lab().args(&args).arg("--out").arg(dir.path()).output().unwrap();
        assert_eq!(out.status.code(), Some(1), "{args:?}");
    }
}
