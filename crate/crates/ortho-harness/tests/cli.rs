use std::process::Command;

fn verify() -> Command {
    Command::new(env!("CARGO_BIN_EXE_verify"))
}

#[test]
fn passing_run_exits_zero_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let status = verify()
        .args(["equivalence", "--p", "2,4", "--depth", "1,2", "--steps", "10"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());

    let report: serde_json::Value =
        serde_json::from_reader(std::fs::File::open(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["experiment"], "equivalence");
    assert_eq!(report["all_pass"], true);
    assert_eq!(report["any_error"], false);
    let cells = report["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 4);
    for cell in cells {
        assert!(cell["deviation"].as_f64().unwrap() <= 1e-8);
        assert_eq!(cell["pass"], true);
    }
    assert!(out.join("equivalence_p2_L1_s0_deep.csv").exists());
    assert!(out.join("equivalence_p2_L1_s0_shallow.csv").exists());
}

#[test]
fn negative_control_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let status = verify()
        .args(["equivalence", "--p", "4", "--depth", "3", "--steps", "50", "--sequential"])
        .arg("--out")
        .arg(dir.path().join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn bad_usage_exits_two() {
    let unknown_flag = verify().args(["equivalence", "--no-such-flag"]).output().unwrap();
    assert_eq!(unknown_flag.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let bad_config = verify()
        .args(["depth", "--depth", "2,5,9"])
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(bad_config.status.code(), Some(2));
}

#[test]
fn flow_preset_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let status = verify()
        .args(["flow", "--preset", "paper"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let report: serde_json::Value =
        serde_json::from_reader(std::fs::File::open(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["flow"]["ratios_pass"], true);
    assert_eq!(report["flow"]["rk4_pass"], true);
}
