use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_omnidock"))
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn write_scenario(dir: &Path, name: &str, patch: impl FnOnce(&mut serde_json::Value)) -> PathBuf {
    let text = fs::read_to_string(scenarios().join("dock_only.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    patch(&mut v);
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn bright_dock_exits_zero_with_full_phase_sequence() {
    let out = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["run", scenarios().join("dock_only.json").to_str().unwrap(), "--out"])
        .arg(out.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(
        summary["phase_sequence"],
        serde_json::json!(["search", "align", "lock", "docked"])
    );
    assert!(summary["composite"]["total_mass"].as_f64().unwrap() == 8.0);
    let trace = fs::read_to_string(out.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("t,r1_x,"));
}

#[test]
fn dark_dock_exits_three_with_reason() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_scenario(dir.path(), "dark.json", |v| v["lighting"] = "dark".into());
    let out = dir.path().join("out");
    let o = bin().arg("run").arg(&file).arg("--out").arg(&out).output().unwrap();
    assert_eq!(o.status.code(), Some(3));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let reason = summary["failure_reason"].as_str().unwrap();
    assert!(reason == "timeout" || reason == "tag_lost", "{reason}");
    assert!(stderr(&o).contains(reason));
}

#[test]
fn missing_wheel_radius_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_scenario(dir.path(), "bad.json", |v| {
        v["robots"][0].as_object_mut().unwrap().remove("wheel_radius");
    });
    let out = dir.path().join("out");
    let o = bin().arg("run").arg(&file).arg("--out").arg(&out).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("wheel_radius"), "{}", stderr(&o));
    assert!(!out.exists(), "nothing written on config error");
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_scenario(dir.path(), "bad.json", |v| v["sim"]["dtt"] = 0.01.into());
    let o = bin().arg("run").arg(&file).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("dtt"));
}

#[test]
fn run_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = bin()
            .args(["run", scenarios().join("dock_only.json").to_str().unwrap(), "--seed", "9", "--out"])
            .arg(d.path())
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0));
    }
    assert_eq!(
        fs::read(a.path().join("trace.csv")).unwrap(),
        fs::read(b.path().join("trace.csv")).unwrap()
    );
}

#[test]
fn batch_grid_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let file = scenarios().join("envelope.json");
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("o{k}"));
        let o = bin()
            .arg("batch")
            .arg(&file)
            .args(["--seeds", "4", "--sweep", "lighting=bright,dark", "--sweep", "approach.deviation_deg=0,70", "--out"])
            .arg(&out)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        outputs.push(fs::read_to_string(out.join("aggregate.csv")).unwrap());
        assert!(out.join("trials.csv").exists());
    }
    assert_eq!(outputs[0], outputs[1]);
    let lines: Vec<&str> = outputs[0].lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[0].starts_with("cell,lighting,approach.deviation_deg,n_trials,n_completed,success_rate"));
    // bright, head-on docks every time; dark never does
    assert!(lines[1].starts_with("0,bright,0,4,4,1,"), "{}", lines[1]);
    assert!(lines[3].starts_with("2,dark,0,4,0,0,"), "{}", lines[3]);
}

#[test]
fn batch_with_one_seed_matches_run() {
    let dir = tempfile::tempdir().unwrap();
    let file = scenarios().join("dock_only.json");
    let run_out = dir.path().join("run");
    let o = bin().arg("run").arg(&file).arg("--out").arg(&run_out).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let batch_out = dir.path().join("batch");
    let o = bin()
        .arg("batch")
        .arg(&file)
        .args(["--seeds", "1", "--out"])
        .arg(&batch_out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run_out.join("summary.json")).unwrap()).unwrap();
    let batch: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(batch_out.join("batch.json")).unwrap()).unwrap();
    assert_eq!(batch["trials"][0]["trace_sha256"], summary["trace_sha256"]);
}

#[test]
fn compare_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .arg("compare")
        .arg(scenarios().join("transport.json"))
        .args(["--seeds", "2", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("compare.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "mode,rmsa,mean_jerk,sigma_omega,transport_time");
    assert!(lines[1].starts_with("docked,"));
    assert!(lines[2].starts_with("cooperating,"));
    assert!(lines[3].starts_with("docked_win_rate,"));
}
