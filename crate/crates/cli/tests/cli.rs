use std::fs;
use std::process::{Command, Output};

fn qimage(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qimage"))
        .args(args)
        .env_remove("QIMAGE_OUT_DIR")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn run_writes_artifacts_and_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let o = qimage(&[
            "--grid-n",
            "320",
            "--out-dir",
            dir.path().to_str().unwrap(),
            "run",
            "fig4b",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(report["scenario"], "fig4b");
    }
    for name in [
        "profile.csv",
        "counts.csv",
        "map.csv",
        "map.pgm",
        "report.json",
    ] {
        let x = fs::read(a.path().join("fig4b").join(name)).unwrap();
        let y = fs::read(b.path().join("fig4b").join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
}

#[test]
fn out_dir_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_qimage"))
        .args(["--grid-n", "320", "run", "fig4b"])
        .env("QIMAGE_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("fig4b").join("report.json").is_file());
}

#[test]
fn seed_flag_changes_counts_only() {
    let dir = tempfile::tempdir().unwrap();
    let path = |s: &str| dir.path().join(s);
    for seed in ["1", "2"] {
        let out = path(seed);
        let o = qimage(&[
            "--seed",
            seed,
            "--grid-n",
            "320",
            "--out-dir",
            out.to_str().unwrap(),
            "run",
            "fig4b",
        ]);
        assert!(o.status.success());
    }
    let read = |s: &str, f: &str| fs::read(path(s).join("fig4b").join(f)).unwrap();
    assert_eq!(read("1", "profile.csv"), read("2", "profile.csv"));
    assert_ne!(read("1", "counts.csv"), read("2", "counts.csv"));
}

#[test]
fn validation_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.json");
    fs::write(&empty, "{}").unwrap();
    let o = qimage(&["run", empty.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing required keys"));

    let mut doc: serde_json::Value = serde_json::from_str(&stdout(&qimage(&["schema"]))).unwrap();
    assert_eq!(doc["type"], "object");
    doc = serde_json::from_str(include_str!("../../core/presets/fig4b.json")).unwrap();
    doc["pump"]["waist_m"] = serde_json::json!(-1.0);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, doc.to_string()).unwrap();
    let o = qimage(&["run", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("pump.waist_m"));
}

#[test]
fn infeasible_design_exits_with_three() {
    let o = qimage(&[
        "design-telescope",
        "--total-m",
        "0.3",
        "--magnification",
        "1",
        "--catalog-m",
        "0.5",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("infeasible"));
}

#[test]
fn missing_scenario_exits_with_one() {
    assert_eq!(qimage(&["run", "no-such-scenario"]).status.code(), Some(1));
}

#[test]
fn design_prints_plan_and_snippet() {
    let o = qimage(&[
        "design-telescope",
        "--total-m",
        "1",
        "--magnification",
        "-1",
        "--catalog-m",
        "0.25",
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["plan"]["f_a"], 0.25);
    assert_eq!(v["plan"]["leg"], 0.5);
    assert_eq!(
        v["twin_side"]["elements"]["signal"]
            .as_array()
            .unwrap()
            .len(),
        5
    );
}

#[test]
fn scan_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    for name in ["fig4a", "fig4b"] {
        let o = qimage(&[
            "--grid-n",
            "320",
            "--out-dir",
            d,
            "scan",
            name,
            "--step-m",
            "4e-5",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).starts_with("scan_coordinate_m,rate_pairs_per_s\n"));
    }
    let a = dir.path().join("fig4a/scan.csv");
    let b = dir.path().join("fig4b/scan.csv");
    let o = qimage(&["compare", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["ncc"].as_f64().unwrap() >= 0.95);
}

#[test]
fn sweep_marks_rows_and_requires_a_mode() {
    let o = qimage(&[
        "--grid-n",
        "320",
        "sweep",
        "fig5",
        "--free",
        "--distances-m",
        "1,2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("z_m,peak_rate_pairs_per_s,snr,collimated,status")
    );
    assert_eq!(lines.count(), 2);

    let o = qimage(&["sweep", "fig5", "--distances-m", "1"]);
    assert_eq!(o.status.code(), Some(2));
}
