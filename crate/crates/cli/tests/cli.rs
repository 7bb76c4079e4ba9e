use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_assess"))
}

/// Three walkers over 16 s at 2.5 fps in generic CSV.
fn write_toy(dir: &Path) -> PathBuf {
    let mut csv = String::from("frame,id,x,y\n");
    for f in 0..40 {
        let t = f as f64 / 2.5;
        csv.push_str(&format!("{f},1,{:.4},{:.4}\n", 1.2 * t, 0.1 * (0.8 * t).sin()));
        csv.push_str(&format!("{f},2,{:.4},{:.4}\n", 20.0 - 1.0 * t, 2.0 + 0.05 * t));
        if f >= 5 {
            csv.push_str(&format!("{f},3,{:.4},{:.4}\n", 5.0 + 0.1 * t, -3.0 + 1.3 * t));
        }
    }
    fs::write(dir.join("toy.csv"), csv).unwrap();
    let cfg = r#"{
        "name": "toy",
        "files": ["toy.csv"],
        "schema": {"format": "generic-csv"},
        "fps": 2.5,
        "overall": {"k_max": 3}
    }"#;
    let path = dir.join("config.json");
    fs::write(&path, cfg).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).env_remove("RUST_LOG").output().unwrap()
}

#[test]
fn full_run_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_toy(dir.path());
    let out = dir.path().join("out");
    let o = run(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--quiet"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    for f in ["report.json", "trajlets.csv", "frames.csv", "overall.csv", "hist_S_avg.csv", "hist_global_density.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let records = report["records"].as_array().unwrap().len();
    assert!(records >= 2);
    let rows = fs::read_to_string(out.join("trajlets.csv")).unwrap().lines().count() - 1;
    assert_eq!(rows, records);
    assert_eq!(report["metadata"]["non_static_count"].as_u64().unwrap() as usize, records);
}

#[test]
fn identical_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_toy(dir.path());
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = run(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "4", "--quiet"]);
        assert!(o.status.success());
        outputs.push(fs::read(out.join("report.json")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn indicator_selection_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_toy(dir.path());
    let out = dir.path().join("out");
    let o = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--indicators",
        "regularity",
        "--stride",
        "1.6",
        "--exact",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("wrote"));
    assert!(!out.join("frames.csv").exists());
    assert!(!out.join("hist_C.csv").exists());
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["metadata"]["stride"].as_f64(), Some(1.6));
    assert_eq!(report["run"]["exact"].as_bool(), Some(true));
    assert!(report["records"][0].get("context").is_none());
}

#[test]
fn config_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_toy(dir.path());
    let text = fs::read_to_string(&cfg).unwrap().replace("\"fps\"", "\"frame_rate\": 1, \"fps\"");
    fs::write(&cfg, text).unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));

    let cfg = write_toy(dir.path());
    let o = run(&["--config", cfg.to_str().unwrap(), "--indicators", "speed"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["--bogus"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn data_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_toy(dir.path());
    fs::write(dir.path().join("toy.csv"), "frame,id,x,y\n0,1,0.0,0.0\n1,1,abc,0.0\n").unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains(":3"), "{}", String::from_utf8_lossy(&o.stderr));

    fs::remove_file(dir.path().join("toy.csv")).unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn unwritable_output_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_toy(dir.path());
    let blocker = dir.path().join("blocker");
    fs::write(&blocker, "").unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "--out", blocker.join("out").to_str().unwrap(), "--quiet"]);
    assert_eq!(o.status.code(), Some(3));
}
