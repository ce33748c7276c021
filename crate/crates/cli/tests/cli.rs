use std::fs;
use std::process::Command;

fn stigtrack() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stigtrack"))
}

#[test]
fn run_writes_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let out = stigtrack()
        .args(["run", "--preset", "sim-2d", "--search", "levy", "--assign", "auction", "--runs", "2", "--steps", "100"])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("levy / auction"));
    let runs = fs::read_to_string(dir.path().join("runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 3);
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = stigtrack().args(["config", "--preset", "hardware-table"]).output().unwrap();
    assert!(out.status.success());
    let path = dir.path().join("hw.toml");
    fs::write(&path, &out.stdout).unwrap();
    let run = stigtrack().arg("run").arg("--config").arg(&path).args(["--runs", "1", "--steps", "20"]).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
}

#[test]
fn rejects_bad_input() {
    let out = stigtrack().args(["run", "--search", "spiral"]).output().unwrap();
    assert!(!out.status.success());
    let out = stigtrack().args(["run", "--preset", "moon"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown preset"));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    let text = String::from_utf8(stigtrack().args(["config"]).output().unwrap().stdout).unwrap();
    fs::write(&path, text.replace("comm_radius = 12.0", "comm_radius = 3.0")).unwrap();
    let out = stigtrack().arg("run").arg("--config").arg(&path).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn sweep_runs_selected_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = stigtrack()
        .args(["sweep", "--grid", "fov", "--search", "pheromone", "--runs", "1", "--steps", "20"])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("sweep.csv").exists());
}
