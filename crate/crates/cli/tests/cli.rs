use std::path::Path;
use std::process::Command;

fn config() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/reproduction.toml").display().to_string()
}

fn vrpslam() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vrpslam"))
}

#[test]
fn run_writes_results() {
    let out = tempfile::tempdir().unwrap();
    let status = vrpslam()
        .args(["run", "--config", &config(), "--mode", "hybrid", "--seeds", "2..4", "--particles", "200", "--steps", "5"])
        .arg("--out")
        .arg(out.path())
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let stdout = String::from_utf8_lossy(&status.stdout);
    assert!(stdout.contains("2 seeds, mode hybrid"), "{stdout}");
    for rel in ["aggregate.csv", "aggregate_va.csv", "summary.json", "seed_0002/trajectory.csv", "seed_0003/metrics.csv"] {
        assert!(out.path().join(rel).is_file(), "missing {rel}");
    }
}

#[test]
fn bad_arguments_fail() {
    let out = tempfile::tempdir().unwrap();
    let bad_mode = vrpslam().args(["run", "--config", &config(), "--mode", "both"]).arg("--out").arg(out.path()).output().unwrap();
    assert!(!bad_mode.status.success());

    let missing = vrpslam().args(["run", "--config", "/nonexistent.toml"]).arg("--out").arg(out.path()).output().unwrap();
    assert!(!missing.status.success());
    assert!(String::from_utf8_lossy(&missing.stderr).contains("nonexistent.toml"));

    let bad_seeds = vrpslam().args(["run", "--config", &config(), "--seeds", "5..5"]).arg("--out").arg(out.path()).output().unwrap();
    assert!(!bad_seeds.status.success());
}
