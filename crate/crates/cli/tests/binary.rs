use std::path::Path;
use std::process::Command;

fn configs() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn binary_runs_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_geomech"))
        .arg(configs().join("cart_pendulum.cfg"))
        .args(["--out".as_ref(), dir.path().as_os_str()])
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.lines().any(|l| l.starts_with("momentum_max_dev = ")));
    assert!(dir.path().join("clag.csv").exists());
}

#[test]
fn binary_rejects_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "experiment = simulate\nmodel = planar\nh = -0.1\nsteps = 3\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_geomech")).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.lines().count(), 1);
    assert!(stderr.starts_with("error: bad-value: "));
}
