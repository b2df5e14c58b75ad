use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_oldroyd-fsi"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const SMALL: &str = "[grid]\nnx = 16\nny = 16\n[time]\ndt = 0.002\nt_final = 0.01\n[initial]\neta0_amplitude = 0.02\n[output]\nevery = 1\nsnapshot_every = 5\n";

#[test]
fn run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let out = dir.path().join("out");
    let status = bin().arg("run").arg(&cfg).arg("--out").arg(&out).arg("--quiet").output().unwrap();
    assert_eq!(status.status.code(), Some(0), "{}", String::from_utf8_lossy(&status.stderr));
    assert!(status.stdout.is_empty());
    let csv = std::fs::read_to_string(out.join("timeseries.csv")).unwrap();
    assert!(csv.starts_with("step[count],t[time]"), "{}", &csv[..40.min(csv.len())]);
    assert!(!csv.contains('\r'));
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 1 + 6);
    for f in ["config.toml", "timeseries_000000.bin", "timeseries_000005.bin", "timeseries_final.bin"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
}

#[test]
fn validation_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.toml", "[grid]\nnx = 4\n");
    let r = bin().arg("run").arg(&bad).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(r.status.code(), Some(2));
    let unknown = write(dir.path(), "unknown.toml", "[grid]\nnx = 16\nbogus = 1\n");
    let r = bin().arg("run").arg(&unknown).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("line 3"));
}

#[test]
fn solver_failure_exits_3() {
    // a step far above the advective limit
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "cfl.toml",
        "[grid]\nnx = 64\nny = 64\n[time]\ndt = 0.5\nt_final = 1.0\n[initial]\neta_star_amplitude = 5.0\n",
    );
    let r = bin().arg("run").arg(&cfg).arg("--out").arg(dir.path()).arg("--quiet").output().unwrap();
    assert_eq!(r.status.code(), Some(3), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(dir.path().join("timeseries.csv").exists());
}

#[test]
fn seed_flag_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let r = bin().args(["--seed", "42", "--quiet", "run"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(r.status.code(), Some(0));
    let rendered = std::fs::read_to_string(dir.path().join("config.toml")).unwrap();
    assert!(rendered.contains("seed = 42"));
}

#[test]
fn fp_oracle_writes_closure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "o.toml", "[oracle]\nnq = 48\nt_end = 0.1\ndt = 0.005\n");
    let r = bin().arg("fp-oracle").arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let csv = std::fs::read_to_string(dir.path().join("closure.csv")).unwrap();
    assert!(csv.contains("# residual"));
}

#[test]
fn missing_config_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let r = bin().arg("run").arg(dir.path().join("nope.toml")).arg("--out").arg(dir.path()).output().unwrap();
    assert_ne!(r.status.code(), Some(0));
}
