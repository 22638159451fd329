use std::path::Path;
use std::process::{Command, Output};

fn axmhd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_axmhd")).args(args).env("AXMHD_THREADS", "2").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, body: &str) -> String {
    let out = dir.join("out");
    let text = format!("{body}\n[output]\ndir = {:?}\ncadence = 1\n", out.to_str().unwrap());
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn zero_end_time_run_writes_initial_record() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[grid]\nnr = 32\nnz = 32\n[time]\nt_end = 0.0\n[monitors]\nreconstructed = false");
    let o = axmhd(&["run", "--config", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out");
    let csv = std::fs::read_to_string(out.join("records.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.lines().nth(1).unwrap().starts_with("0,0,"));
    assert!(out.join("ckpt_00000000.axmh").exists());
    assert!(std::fs::read_to_string(out.join("config.canonical")).unwrap().contains("digest = "));
}

#[test]
fn resume_reproduces_the_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let body = "[grid]\nnr = 32\nnz = 32\n[time]\nt_end = 0.3\n[monitors]\nreconstructed = false";
    let cfg = write_config(dir.path(), &format!("{body}\n"));
    let cfg_text = std::fs::read_to_string(&cfg).unwrap().replace("cadence = 1", "cadence = 1\ncheckpoint_every = 3");
    std::fs::write(&cfg, cfg_text).unwrap();
    assert!(axmhd(&["run", "--config", &cfg]).status.success());
    let out = dir.path().join("out");
    let full = std::fs::read(out.join("records.csv")).unwrap();
    let mut ckpts: Vec<_> = std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().path()).filter(|p| p.extension().is_some_and(|x| x == "axmh")).collect();
    ckpts.sort();
    let last = ckpts.last().unwrap().clone();
    let last_bytes = std::fs::read(&last).unwrap();
    let o = axmhd(&["run", "--config", &cfg, "--resume", ckpts[1].to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read(out.join("records.csv")).unwrap(), full);
    assert_eq!(std::fs::read(&last).unwrap(), last_bytes);

    let changed = std::fs::read_to_string(&cfg).unwrap().replace("t_end = 0.3", "t_end = 0.4");
    std::fs::write(&cfg, changed).unwrap();
    let o = axmhd(&["run", "--config", &cfg, "--resume", ckpts[1].to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("digest"));
}

#[test]
fn verify_passes_on_zero_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[grid]\nnr = 32\nnz = 32\n[time]\nt_end = 0.2\ndt = 0.01\n[initial]\ngamma_amp = 0.0\npi_amp = 0.0\n[monitors]\nbox_n = 32",
    );
    let o = axmhd(&["verify", "--config", &cfg]);
    let text = stdout(&o);
    assert!(o.status.success(), "{text}");
    assert!(!text.contains("FAIL"));
    assert!(text.lines().filter(|l| l.starts_with("PASS")).count() >= 12);
}

#[test]
fn lp_selftest_matches_recorded_reference() {
    let o = axmhd(&["lp-selftest", "--seed", "42", "--size", "32"]);
    assert!(o.status.success());
    let expected = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/lp_selftest_42_32.txt")).unwrap();
    assert_eq!(stdout(&o), expected);
}

#[test]
fn losing_scenario_reports_exact_loss() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[grid]\nnr = 32\nnz = 32\n[time]\nt_end = 1.0\n[losing]\nvelocity = \"shear\"\neps = 0.2\nt_end = 0.5\nbox_n = 32",
    );
    let o = axmhd(&["losing", "--config", &cfg]);
    let text = stdout(&o);
    assert!(o.status.success(), "{text}");
    assert!(text.contains("PASS sigma_T = sigma - eps"));
    let csv = std::fs::read_to_string(dir.path().join("out/losing.csv")).unwrap();
    assert!(csv.starts_with("t,sigma_t,r\n"));
}

#[test]
fn bad_configuration_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[grid]\nnr = 32\nnz = 12\n[time]\nt_end = 1.0");
    let o = axmhd(&["run", "--config", &cfg]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("grid.nz"));
    let o = axmhd(&["verify", "--config", dir.path().join("missing.toml").to_str().unwrap()]);
    assert!(!o.status.success());
}

#[test]
fn invalid_thread_count_fails() {
    let o = Command::new(env!("CARGO_BIN_EXE_axmhd")).args(["lp-selftest", "--size", "16"]).env("AXMHD_THREADS", "zero").output().unwrap();
    assert!(!o.status.success());
}
