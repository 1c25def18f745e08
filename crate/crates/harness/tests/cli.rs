use std::path::Path;
use std::process::{Command, Output};

use miso_harness::read_results;

fn sim(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_miso-sim")).args(args).current_dir(dir).output().unwrap()
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.cfg"), "antennas = 8\nbogus = 1\n").unwrap();
    let out = sim(&["sweep", "--config", "bad.cfg", "--out", "r.csv"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("r.csv").exists());
}

#[test]
fn missing_config_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = sim(&["bars", "--config", "nope.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sweep_then_slopes_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("s.cfg"),
        "antennas = 4\nusers = 2\npilots = 2\npowers_db = 10, 20, 30\nalgorithms = awamse, mmse_only\nsetups = 1\ntrials = 2\n",
    )
    .unwrap();
    let out = sim(&["sweep", "--config", "s.cfg", "--out", "r.csv", "--plot", "r.dat"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let records = read_results(&dir.path().join("r.csv")).unwrap();
    assert_eq!(records.len(), 2 * 2 * 3);
    assert!(std::fs::read_to_string(dir.path().join("r.dat")).unwrap().contains("# awamse T_dl=2"));

    let out = sim(&["slopes", "--in", "r.csv", "--window", "10,30"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("awamse"));
}
