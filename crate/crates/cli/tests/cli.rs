use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "
[truncation]
d = 3
n = 2
blocks = 2

[laser]
phase_models = [\"delta-mix\"]
include_ideal = false

[sweep]
distances = [10.0]
";

fn pqkd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pqkd")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn characterise_prints_both_models() {
    let out = pqkd(&["characterise"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# pqkd "));
    assert_eq!(lines.next(), Some("model,visibility,q"));
    assert!(text.contains("delta-mix,1.9000000000000000e-3,9.5641"));
    assert!(text.contains("wrapped-normal,1.9000000000000000e-3,9.1282"));
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let both = write_config(dir.path(), "both.toml", "laser.q = 0.9\nlaser.visibility = 0.01\n");
    let typo = write_config(dir.path(), "typo.toml", "[protocol]\nmu = 0.5\n");
    let missing = dir.path().join("absent.toml");
    for args in [
        vec!["characterise", "--config", both.as_str()],
        vec!["characterise", "--config", typo.as_str()],
        vec!["characterise", "--config", missing.to_str().unwrap()],
        vec!["simulate", "--distance=-3"],
        vec!["keyrate", "--jobs", "0"],
    ] {
        let out = pqkd(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn empty_distance_list_writes_only_the_header() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "empty.toml", "sweep.distances = []\n");
    let csv = dir.path().join("out.csv");
    let out = pqkd(&["sweep", "--config", &cfg, "--out", csv.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 2);
}

#[test]
fn simulate_rows_cover_every_signal_and_intensity() {
    let out = pqkd(&["simulate", "--distance", "25"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    // Three signals times the two distinct default intensities, 0.5 and 0.
    assert_eq!(text.lines().count(), 2 + 6);
}

#[test]
fn sweep_output_is_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let run = |jobs: &str, name: &str| {
        let csv = dir.path().join(name);
        let out = pqkd(&["sweep", "--config", &cfg, "--jobs", jobs, "--out", csv.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(csv).unwrap()
    };
    let a = run("1", "a.csv");
    let b = run("2", "b.csv");
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().nth(2).unwrap().ends_with(",true"));
}
