use std::path::Path;
use std::process::{Command, Output};

use hawkscan::io::{parse_events, write_model};
use hawkscan::networks::one_dim;

fn hawkscan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hawkscan")).args(args).output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    /// Pre/post models and a stream with a change at 100.
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        write_model(&one_dim(1.0, 0.2, 1.0).unwrap(), &dir.path().join("pre.toml")).unwrap();
        write_model(&one_dim(1.0, 0.7, 1.0).unwrap(), &dir.path().join("post.toml")).unwrap();
        let f = Self { dir };
        let out = hawkscan(&[
            "simulate",
            "--model", path(&f.file("pre.toml")),
            "--post", path(&f.file("post.toml")),
            "--kappa", "100",
            "--horizon", "300",
            "--seed", "3",
            "--out", path(&f.file("events.csv")),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        f
    }

    fn file(&self, name: &str) -> std::path::PathBuf {
        self.dir.path().join(name)
    }

    fn detect(&self, extra: &[&str]) -> Output {
        let (pre, post, events) = (self.file("pre.toml"), self.file("post.toml"), self.file("events.csv"));
        let mut args = vec!["detect", "--pre", path(&pre), "--post", path(&post), "--events", path(&events)];
        args.extend_from_slice(extra);
        hawkscan(&args)
    }
}

#[test]
fn simulate_writes_a_parseable_stream() {
    let f = Fixture::new();
    let events = parse_events(&f.file("events.csv"), Some(300.0)).unwrap();
    assert!(events.len() > 200);
}

#[test]
fn detect_exit_codes_follow_the_alarm() {
    let f = Fixture::new();
    let alarm = f.detect(&["--b", "5"]);
    assert_eq!(alarm.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&alarm.stdout).starts_with("alarm t="));
    let quiet = f.detect(&["--b", "1e6"]);
    assert_eq!(quiet.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&quiet.stdout).starts_with("no alarm"));
}

#[test]
fn config_values_override_flags() {
    let f = Fixture::new();
    std::fs::write(f.file("run.toml"), "b = 5.0\ngamma = 0.5\n").unwrap();
    let cfg = f.file("run.toml");
    let out = f.detect(&["--b", "1e6", "--config", path(&cfg)]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn trajectory_is_written_on_request() {
    let f = Fixture::new();
    let traj = f.file("traj.csv");
    let out = f.detect(&["--b", "1e6", "--gamma", "1", "--horizon", "300", "--emit-trajectory", path(&traj)]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&traj).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,S,tau_hat"));
    assert_eq!(lines.count(), 300);
}

#[test]
fn errors_exit_with_one_and_name_the_file() {
    let f = Fixture::new();
    let missing = f.file("missing.csv");
    let out = hawkscan(&["detect", "--pre", path(&f.file("pre.toml")), "--post", path(&f.file("post.toml")), "--events", path(&missing), "--b", "5"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.csv"));

    std::fs::write(f.file("bad.csv"), "t,u\n1.0,0\n0.5,0\n").unwrap();
    let out = f.detect(&["--b", "5", "--events", path(&f.file("bad.csv"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn estimate_recovers_the_generating_model() {
    let dir = tempfile::tempdir().unwrap();
    let events = dir.path().join("events.csv");
    write_model(&one_dim(0.5, 0.5, 1.0).unwrap(), &dir.path().join("m.toml")).unwrap();
    let out = hawkscan(&["simulate", "--model", path(&dir.path().join("m.toml")), "--horizon", "5000", "--seed", "9", "--out", path(&events)]);
    assert!(out.status.success());
    let fitted = dir.path().join("fit.toml");
    let out = hawkscan(&[
        "estimate", "--events", path(&events), "--window", "0,5000", "--horizon", "5000",
        "--kernel-beta", "1", "--fit-mu", "--out", path(&fitted),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let model = hawkscan::io::read_model(&fitted).unwrap();
    assert!((model.alpha(0, 0) - 0.5).abs() < 0.1, "{}", model.alpha(0, 0));
}

#[test]
fn bench_reports_delay_and_writes_records() {
    let f = Fixture::new();
    let records = f.file("reps.csv");
    let out = hawkscan(&[
        "bench", "--pre", path(&f.file("pre.toml")), "--post", path(&f.file("post.toml")),
        "--b", "4", "--kappa", "50", "--reps", "20", "--max-time", "2000", "--out", path(&records),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("edd="));
    assert_eq!(std::fs::read_to_string(&records).unwrap().lines().count(), 21);
}

#[test]
fn unknown_experiment_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = hawkscan(&["reproduce", "--experiment", "fig9", "--out-dir", path(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
}
