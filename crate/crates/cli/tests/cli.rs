use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn gradsim(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gradsim")).args(args).current_dir(cwd).output().unwrap()
}

fn desk() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.toml")
}

/// Small enough to keep each invocation well under a second.
const QUICK: [&str; 10] = [
    "--set", "node_count=40",
    "--set", "width=120",
    "--set", "height=120",
    "--set", "data_phase_ms=3000",
    "--seeds", "2",
];

fn args<'a>(head: &[&'a str], tail: &[&'a str]) -> Vec<&'a str> {
    head.iter().chain(QUICK.iter()).chain(tail.iter()).copied().collect()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn shipped_config_is_the_default() {
    let text = fs::read_to_string(desk()).unwrap();
    let cfg = gradsim_core::ScenarioConfig::from_toml_str(&text).unwrap();
    assert_eq!(cfg, gradsim_core::ScenarioConfig::default());
}

#[test]
fn run_writes_rows_for_the_chosen_protocol() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = desk();
    let out = gradsim(
        &args(&["run", "--config", cfg.to_str().unwrap(), "--set", "protocol=BGB"], &["--out", "o"]),
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let runs = fs::read_to_string(dir.path().join("o/runs.csv")).unwrap();
    let rows: Vec<&str> = runs.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.split(',').nth(1) == Some("BGB")));
    let agg = fs::read_to_string(dir.path().join("o/aggregate.csv")).unwrap();
    assert_eq!(agg.lines().count(), 2);
    assert!(String::from_utf8_lossy(&out.stdout).contains("BGB"));
}

#[test]
fn missing_config_fails_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = gradsim(&args(&["run", "--config", "nope.toml"], &["--out", "o"]), dir.path());
    assert!(!out.status.success());
    assert!(stderr(&out).contains("nope.toml"));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn unknown_key_is_a_config_error_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let out = gradsim(&args(&["run", "--set", "warp_factor=9"], &["--out", "o"]), dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("warp_factor"));
    assert!(!dir.path().join("o").exists());

    fs::write(dir.path().join("bad.toml"), "[radio]\nwarp = 1\n").unwrap();
    let out = gradsim(&args(&["run", "--config", "bad.toml"], &[]), dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("warp"));
}

#[test]
fn failure_override_reaches_the_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = gradsim(&args(&["run", "--set", "p_f=0.4"], &["--out", "o"]), dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let runs = fs::read_to_string(dir.path().join("o/runs.csv")).unwrap();
    assert!(runs.lines().skip(1).all(|r| r.split(',').nth(2) == Some("0.4")));
}

#[test]
fn sweep_expands_the_cross_product() {
    let dir = tempfile::tempdir().unwrap();
    let out = gradsim(
        &args(
            &["sweep", "--axis", "protocol=BGB,GRAB,P-GRAB,U-GRAB,UP-GRAB", "--axis", "p_f=0,0.4,0.8"],
            &["--out", "o", "--jobs", "2"],
        ),
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let agg = fs::read_to_string(dir.path().join("o/aggregate.csv")).unwrap();
    assert_eq!(agg.lines().count(), 1 + 15);
    let runs = fs::read_to_string(dir.path().join("o/runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 1 + 30);
}

#[test]
fn output_does_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    for (jobs, name) in [("1", "a"), ("3", "b")] {
        let out = gradsim(
            &args(&["sweep", "--axis", "protocol=GRAB,U-GRAB"], &["--out", name, "--jobs", jobs]),
            dir.path(),
        );
        assert!(out.status.success(), "{}", stderr(&out));
    }
    for f in ["runs.csv", "aggregate.csv"] {
        assert_eq!(
            fs::read(dir.path().join("a").join(f)).unwrap(),
            fs::read(dir.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn report_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let out = gradsim(&args(&["sweep", "--axis", "p_f=0,0.8"], &["--out", "o"]), dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let first = gradsim(&["report", "o/aggregate.csv", "--out", "r1"], dir.path());
    assert!(first.status.success(), "{}", stderr(&first));
    let second = gradsim(&["report", "r1/long.csv", "--out", "r2"], dir.path());
    assert!(second.status.success(), "{}", stderr(&second));
    assert_eq!(
        fs::read(dir.path().join("r1/long.csv")).unwrap(),
        fs::read(dir.path().join("r2/long.csv")).unwrap()
    );
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn dumps_describe_one_replication() {
    let dir = tempfile::tempdir().unwrap();
    let out = gradsim(&args(&["dump-topology", "--set", "protocol=P-GRAB"], &[]), dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("node,x,y,Q,N_i,delta"));
    assert_eq!(lines.count(), 40);

    let out = gradsim(&args(&["dump-trace"], &["--out", "t"]), dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let events = fs::read_to_string(dir.path().join("t/events.csv")).unwrap();
    assert!(events.starts_with("time,seq,kind,node,detail\n"));
    let decisions = fs::read_to_string(dir.path().join("t/decisions.csv")).unwrap();
    assert!(decisions.starts_with("time,node,policy,eligible,action,p_fw,c_n,alpha_n,r_n\n"));
}
