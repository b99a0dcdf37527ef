use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sugarlat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sugarlat"))
        .args(args)
        .env_remove("SUGARLAT_LOG")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("sim.toml");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL: &str = r#"
M = 20
MAXVISION = 4
INITIALPOPULATIONSIZE = 60

[engine]
plan = "tick;growback;movement_basic;death;replacement"
"#;

#[test]
fn same_seed_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let outs = ["a", "b"].map(|n| dir.path().join(n));
    for out in &outs {
        let o = sugarlat(&[
            "run",
            "--config",
            &cfg,
            "--seed",
            "7",
            "--steps",
            "100",
            "--snapshot-every",
            "10",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for file in ["metrics.csv", "snapshots.txt"] {
        let a = fs::read(outs[0].join(file)).unwrap();
        let b = fs::read(outs[1].join(file)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{file} differs");
    }
    let csv = fs::read_to_string(outs[0].join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 101);
}

#[test]
fn zero_steps_writes_only_the_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = sugarlat(&["run", "--steps", "0", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
    assert!(csv.starts_with("step,population,"));
}

#[test]
fn validate_prints_the_canonical_plan() {
    let o = sugarlat(&["validate", "--plan", " Tick ; GROWBACK;;movement_basic "]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "tick;growback;movement_basic");
}

#[test]
fn movement_with_combat_is_rejected() {
    let o = sugarlat(&["validate", "--plan", "tick;growback;movement_basic;combat"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("mutually exclusive"), "{}", stderr(&o));
}

#[test]
fn trade_without_spice_is_rejected() {
    let o = sugarlat(&["validate", "--plan", "tick;growback;movement_basic;trade"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("[spice]"), "{}", stderr(&o));
}

#[test]
fn bad_field_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "M = 10\nMAXVISION = 12\n");
    let o = sugarlat(&["run", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("MAXVISION"), "{}", stderr(&o));

    let cfg = write_config(dir.path(), "M = 10\nNOSUCHKEY = 1\n");
    let o = sugarlat(&["validate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("NOSUCHKEY"), "{}", stderr(&o));
}

#[test]
fn missing_terrain_is_a_config_error() {
    let o = sugarlat(&["validate", "--terrain", "/nonexistent/terrain.txt"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn terrain_file_is_used() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("flat.txt");
    let mut text = String::from("M=10\n");
    for _ in 0..10 {
        text.push_str("2 2 2 2 2 2 2 2 2 2\n");
    }
    fs::write(&path, text).unwrap();
    let cfg = write_config(
        dir.path(),
        "M = 10\nMAXVISION = 3\nINITIALPOPULATIONSIZE = 5\n[engine]\nterrain = \"flat.txt\"\n",
    );
    let out = dir.path().join("out");
    let o = sugarlat(&[
        "run",
        "--config",
        &cfg,
        "--steps",
        "1",
        "--snapshot-every",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let snaps = fs::read_to_string(out.join("snapshots.txt")).unwrap();
    assert!(
        snaps.contains("2 2 2 2 2 2 2 2 2 2"),
        "relative terrain path not resolved"
    );
}

#[test]
fn replay_continues_a_run_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let full = dir.path().join("full");
    let half = dir.path().join("half");
    let rest = dir.path().join("rest");
    let run = |steps: &str, out: &Path| {
        let o = sugarlat(&[
            "run",
            "--config",
            &cfg,
            "--seed",
            "3",
            "--steps",
            steps,
            "--snapshot-every",
            "1",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    };
    run("40", &full);
    run("20", &half);
    let o = sugarlat(&[
        "replay",
        half.join("snapshots.txt").to_str().unwrap(),
        "--config",
        &cfg,
        "--steps",
        "20",
        "--snapshot-every",
        "1",
        "--out",
        rest.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let full_csv = fs::read_to_string(full.join("metrics.csv")).unwrap();
    let rest_csv = fs::read_to_string(rest.join("metrics.csv")).unwrap();
    let tail: Vec<&str> = full_csv.lines().skip(21).collect();
    let resumed: Vec<&str> = rest_csv.lines().skip(1).collect();
    assert_eq!(tail, resumed);
    let full_snaps = fs::read_to_string(full.join("snapshots.txt")).unwrap();
    let rest_snaps = fs::read_to_string(rest.join("snapshots.txt")).unwrap();
    assert!(full_snaps.ends_with(&rest_snaps));
}

#[test]
fn checked_violation_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let wide = write_config(dir.path(), "M = 20\nMAXVISION = 6\nINITIALPOPULATIONSIZE = 60\n");
    let out = dir.path().join("out");
    let o = sugarlat(&[
        "run",
        "--config",
        &wide,
        "--steps",
        "0",
        "--snapshot-every",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    // the same agents under a tighter vision bound break an invariant
    let narrow = dir.path().join("narrow.toml");
    fs::write(&narrow, "M = 20\nMAXVISION = 2\nINITIALPOPULATIONSIZE = 60\n").unwrap();
    let snaps = out.join("snapshots.txt");
    let args = [
        "replay",
        snaps.to_str().unwrap(),
        "--config",
        narrow.to_str().unwrap(),
        "--steps",
        "1",
        "--out",
        out.to_str().unwrap(),
    ];
    let o = sugarlat(&[&args[..], &["--check"]].concat());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("vision"), "{}", stderr(&o));
    let o = sugarlat(&args);
    assert!(o.status.success(), "unchecked run should not stop: {}", stderr(&o));
}

#[test]
fn bench_prints_one_row_per_mode() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = sugarlat(&[
        "bench",
        "--config",
        &cfg,
        "--steps",
        "20",
        "--modes",
        "random_new_sweep",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 2);

    let o = sugarlat(&[
        "bench",
        "--config",
        &cfg,
        "--steps",
        "30",
        "--modes",
        "sync,random_new_sweep,sync",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows: Vec<Vec<String>> = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| l.split_whitespace().map(String::from).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    for r in [&rows[0], &rows[2]] {
        assert_eq!(r[0], "sync");
        assert!(r[2..].iter().all(|v| v.parse::<f64>().unwrap() == 0.0), "{r:?}");
    }
    assert!(rows[1][5].parse::<f64>().unwrap() > 0.0, "{:?}", rows[1]);
}
