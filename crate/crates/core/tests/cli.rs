use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("examples/configs")
        .join(name)
}

fn rbsde(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rbsde"))
        .args(args)
        .env("RBSDE_THREADS", "2")
        .output()
        .unwrap()
}

fn run(cmd: &str, cfg: &Path, out: &Path) -> Output {
    rbsde(&[
        cmd,
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--quiet",
    ])
}

#[test]
fn crossed_barriers_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("validate", &config("crossed_barriers.json"), dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("barrier order"));
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(
        rbsde(&["frobnicate", "--config", "x.json"]).status.code(),
        Some(1)
    );
    assert_eq!(rbsde(&["oracle"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    assert_eq!(run("oracle", &missing, dir.path()).status.code(), Some(1));
}

#[test]
fn malformed_config_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(
        &cfg,
        r#"{"horizon":1,"driver":"0","growth_k":1,"terminal":"x","colour":"red"}"#,
    )
    .unwrap();
    assert_eq!(run("validate", &cfg, dir.path()).status.code(), Some(2));
    fs::write(
        &cfg,
        r#"{"horizon":1,"driver":"0","growth_k":1,"terminal":"x","lower":"y"}"#,
    )
    .unwrap();
    assert_eq!(run("validate", &cfg, dir.path()).status.code(), Some(2));
}

#[test]
fn oracle_then_diagnose_on_put() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("american_put.json");
    let out = run("oracle", &cfg, dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let row: Vec<&str> = summary.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "oracle");
    let y0: f64 = row[4].parse().unwrap();
    assert!((y0 - 0.3692392104836181).abs() < 1e-12);

    assert_eq!(run("diagnose", &cfg, dir.path()).status.code(), Some(0));
    let sk = fs::read_to_string(dir.path().join("skorohod.csv")).unwrap();
    assert_eq!(sk.lines().count(), 6);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["command"], "diagnose");
    assert!(manifest["files"]
        .as_array()
        .unwrap()
        .iter()
        .any(|f| f["name"] == "skorohod.csv"));
}

#[test]
fn schedule_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = config("forced_double_barrier.json");
    assert_eq!(run("schedule", &cfg, a.path()).status.code(), Some(0));
    assert_eq!(run("schedule", &cfg, b.path()).status.code(), Some(0));
    for name in [
        "schedule.csv",
        "schedule.json",
        "convergence.json",
        "double_limit.csv",
    ] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
    let csv = fs::read_to_string(a.path().join("schedule.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "p,m,n,y0,e_supY2,e_intZ2,e_AT2,e_KT2,gap_vs_oracle,mono_viol_m,mono_viol_n"
    );
    assert_eq!(csv.lines().count(), 26);
    let ma: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.path().join("manifest.json")).unwrap()).unwrap();
    let mb: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(b.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(ma["config_hash"], mb["config_hash"]);
    assert_eq!(ma["files"], mb["files"]);
}

#[test]
fn mc_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.json");
    let text = fs::read_to_string(config("american_put.json"))
        .unwrap()
        .replace("\"steps\": 100", "\"steps\": 10")
        .replace("\"paths\": 20000", "\"paths\": 3000");
    fs::write(&cfg, text).unwrap();
    let read = |seed: &str| {
        let out = dir.path().join(seed);
        let o = rbsde(&[
            "mc",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--seed",
            seed,
            "--quiet",
        ]);
        assert_eq!(o.status.code(), Some(0));
        assert!(o.stdout.is_empty());
        fs::read_to_string(out.join("mc.csv")).unwrap()
    };
    let (a, b, c) = (read("1"), read("1"), read("2"));
    assert_eq!(a, b);
    assert_ne!(a, c);
}
