//! The `cuspwalk` binary end to end on a small config.

use std::fs;
use std::path::Path;
use std::process::Command;

const SMALL: &str = r#"
experiments = ["tempered-gap", "escape"]
output_dir = "small"

[tempered_gap]
h = [0.4, 0.2]

[escape]
h = 0.2
n = 10
walkers = 2000
"#;

fn cuspwalk(root: &Path) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cuspwalk"));
    cmd.env("CUSPWALK_OUT", root).env("RUST_LOG", "warn");
    cmd
}

#[test]
fn run_plot_and_check() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    fs::write(&cfg, SMALL).unwrap();

    let out = cuspwalk(dir.path()).args(["--seed", "4", "--threads", "1", "run"]).arg(&cfg).output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}\n{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 3, "{stdout}");

    let results = dir.path().join("small");
    let csv = fs::read_to_string(results.join("tempered-gap.csv")).unwrap();
    assert!(csv.starts_with("# cuspwalk tempered-gap v1\ndensity,h,gap"));
    assert_eq!(csv.lines().count(), 2 + 4);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(results.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["escape"]["seed"], 4);
    assert_eq!(manifest["experiments"]["escape"]["outputs"][0], "escape.csv");
    assert!(manifest["experiments"]["tempered-gap"]["fits"]["slope_exp"]["value"].as_f64().unwrap() > 1.0);
    assert!(manifest["finished"].as_u64() >= manifest["started"].as_u64());
    assert!(!results.join("manifest.json.tmp").exists());

    let out = cuspwalk(dir.path())
        .args(["plot", "--x", "h", "--y", "gap", "--group", "density", "--loglog"])
        .arg(results.join("tempered-gap.csv"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let slopes = fs::read_to_string(results.join("tempered-gap.slope.txt")).unwrap();
    assert_eq!(slopes.lines().count(), 2);
    assert!(results.join("tempered-gap.loglog.dat").exists());

    let out = cuspwalk(dir.path()).args(["check", "--only", "escape"]).arg(&cfg).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("PASS escape"));
}

#[test]
fn same_seed_same_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    fs::write(&cfg, SMALL).unwrap();
    let mut tables = Vec::new();
    for (sub, threads) in [("a", "1"), ("b", "2")] {
        let out = cuspwalk(dir.path())
            .args(["--seed", "9", "--threads", threads, "run", "--out"])
            .arg(dir.path().join(sub))
            .arg(&cfg)
            .output()
            .unwrap();
        assert!(out.status.success());
        let mut files: Vec<_> = fs::read_dir(dir.path().join(sub))
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        files.sort();
        tables.push(files.iter().map(|p| fs::read(p).unwrap()).collect::<Vec<_>>());
    }
    assert_eq!(tables[0].len(), 2);
    assert_eq!(tables[0], tables[1]);
}

#[test]
fn bad_config_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[scan]\nk_max = \"eight\"\n").unwrap();
    let out = cuspwalk(dir.path()).arg("check").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("k_max") && err.contains("bad.toml"), "{err}");

    let out = cuspwalk(dir.path())
        .args(["plot", "--x", "h", "--y", "nope"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
