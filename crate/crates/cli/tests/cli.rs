//! End-to-end runs of the `lerw` subcommands.

use std::path::Path;
use std::process::Command;

use clap::Parser;
use lerw_cli::{execute, Cli};
use serde_json::Value;

fn run_in(out: &Path, args: &[&str]) -> (lerw_cli::Report, std::path::PathBuf) {
    let mut argv = vec!["lerw", "--out", out.to_str().unwrap()];
    argv.extend_from_slice(args);
    execute(&Cli::try_parse_from(argv).unwrap()).unwrap()
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn gasket_export_has_fifteen_vertices() {
    let tmp = tempfile::tempdir().unwrap();
    let (report, dir) = run_in(tmp.path(), &["graph", "--gasket", "-m", "2"]);
    assert!(report.passed());
    let vertices = std::fs::read_to_string(dir.join("vertices.txt")).unwrap();
    let edges = std::fs::read_to_string(dir.join("edges.txt")).unwrap();
    assert_eq!(vertices.lines().count(), 15);
    assert_eq!(edges.lines().count(), 27);
    assert_eq!(summary(&dir)["results"]["nested_sizes"], serde_json::json!([3, 6, 15]));
}

#[test]
fn carpet_corner_ratio_table() {
    let tmp = tempfile::tempdir().unwrap();
    let (report, dir) = run_in(tmp.path(), &["resist", "--carpet", "standard", "-m", "1..3", "--pair", "corners"]);
    assert!(report.passed());
    let table = std::fs::read_to_string(dir.join("resistance.csv")).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[1].contains(",13/7,"));
}

#[test]
fn gasket_ratios_are_constant() {
    let tmp = tempfile::tempdir().unwrap();
    let (report, dir) = run_in(tmp.path(), &["resist", "--gasket", "-m", "1..4", "--expect-constant"]);
    assert!(report.passed());
    let table = std::fs::read_to_string(dir.join("resistance.csv")).unwrap();
    assert_eq!(table.matches(",5/3,").count(), 3);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("run.json");
    std::fs::write(&config, r#"{ "gasket": true, "level": 1, "samples": 50, "seed": 5 }"#).unwrap();
    let (_, dir) = run_in(tmp.path(), &["simulate", "--config", config.to_str().unwrap(), "--seed", "9"]);
    let s = summary(&dir);
    assert_eq!(s["seed"], 9);
    assert_eq!(s["config"]["samples"], 50);
    assert_eq!(s["config"]["level"], 1);
    assert_eq!(s["config"]["to"], serde_json::json!(["q2", "q3"]));
}

#[test]
fn exact_law_of_the_escape_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let chain = tmp.path().join("escape.txt");
    std::fs::write(&chain, "a b c\n0 1/2 1/2\n1/2 0 1/2\n0 0 1\nabsorbing c\n").unwrap();
    let (report, dir) = run_in(
        tmp.path(),
        &["exact-law", "--chain", chain.to_str().unwrap(), "--to", "c", "--pipeline", "refine", "--sets", "a;a,b,c", "--compare"],
    );
    assert!(report.passed());
    let law = std::fs::read_to_string(dir.join("law.txt")).unwrap();
    // Leaving a directly has probability 2/3, via b 1/3, up to the tail.
    assert!(law.lines().any(|l| l.starts_with("a c\t")));
    assert!(law.lines().any(|l| l.starts_with("a b c\t")));
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    let runs = [
        vec!["simulate", "--carpet", "standard", "-m", "1", "-n", "2000", "--seed", "4"],
        vec!["verify-green", "--instances", "40", "--perm-instances", "10", "--seed", "4"],
        vec!["verify-theorem1", "--chains", "4", "--max-states", "3", "--seed", "4"],
        vec!["converge", "--gasket", "-m", "1..2", "-n", "300", "--seed", "4"],
    ];
    for args in runs {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let mut one = args.clone();
        one.extend(["--workers", "1"]);
        let mut eight = args.clone();
        eight.extend(["--workers", "8"]);
        let (ra, da) = run_in(a.path(), &one);
        let (_, db) = run_in(b.path(), &eight);
        for (name, _) in ra.files.iter().chain([("summary.json".to_string(), String::new())].iter()) {
            let x = std::fs::read(da.join(name)).unwrap();
            let y = std::fs::read(db.join(name)).unwrap();
            assert_eq!(x, y, "{} differs for {args:?}", name);
        }
    }
}

fn binary(args: &[&str], out: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_lerw"))
        .args(args)
        .env("LERW_OUT_DIR", out)
        .output()
        .unwrap()
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let ok = binary(&["verify-theorem1", "--chains", "3", "--max-states", "3", "--seed", "1"], tmp.path());
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("seed: 1"));

    let fault = binary(
        &["verify-theorem1", "--chains", "6", "--max-states", "4", "--seed", "1", "--inject-fault"],
        tmp.path(),
    );
    assert_eq!(fault.status.code(), Some(1));
    let counterexample = tmp.path().join("verify-theorem1").join("counterexample.txt");
    assert!(std::fs::read_to_string(counterexample).unwrap().contains("exceeds tails"));

    assert_eq!(binary(&["graph"], tmp.path()).status.code(), Some(2));
    assert_eq!(binary(&["nonsense"], tmp.path()).status.code(), Some(2));
    assert_eq!(binary(&["resist", "--gasket", "-m", "3..1"], tmp.path()).status.code(), Some(2));

    let drawn = binary(&["simulate", "--gasket", "-m", "1", "-n", "10"], tmp.path());
    assert_eq!(drawn.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&drawn.stdout).contains("(drawn)"));
}
