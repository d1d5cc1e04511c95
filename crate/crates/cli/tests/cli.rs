//! End-to-end runs of the `regulus` binary.

use std::path::PathBuf;
use std::process::{Command, Output};

use regulus_core::mc_harness::{read_records, TailMode};
use regulus_core::oracles::exhaustive_small_graph;
use serde_json::Value;

fn regulus(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_regulus"))
        .args(args)
        .env_remove("REGULUS_SEED")
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_str(&stdout(out)).unwrap()
}

fn tmp(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    let _ = std::fs::remove_file(&path);
    path
}

#[test]
fn exponent_matches_closed_form() {
    let v = json(&regulus(&[
        "theory",
        "g-exponent",
        "--A",
        "2",
        "--lambda",
        "0",
        "--d",
        "3",
    ]));
    assert_eq!(v["op"], "g-exponent");
    let cubic = 8.0 * 2.0 * 1.0 / (8.0 * 9.0);
    assert!((v["value"].as_f64().unwrap() - cubic).abs() < 1e-11, "{v}");
}

#[test]
fn exact_ballot_prints_a_fraction() {
    let v = json(&regulus(&[
        "theory",
        "ballot-generic",
        "--t",
        "2",
        "--k",
        "1",
        "--h",
        "1",
        "--up",
        "1",
        "--p",
        "1/3",
    ]));
    let tail_prob = 3.0 * (1.0 / 9.0) * (2.0 / 3.0);
    let bound = 3.0 * (1.0 / 3.0) * tail_prob;
    assert_eq!(v["exact"], "2/9");
    assert!((v["value"].as_f64().unwrap() - bound).abs() < 1e-11);
}

#[test]
fn small_tail_estimate_is_near_exact_value() {
    let out = regulus(&[
        "--seed",
        "3",
        "--no-timing",
        "tail",
        "--d",
        "3",
        "--n",
        "4",
        "--p",
        "0.5",
        "--threshold",
        "2.5",
        "--trials",
        "100000",
        "--format",
        "json",
    ]);
    let v = json(&out);
    let est = &v["records"][0];
    let want = exhaustive_small_graph(4, 3)
        .unwrap()
        .evaluate(0.5, false)
        .unwrap()
        .max
        .tail_above(2.5);
    let (lo, hi) = (
        est["ci_lo"].as_f64().unwrap(),
        est["ci_hi"].as_f64().unwrap(),
    );
    let half = (hi - lo) / 2.0;
    assert!(
        (est["p_hat"].as_f64().unwrap() - want).abs() <= 2.0 * half,
        "{est} vs {want}"
    );
}

#[test]
fn identity_suite_passes_with_zero_exit() {
    let out = regulus(&[
        "verify", "lemma21", "--d", "3", "--n", "200", "--lambda", "0", "--trials", "300",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["verdict"], "PASS");
}

#[test]
fn conflicting_parameters_exit_with_usage_code() {
    let out = regulus(&[
        "tail", "--d", "3", "--n", "100", "--p", "0.5", "--lambda", "0", "--A", "1",
    ]);
    assert_eq!(out.status.code(), Some(64));
    let out = regulus(&["tail", "--d", "3", "--n", "5", "--p", "0.5", "--A", "1"]);
    assert_eq!(out.status.code(), Some(64));
}

#[test]
fn infeasible_threshold_exits_with_its_own_code() {
    let out = regulus(&[
        "tail",
        "--d",
        "3",
        "--n",
        "4",
        "--p",
        "0.5",
        "--threshold",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(65));
}

#[test]
fn csv_output_round_trips_and_appends() {
    let path = tmp("tail.csv");
    let p = path.to_str().unwrap();
    for mode in ["vertex", "max"] {
        let out = regulus(&[
            "--out",
            p,
            "--no-timing",
            "tail",
            "--d",
            "3",
            "--n",
            "100",
            "--lambda",
            "0",
            "--A",
            "0.5",
            "--mode",
            mode,
            "--trials",
            "500",
        ]);
        assert!(out.status.success());
    }
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("d,")).count(), 1);
    let records = read_records(&text).unwrap();
    assert_eq!(records.len(), 2);
    assert_eq!(
        (records[0].mode, records[1].mode),
        (TailMode::Vertex, TailMode::Max)
    );
    assert!(records
        .iter()
        .all(|r| r.trials == 500 && r.elapsed_s == 0.0));
    assert!(records[0].successes <= records[1].successes);
}

#[test]
fn json_tail_matches_csv_tail() {
    let args = [
        "--no-timing",
        "tail",
        "--d",
        "3",
        "--n",
        "60",
        "--p",
        "0.5",
        "--A",
        "1",
        "--trials",
        "400",
    ];
    let csv = stdout(&regulus(&args));
    let rec = read_records(&csv).unwrap().remove(0);
    let mut with_json = args.to_vec();
    with_json.extend(["--format", "json"]);
    let v = json(&regulus(&with_json));
    assert_eq!(v["records"][0]["successes"].as_u64(), Some(rec.successes));
    assert_eq!(v["records"][0]["p_hat"].as_f64(), Some(rec.p_hat));
}

#[test]
fn seed_fixes_the_output() {
    let args = [
        "--seed",
        "9",
        "--no-timing",
        "simulate",
        "--d",
        "3",
        "--n",
        "300",
        "--lambda",
        "0",
        "--full",
    ];
    assert_eq!(stdout(&regulus(&args)), stdout(&regulus(&args)));
    let other = [
        "--seed",
        "10",
        "--no-timing",
        "simulate",
        "--d",
        "3",
        "--n",
        "300",
        "--lambda",
        "0",
        "--full",
    ];
    assert_ne!(stdout(&regulus(&args)), stdout(&regulus(&other)));
}

#[test]
fn seed_falls_back_to_environment() {
    let args = [
        "--no-timing",
        "tail",
        "--d",
        "3",
        "--n",
        "100",
        "--lambda",
        "0",
        "--A",
        "0.5",
        "--trials",
        "300",
    ];
    let from_env = Command::new(env!("CARGO_BIN_EXE_regulus"))
        .args(args)
        .env("REGULUS_SEED", "42")
        .output()
        .unwrap();
    let mut flagged = vec!["--seed", "42"];
    flagged.extend(args);
    assert_eq!(stdout(&from_env), stdout(&regulus(&flagged)));
}

#[test]
fn matching_dump_replays_in_fixed_mode() {
    let path = tmp("matching.txt");
    let p = path.to_str().unwrap();
    let first = json(&regulus(&[
        "--seed",
        "4",
        "--no-timing",
        "simulate",
        "--d",
        "3",
        "--n",
        "50",
        "--p",
        "0.5",
        "--full",
        "--dump-matching",
        p,
    ]));
    let replay = json(&regulus(&[
        "--no-timing",
        "simulate",
        "--d",
        "3",
        "--n",
        "50",
        "--p",
        "0.5",
        "--full",
        "--matching",
        p,
    ]));
    assert_eq!(
        first["result"]["max_component_size"],
        replay["result"]["max_component_size"]
    );
}
