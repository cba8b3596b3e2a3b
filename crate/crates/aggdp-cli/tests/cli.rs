//! End-to-end checks of the `aggdp` binary: exit codes, the JSON envelope,
//! seed resolution, and byte-stable artifacts.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};
use std::sync::atomic::{AtomicUsize, Ordering};

use serde_json::Value;

static DIR_SEQ: AtomicUsize = AtomicUsize::new(0);

/// A fresh command for the built binary, with the seed variable cleared so
/// tests control it explicitly.
fn aggdp() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_aggdp"));
    cmd.env_remove("AGGDP_SEED");
    cmd
}

/// A unique scratch directory under the system temp dir.
fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!(
        "aggdp-cli-{tag}-{}-{}",
        std::process::id(),
        DIR_SEQ.fetch_add(1, Ordering::Relaxed)
    ));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_file(dir: &PathBuf, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "expected success, got {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout should be a JSON envelope")
}

/// Two states, discount 0.5: state 1 pays 1 and moves to state 2, which pays
/// nothing and moves back.  The fixed point is J = (4/3, 2/3).
const TWO_STATE: &str = r#"{
  "n": 2,
  "alpha": 0.5,
  "states": [
    {"controls": [{"transitions": [[2, 1.0, 1.0]]}]},
    {"controls": [{"transitions": [[1, 1.0, 0.0]]}]}
  ]
}"#;

/// Same shape with a transition row whose probabilities sum to 0.9.
const BAD_ROW: &str = r#"{
  "n": 2,
  "alpha": 0.5,
  "states": [
    {"controls": [{"transitions": [[2, 0.9, 1.0]]}]},
    {"controls": [{"transitions": [[1, 1.0, 0.0]]}]}
  ]
}"#;

const ONE_CELL_SCHEME: &str = r#"{"q": 1, "disagg_sets": [[1, 2]]}"#;

#[test]
fn solve_exact_prints_a_seeded_envelope() {
    let dir = scratch("solve-exact");
    let model = write_file(&dir, "model.json", TWO_STATE);

    let out = aggdp().args(["solve-exact", "--model"]).arg(&model).output().unwrap();
    let envelope = stdout_json(&out);

    assert_eq!(envelope["command"], "solve-exact");
    assert_eq!(envelope["seed"], 0);
    assert!(envelope["version"].is_string());
    assert!(envelope["config"]["model"].is_string());

    let values = envelope["result"]["values"].as_array().unwrap();
    assert_eq!(values.len(), 2);
    assert!((values[0].as_f64().unwrap() - 4.0 / 3.0).abs() < 1e-6);
    assert!((values[1].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-6);
}

#[test]
fn malformed_rows_exit_two_and_name_the_offender() {
    let dir = scratch("bad-row");
    let model = write_file(&dir, "model.json", BAD_ROW);

    let out = aggdp().args(["solve-exact", "--model"]).arg(&model).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty(), "no envelope on failure");

    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.lines().count(), 1, "errors are a single line: {stderr:?}");
    assert!(stderr.starts_with("error: "), "got {stderr:?}");
    assert!(stderr.contains("state 1"), "error should name the state: {stderr:?}");
    assert!(stderr.contains("control 0"), "error should name the control: {stderr:?}");
}

#[test]
fn usage_errors_exit_two_and_help_exits_zero() {
    let out = aggdp().args(["solve-exact", "--no-such-flag"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.starts_with("error: "), "got {stderr:?}");

    let help = aggdp().arg("--help").output().unwrap();
    assert_eq!(help.status.code(), Some(0));
    assert!(!help.stdout.is_empty());
}

#[test]
fn seed_resolution_prefers_the_flag_over_the_environment() {
    let dir = scratch("seed");
    let model = write_file(&dir, "model.json", TWO_STATE);
    let scheme = write_file(&dir, "scheme.json", ONE_CELL_SCHEME);

    let base: Vec<_> = ["lstd", "--samples", "500"].iter().map(|s| s.to_string()).collect();

    let mut from_env = aggdp();
    from_env.args(&base).arg("--model").arg(&model).arg("--scheme").arg(&scheme);
    from_env.env("AGGDP_SEED", "17");
    let envelope = stdout_json(&from_env.output().unwrap());
    assert_eq!(envelope["seed"], 17, "environment seed should apply");

    let mut from_flag = aggdp();
    from_flag.args(&base).arg("--model").arg(&model).arg("--scheme").arg(&scheme);
    from_flag.env("AGGDP_SEED", "17").args(["--seed", "3"]);
    let envelope = stdout_json(&from_flag.output().unwrap());
    assert_eq!(envelope["seed"], 3, "an explicit flag should win");
}

#[test]
fn matched_seeds_reproduce_sampled_runs_byte_for_byte() {
    let dir = scratch("repro");
    let model = write_file(&dir, "model.json", TWO_STATE);
    let scheme = write_file(&dir, "scheme.json", ONE_CELL_SCHEME);

    let run = || {
        aggdp()
            .args(["lstd", "--samples", "2000", "--seed", "9", "--model"])
            .arg(&model)
            .arg("--scheme")
            .arg(&scheme)
            .output()
            .unwrap()
    };
    let first = run();
    let second = run();
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout, "same seed, same bytes");

    let envelope = stdout_json(&first);
    assert_eq!(envelope["command"], "lstd");
    assert_eq!(envelope["result"]["r"].as_array().unwrap().len(), 1);
}

#[test]
fn bench_artifacts_are_byte_identical_across_runs() {
    let out_a = scratch("bench-a");
    let out_b = scratch("bench-b");

    let run = |dir: &PathBuf| {
        let out = aggdp()
            .args(["ssp-bench", "--n", "20", "--case", "a", "--q-list", "2,5", "--out"])
            .arg(dir)
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    };
    run(&out_a);
    run(&out_b);

    let result_a = fs::read(out_a.join("result.json")).unwrap();
    let result_b = fs::read(out_b.join("result.json")).unwrap();
    assert_eq!(result_a, result_b, "result.json must not depend on the run");

    let table_a = fs::read_to_string(out_a.join("table.csv")).unwrap();
    let table_b = fs::read_to_string(out_b.join("table.csv")).unwrap();
    assert_eq!(table_a, table_b, "table.csv must not depend on the run");

    let mut lines = table_a.lines();
    let header = lines.next().unwrap();
    assert_eq!(header, "state,J_mu,V1_fit,V0_fit,Jtilde_q2,Jtilde_q5");
    assert_eq!(lines.count(), 20, "one row per state");

    // The flat chain prices every state at exactly 1, and every aggregate
    // fit should land within solver tolerance of that.
    for line in table_a.lines().skip(1) {
        for field in line.split(',').skip(4) {
            let fit: f64 = field.parse().unwrap();
            assert!((fit - 1.0).abs() < 1e-9, "fit {fit} strays from 1");
        }
    }
}

#[test]
fn aggregate_solve_reports_one_value_per_cell() {
    let dir = scratch("aggregate");
    let model = write_file(&dir, "model.json", TWO_STATE);
    let scheme = write_file(&dir, "scheme.json", ONE_CELL_SCHEME);

    let out = aggdp()
        .args(["solve-aggregate", "--model"])
        .arg(&model)
        .arg("--scheme")
        .arg(&scheme)
        .output()
        .unwrap();
    let envelope = stdout_json(&out);

    assert_eq!(envelope["command"], "solve-aggregate");
    let r = envelope["result"]["r"].as_array().unwrap();
    assert_eq!(r.len(), 1);
    // One cell lumps both states; its value sits between the two exact ones.
    let r0 = r[0].as_f64().unwrap();
    assert!(r0 > 2.0 / 3.0 - 1e-9 && r0 < 4.0 / 3.0 + 1e-9, "got {r0}");
}

#[test]
fn check_bounds_summarises_violations() {
    let out = aggdp()
        .args(["check-bounds", "--instances", "10", "--max-states", "8", "--jobs", "2"])
        .output()
        .unwrap();
    let envelope = stdout_json(&out);

    assert_eq!(envelope["command"], "check-bounds");
    assert_eq!(envelope["result"]["violations"], 0);
    assert_eq!(envelope["result"]["all_within_bound"], true);
    assert_eq!(envelope["result"]["instances"].as_array().unwrap().len(), 10);
}
