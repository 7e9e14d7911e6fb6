//! CLI integration: verbs, file formats, exit codes and error classes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn gatling() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gatling"))
}

fn run(args: &[&str], cwd: &Path) -> Output {
    gatling()
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn tempdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("gatling-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).expect("create temp dir");
    dir
}

#[test]
fn train_adapt_gen_infer_round_trip() {
    let dir = tempdir("loop");
    let out = run(
        &[
            "train",
            "--domain",
            "empty:8",
            "--episodes",
            "40000",
            "--seed",
            "0",
            "--out",
            "base.json",
        ],
        &dir,
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(dir.join("base.json").exists());

    let out = run(
        &[
            "adapt",
            "--domain",
            "empty:8",
            "--library",
            "base.json",
            "--goal",
            "4,6",
            "--goal",
            "6,4",
            "--out",
            "adapted.json",
        ],
        &dir,
    );
    assert!(out.status.success(), "{}", stderr(&out));

    let out = run(
        &[
            "gen-traces",
            "--domain",
            "empty:8",
            "--goal",
            "4,6",
            "--count",
            "1",
            "--observability",
            "0.6,1.0",
            "--seed",
            "9",
            "--out-dir",
            "traces",
        ],
        &dir,
    );
    assert!(out.status.success(), "{}", stderr(&out));

    let out = run(
        &[
            "infer",
            "--domain",
            "empty:8",
            "--library",
            "adapted.json",
            "--trace",
            "traces/trace-4-6-obs0.6-0.json",
        ],
        &dir,
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let result: serde_json::Value = serde_json::from_str(&stdout(&out)).expect("json output");
    assert_eq!(result["predicted"], serde_json::json!([4, 6]));
    assert!(result["scores"].as_array().unwrap().len() == 2);
}

fn write_tiny_scenario(dir: &Path) -> PathBuf {
    let path = dir.join("tiny.toml");
    std::fs::write(
        &path,
        r#"
name = "tiny"
seed = 5
runs = 2

[domain]
kind = "empty"
size = 6

[train]
episodes = 3000

[[events]]
kind = "goals"
goals = [[2, 4], [4, 2]]

[[events]]
kind = "observe"
goal = "each"
observability = 0.5
"#,
    )
    .expect("write scenario");
    path
}

#[test]
fn run_emits_byte_stable_reports() {
    let dir = tempdir("run");
    let path = write_tiny_scenario(&dir);
    let args = [
        "run",
        "--scenario",
        path.to_str().unwrap(),
        "--format",
        "markdown",
    ];
    let first = run(&args, &dir);
    assert!(first.status.success(), "{}", stderr(&first));
    let second = run(&args, &dir);
    assert_eq!(stdout(&first), stdout(&second));
    assert!(stdout(&first).starts_with("| OBS | Goals | Acc | Prec | Rec | F-score |"));

    // csv: header plus one row per cell
    let csv = run(
        &[
            "run",
            "--scenario",
            path.to_str().unwrap(),
            "--format",
            "csv",
        ],
        &dir,
    );
    let text = stdout(&csv);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2, "{text}");
    assert!(lines[0].starts_with("obs,goals,runs,"));
}

#[test]
fn compare_reports_ratio() {
    let dir = tempdir("compare");
    let path = write_tiny_scenario(&dir);
    let out = run(
        &[
            "compare",
            "--scenario",
            path.to_str().unwrap(),
            "--format",
            "json",
        ],
        &dir,
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).expect("json output");
    assert_eq!(doc["truths_identical"], serde_json::json!(true));
    assert!(doc["adaptation_ratio"].as_f64().unwrap() > 0.0);
}

#[test]
fn error_classes_are_machine_readable() {
    let dir = tempdir("errors");

    // undersized grid
    let out = run(
        &[
            "train",
            "--domain",
            "empty:2",
            "--out",
            "x.json",
        ],
        &dir,
    );
    assert!(!out.status.success());
    assert!(
        stderr(&out).contains("error[invalid-size]"),
        "{}",
        stderr(&out)
    );

    // missing library file
    let out = run(
        &[
            "infer",
            "--domain",
            "empty:8",
            "--library",
            "nope.json",
            "--trace",
            "nope.json",
        ],
        &dir,
    );
    assert!(!out.status.success());
    assert!(stderr(&out).contains("error[io-error]"), "{}", stderr(&out));

    // observe before any goal set
    let bad = dir.join("bad.toml");
    std::fs::write(
        &bad,
        r#"
[domain]
kind = "empty"
size = 6

[[events]]
kind = "observe"
"#,
    )
    .unwrap();
    let out = run(
        &["run", "--scenario", bad.to_str().unwrap()],
        &dir,
    );
    assert!(!out.status.success());
    assert!(
        stderr(&out).contains("error[scenario-validation]"),
        "{}",
        stderr(&out)
    );

    // unknown report format
    let tiny = write_tiny_scenario(&dir);
    let out = run(
        &[
            "run",
            "--scenario",
            tiny.to_str().unwrap(),
            "--format",
            "yaml",
        ],
        &dir,
    );
    assert!(!out.status.success());
    assert!(
        stderr(&out).contains("error[invalid-input]"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn goal_on_wall_is_invalid_goal() {
    let dir = tempdir("wallgoal");
    let out = run(
        &[
            "train",
            "--domain",
            "empty:8",
            "--goal",
            "0,0",
            "--episodes",
            "10",
            "--out",
            "x.json",
        ],
        &dir,
    );
    assert!(!out.status.success());
    assert!(
        stderr(&out).contains("error[invalid-goal]"),
        "{}",
        stderr(&out)
    );
}
