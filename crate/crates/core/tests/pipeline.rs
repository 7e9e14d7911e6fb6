//! End-to-end integration over the published scenario files.

use std::path::PathBuf;

use gatling_core::scenario::{compare, run_scenario, Recognizer, Scenario};

fn scenario(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name);
    Scenario::from_toml_path(&path).expect("published scenario parses")
}

#[test]
fn example_scenario_saturates_at_half_observability() {
    // one goal-set event with three dynamic goals, ten generated traces at
    // observability 0.5: every metric comes out 1.0
    let out = run_scenario(&scenario("example1_empty8.toml")).unwrap();
    let report = out.report.expect("episodes present");
    assert_eq!(report.episodes, 10);
    assert!(
        report.all_metrics_are(1.0),
        "expected full marks, got acc {:.2} prec {:.2} rec {:.2} f {:.2}",
        report.accuracy,
        report.precision,
        report.recall,
        report.fscore
    );
}

#[test]
fn scenario_outputs_are_reproducible() {
    let s = scenario("example1_empty8.toml");
    let a = run_scenario(&s).unwrap();
    let b = run_scenario(&s).unwrap();
    assert_eq!(a.results_json(), b.results_json());
    assert_eq!(a.report, b.report);
    assert_eq!(
        gatling_core::report::cells_csv(&a.cells),
        gatling_core::report::cells_csv(&b.cells)
    );
}

#[test]
fn comparison_shares_fixtures_and_reports_ratio() {
    let cmp = compare(&scenario("compare_empty8.toml")).unwrap();
    assert!(cmp.truths_identical);
    let ratio = cmp.adaptation_ratio.expect("goal-set events present");
    assert!(ratio > 0.0);
    // the markdown report carries both tables and the ratio line
    let md = gatling_core::report::comparison_markdown(&cmp);
    assert!(md.contains("## gatling"));
    assert!(md.contains("## graql"));
    assert!(md.contains("adaptation per dynamic goal"));
}

#[test]
fn all_published_scenarios_parse_and_validate() {
    for name in [
        "table1_empty8.toml",
        "table2_crossing9.toml",
        "saturation_empty8.toml",
        "compare_empty8.toml",
        "example1_empty8.toml",
    ] {
        let s = scenario(name);
        s.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn no_learning_during_inference_for_either_recognizer() {
    let base = scenario("example1_empty8.toml");
    for recognizer in [Recognizer::Gatling, Recognizer::Graql] {
        let out = run_scenario(&Scenario {
            recognizer,
            ..base.clone()
        })
        .unwrap();
        for run in &out.runs {
            assert_eq!(
                run.q_updates_during_inference, 0,
                "{recognizer}: q-updates observed during inference"
            );
        }
    }
}
