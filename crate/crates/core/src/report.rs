//! Result-table emission: CSV, markdown and JSON.
//!
//! Output is byte-stable for a fixed input: fixed-precision decimal
//! formatting, deterministic row order (the cells arrive sorted).

use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

use crate::error::Error;
use crate::metrics::EvalReport;
use crate::scenario::{CellStats, ComparisonOutcome, MeanStd, ScenarioOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::InvalidInput(format!(
                "unknown report format '{other}' (expected csv, markdown or json)"
            ))),
        }
    }
}

fn pm(m: MeanStd) -> String {
    format!("{:.2}±{:.2}", m.mean, m.std)
}

/// Per-cell experiment table in the `OBS | Goals | Acc | Prec | Rec |
/// F-score` layout, one row per `(observability, goal-count)` cell.
pub fn cells_markdown(cells: &[CellStats]) -> String {
    let mut out = String::new();
    out.push_str("| OBS | Goals | Acc | Prec | Rec | F-score |\n");
    out.push_str("|-----|-------|-----|------|-----|---------|\n");
    for c in cells {
        writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} |",
            c.observability,
            c.goals,
            pm(c.accuracy),
            pm(c.precision),
            pm(c.recall),
            pm(c.fscore),
        )
        .expect("string write");
    }
    out
}

pub fn cells_csv(cells: &[CellStats]) -> String {
    let mut out = String::from(
        "obs,goals,runs,acc_mean,acc_std,prec_mean,prec_std,rec_mean,rec_std,fscore_mean,fscore_std\n",
    );
    for c in cells {
        writeln!(
            out,
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            c.observability,
            c.goals,
            c.runs,
            c.accuracy.mean,
            c.accuracy.std,
            c.precision.mean,
            c.precision.std,
            c.recall.mean,
            c.recall.std,
            c.fscore.mean,
            c.fscore.std,
        )
        .expect("string write");
    }
    out
}

pub fn cells_json(cells: &[CellStats]) -> String {
    serde_json::to_string_pretty(cells).expect("cell serialization cannot fail")
}

pub fn emit_cells(cells: &[CellStats], format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => cells_csv(cells),
        ReportFormat::Markdown => cells_markdown(cells),
        ReportFormat::Json => cells_json(cells),
    }
}

pub fn eval_report(report: &EvalReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => format!(
            "{}\n{}\n",
            EvalReport::csv_header(),
            report.to_csv_row()
        ),
        ReportFormat::Markdown => {
            let mut out = String::new();
            out.push_str("| Episodes | Acc | Prec | Rec | F-score |\n");
            out.push_str("|----------|-----|------|-----|---------|\n");
            writeln!(
                out,
                "| {} | {:.2} | {:.2} | {:.2} | {:.2} |",
                report.episodes, report.accuracy, report.precision, report.recall, report.fscore
            )
            .expect("string write");
            out
        }
        ReportFormat::Json => {
            serde_json::to_string_pretty(report).expect("report serialization cannot fail")
        }
    }
}

#[derive(Serialize)]
struct TimingSummary {
    recognizer: String,
    domain_learning_us: u64,
    goals_adaptation_us: Vec<u64>,
    inference_us: Vec<u64>,
}

fn timing_summary(outcome: &ScenarioOutcome) -> TimingSummary {
    let mut adaptation = Vec::new();
    let mut inference = Vec::new();
    for run in &outcome.runs {
        adaptation.extend(
            run.timings
                .goals_adaptation
                .iter()
                .map(|d| d.as_micros() as u64),
        );
        inference.extend(run.timings.inference.iter().map(|d| d.as_micros() as u64));
    }
    TimingSummary {
        recognizer: outcome.recognizer.to_string(),
        domain_learning_us: outcome.domain_learning.as_micros() as u64,
        goals_adaptation_us: adaptation,
        inference_us: inference,
    }
}

pub fn scenario_json(outcome: &ScenarioOutcome) -> String {
    #[derive(Serialize)]
    struct Doc<'a> {
        name: &'a str,
        recognizer: String,
        cells: &'a [CellStats],
        report: &'a Option<EvalReport>,
        timings: TimingSummary,
    }
    serde_json::to_string_pretty(&Doc {
        name: &outcome.name,
        recognizer: outcome.recognizer.to_string(),
        cells: &outcome.cells,
        report: &outcome.report,
        timings: timing_summary(outcome),
    })
    .expect("outcome serialization cannot fail")
}

/// Human-oriented comparison: the two experiment tables plus phase timings
/// and the transfer-vs-retrain adaptation ratio.
pub fn comparison_markdown(cmp: &ComparisonOutcome) -> String {
    let mut out = String::new();
    for (label, outcome) in [("gatling", &cmp.gatling), ("graql", &cmp.graql)] {
        writeln!(out, "## {label}\n").expect("string write");
        out.push_str(&cells_markdown(&outcome.cells));
        let t = timing_summary(outcome);
        let adapt_total: u64 = t.goals_adaptation_us.iter().sum();
        let infer_total: u64 = t.inference_us.iter().sum();
        writeln!(
            out,
            "\ndomain learning: {} us; goals adaptation: {} us over {} events; inference: {} us over {} events\n",
            t.domain_learning_us,
            adapt_total,
            t.goals_adaptation_us.len(),
            infer_total,
            t.inference_us.len(),
        )
        .expect("string write");
    }
    match (
        cmp.gatling_adapt_per_goal,
        cmp.graql_adapt_per_goal,
        cmp.adaptation_ratio,
    ) {
        (Some(g), Some(q), Some(r)) => {
            writeln!(
                out,
                "adaptation per dynamic goal: gatling {} us, graql {} us, ratio {:.6}",
                g.as_micros(),
                q.as_micros(),
                r
            )
            .expect("string write");
        }
        _ => out.push_str("adaptation ratio unavailable (no goal-set events)\n"),
    }
    out
}

pub fn comparison_json(cmp: &ComparisonOutcome) -> String {
    #[derive(Serialize)]
    struct Doc<'a> {
        gatling: TimingSummary,
        graql: TimingSummary,
        gatling_cells: &'a [CellStats],
        graql_cells: &'a [CellStats],
        gatling_adapt_per_goal_us: Option<u64>,
        graql_adapt_per_goal_us: Option<u64>,
        adaptation_ratio: Option<f64>,
        truths_identical: bool,
    }
    serde_json::to_string_pretty(&Doc {
        gatling: timing_summary(&cmp.gatling),
        graql: timing_summary(&cmp.graql),
        gatling_cells: &cmp.gatling.cells,
        graql_cells: &cmp.graql.cells,
        gatling_adapt_per_goal_us: cmp.gatling_adapt_per_goal.map(|d| d.as_micros() as u64),
        graql_adapt_per_goal_us: cmp.graql_adapt_per_goal.map(|d| d.as_micros() as u64),
        adaptation_ratio: cmp.adaptation_ratio,
        truths_identical: cmp.truths_identical,
    })
    .expect("comparison serialization cannot fail")
}

pub fn comparison(cmp: &ComparisonOutcome, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => comparison_json(cmp),
        ReportFormat::Markdown => comparison_markdown(cmp),
        ReportFormat::Csv => {
            // two labelled CSV blocks
            let mut out = String::from("# gatling\n");
            out.push_str(&cells_csv(&cmp.gatling.cells));
            out.push_str("# graql\n");
            out.push_str(&cells_csv(&cmp.graql.cells));
            if let Some(r) = cmp.adaptation_ratio {
                writeln!(out, "# adaptation_ratio,{r:.6}").expect("string write");
            }
            out
        }
    }
}
