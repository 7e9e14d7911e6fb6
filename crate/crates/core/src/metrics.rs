//! Evaluation metrics over batches of recognition episodes.
//!
//! Accuracy is the fraction of episodes whose predicted goal equals the true
//! goal. Precision and recall are computed one-vs-rest per goal over the
//! candidate set and macro-averaged; goals that never appear as a truth or a
//! prediction are left out of the macro average. The F-score is the harmonic
//! mean of the macro precision and macro recall.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Goal;

/// One recognition outcome with its per-goal scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalEpisode {
    pub true_goal: Goal,
    pub predicted_goal: Goal,
    #[serde(default)]
    pub scores: Vec<(Goal, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalBreakdown {
    pub goal: Goal,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
    pub per_goal: Vec<GoalBreakdown>,
    pub episodes: usize,
}

impl EvalReport {
    /// CSV header matching [`Self::to_csv_row`].
    pub fn csv_header() -> &'static str {
        "episodes,accuracy,precision,recall,fscore"
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{:.6},{:.6},{:.6},{:.6}",
            self.episodes, self.accuracy, self.precision, self.recall, self.fscore
        )
    }

    pub fn all_metrics_are(&self, value: f64) -> bool {
        self.accuracy == value
            && self.precision == value
            && self.recall == value
            && self.fscore == value
    }
}

fn harmonic_mean(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Aggregate a batch of episodes into a report.
pub fn evaluate(episodes: &[EvalEpisode]) -> Result<EvalReport> {
    if episodes.is_empty() {
        return Err(Error::InvalidInput("no episodes to evaluate".into()));
    }

    let correct = episodes
        .iter()
        .filter(|e| e.predicted_goal == e.true_goal)
        .count();
    let accuracy = correct as f64 / episodes.len() as f64;

    // one-vs-rest tallies over goals that occur as truth or prediction
    let mut tallies: BTreeMap<Goal, (usize, usize, usize)> = BTreeMap::new();
    for e in episodes {
        tallies.entry(e.true_goal).or_default();
        tallies.entry(e.predicted_goal).or_default();
    }
    for e in episodes {
        if e.predicted_goal == e.true_goal {
            tallies.get_mut(&e.true_goal).unwrap().0 += 1;
        } else {
            tallies.get_mut(&e.predicted_goal).unwrap().1 += 1;
            tallies.get_mut(&e.true_goal).unwrap().2 += 1;
        }
    }

    let mut per_goal = Vec::with_capacity(tallies.len());
    let mut prec_sum = 0.0;
    let mut rec_sum = 0.0;
    for (goal, (tp, fp, fne)) in &tallies {
        let precision = if tp + fp == 0 {
            0.0
        } else {
            *tp as f64 / (tp + fp) as f64
        };
        let recall = if tp + fne == 0 {
            0.0
        } else {
            *tp as f64 / (tp + fne) as f64
        };
        prec_sum += precision;
        rec_sum += recall;
        per_goal.push(GoalBreakdown {
            goal: *goal,
            true_positives: *tp,
            false_positives: *fp,
            false_negatives: *fne,
            precision,
            recall,
        });
    }
    let n = per_goal.len() as f64;
    let precision = prec_sum / n;
    let recall = rec_sum / n;
    Ok(EvalReport {
        accuracy,
        precision,
        recall,
        fscore: harmonic_mean(precision, recall),
        per_goal,
        episodes: episodes.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ep(truth: (u32, u32), pred: (u32, u32)) -> EvalEpisode {
        EvalEpisode {
            true_goal: Goal::new(truth.0, truth.1),
            predicted_goal: Goal::new(pred.0, pred.1),
            scores: vec![],
        }
    }

    #[test]
    fn all_correct_gives_ones() {
        let eps = vec![ep((1, 1), (1, 1)), ep((2, 2), (2, 2)), ep((3, 3), (3, 3))];
        let r = evaluate(&eps).unwrap();
        assert!(r.all_metrics_are(1.0));
        assert_eq!(r.episodes, 3);
    }

    #[test]
    fn constant_predictor_on_even_split() {
        // always predicts A; truths split evenly between A and B
        let eps = vec![ep((1, 1), (1, 1)), ep((2, 2), (1, 1))];
        let r = evaluate(&eps).unwrap();
        assert_eq!(r.accuracy, 0.5);
        // A: tp=1 fp=1 -> p=0.5, r=1.0; B: tp=0 fn=1 -> p=0, r=0
        assert_eq!(r.precision, 0.25);
        assert_eq!(r.recall, 0.5);
        assert!((r.fscore - harmonic_mean(0.25, 0.5)).abs() < 1e-12);
    }

    #[test]
    fn report_is_permutation_invariant() {
        let mut eps = vec![
            ep((1, 1), (1, 1)),
            ep((2, 2), (1, 1)),
            ep((3, 3), (3, 3)),
            ep((1, 1), (2, 2)),
        ];
        let a = evaluate(&eps).unwrap();
        eps.reverse();
        let b = evaluate(&eps).unwrap();
        eps.swap(0, 2);
        let c = evaluate(&eps).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn accuracy_equals_micro_recall() {
        let eps = vec![
            ep((1, 1), (1, 1)),
            ep((2, 2), (1, 1)),
            ep((3, 3), (3, 3)),
            ep((2, 2), (2, 2)),
            ep((3, 3), (1, 1)),
        ];
        let r = evaluate(&eps).unwrap();
        let tp: usize = r.per_goal.iter().map(|g| g.true_positives).sum();
        let fne: usize = r.per_goal.iter().map(|g| g.false_negatives).sum();
        assert_eq!(r.accuracy, tp as f64 / (tp + fne) as f64);
    }

    #[test]
    fn unused_goals_are_excluded() {
        // scores may mention goals that never occur; they stay out of the
        // macro average because tallies only track truths and predictions
        let eps = vec![ep((1, 1), (1, 1)), ep((1, 1), (1, 1))];
        let r = evaluate(&eps).unwrap();
        assert_eq!(r.per_goal.len(), 1);
        assert!(r.all_metrics_are(1.0));
    }

    #[test]
    fn fscore_bounded_by_max_component() {
        let eps = vec![
            ep((1, 1), (2, 2)),
            ep((2, 2), (2, 2)),
            ep((3, 3), (2, 2)),
            ep((1, 1), (1, 1)),
        ];
        let r = evaluate(&eps).unwrap();
        assert!(r.fscore <= r.precision.max(r.recall) + 1e-12);
        for v in [r.accuracy, r.precision, r.recall, r.fscore] {
            assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(evaluate(&[]).is_err());
    }

    #[test]
    fn csv_row_shape() {
        let eps = vec![ep((1, 1), (1, 1))];
        let r = evaluate(&eps).unwrap();
        assert_eq!(EvalReport::csv_header().split(',').count(), 5);
        assert_eq!(r.to_csv_row().split(',').count(), 5);
    }
}
