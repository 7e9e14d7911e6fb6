//! Goal scoring against observation traces.
//!
//! Each observed state contributes one KL term: the divergence between the
//! empirical, smoothed action distribution built from the trace (the
//! pseudo-policy) and the candidate goal's policy at that state, floored and
//! renormalized so every term stays finite. The candidate with the smallest
//! summed divergence is the recognized goal.
//!
//! The candidate policy is derived from the Q-table by a configurable rule.
//! The default is the exponential softmax: unlike plain utility
//! normalization it keeps the absolute scale of the utilities, which is what
//! separates a near goal from a farther goal straight behind it — under
//! normalization those two tables induce identical distributions along the
//! shared approach and the trace becomes undecidable. The literal
//! normalization rule remains available as a configuration.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Goal, GridState};
use crate::qlearn::{normalized_row, softmax_row, ActionDistribution, QTable};
use crate::trace::ObservationTrace;
use crate::transfer::GoalLibrary;

/// How a candidate's Q-row becomes an action distribution during scoring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "rule")]
pub enum PolicyRule {
    /// `pi(a|s) proportional to exp(beta * Q(s,a))`.
    Softmax { beta: f64 },
    /// `pi(a|s) = Q(s,a) / sum_a' Q(s,a')` (uniform on all-zero rows).
    Ratio,
}

impl PolicyRule {
    pub(crate) fn distribution(self, q: &QTable, s: GridState) -> ActionDistribution {
        match self {
            PolicyRule::Softmax { beta } => softmax_row(q.row(s), beta),
            PolicyRule::Ratio => normalized_row(q.row(s)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecognizerConfig {
    /// Smoothing constant applied to both sides of every KL term.
    pub smoothing: f64,
    pub policy: PolicyRule,
}

impl Default for RecognizerConfig {
    fn default() -> Self {
        Self {
            smoothing: 1e-8,
            policy: PolicyRule::Softmax { beta: 1.0 },
        }
    }
}

impl RecognizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.smoothing > 0.0 && self.smoothing < 0.25) {
            return Err(Error::InvalidConfig(format!(
                "smoothing must be in (0, 0.25), got {}",
                self.smoothing
            )));
        }
        if let PolicyRule::Softmax { beta } = self.policy {
            if !(beta > 0.0 && beta.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "softmax beta must be positive and finite, got {beta}"
                )));
            }
        }
        Ok(())
    }
}

/// Empirical smoothed action distribution at each observed state.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoPolicy {
    per_state: BTreeMap<GridState, ActionDistribution>,
}

impl PseudoPolicy {
    /// Assemble a pseudo-policy from explicit per-state distributions.
    pub fn from_distributions<I>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (GridState, ActionDistribution)>,
    {
        let per_state: BTreeMap<GridState, ActionDistribution> = entries.into_iter().collect();
        if per_state.is_empty() {
            return Err(Error::InvalidInput("pseudo-policy has no states".into()));
        }
        for (s, d) in &per_state {
            if !d.is_valid() {
                return Err(Error::InvalidInput(format!(
                    "pseudo-policy distribution at {s} is not a probability vector"
                )));
            }
        }
        Ok(Self { per_state })
    }

    pub fn states(&self) -> impl Iterator<Item = (&GridState, &ActionDistribution)> {
        self.per_state.iter()
    }

    pub fn len(&self) -> usize {
        self.per_state.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_state.is_empty()
    }

    pub fn at(&self, s: GridState) -> Option<&ActionDistribution> {
        self.per_state.get(&s)
    }
}

/// Build the pseudo-policy of a trace.
///
/// Per observed state, actions get their empirical frequency; the
/// distribution is then smoothed as `p*(1 - 4e) + e`, which for a single
/// observed action gives mass `1 - 3e` on it and `e` on each other action.
pub fn pseudo_policy(trace: &ObservationTrace, smoothing: f64) -> Result<PseudoPolicy> {
    if trace.is_empty() {
        return Err(Error::InvalidInput(
            "cannot build a pseudo-policy from an empty trace".into(),
        ));
    }
    if !(smoothing > 0.0 && smoothing < 0.25) {
        return Err(Error::InvalidConfig(format!(
            "smoothing must be in (0, 0.25), got {smoothing}"
        )));
    }
    let mut counts: BTreeMap<GridState, [f64; 4]> = BTreeMap::new();
    for o in &trace.observations {
        counts.entry(o.state).or_insert([0.0; 4])[o.action.index()] += 1.0;
    }
    let per_state = counts
        .into_iter()
        .map(|(s, c)| {
            let total: f64 = c.iter().sum();
            let probs = c.map(|n| (n / total) * (1.0 - 4.0 * smoothing) + smoothing);
            (s, ActionDistribution { probs })
        })
        .collect();
    Ok(PseudoPolicy { per_state })
}

/// Floor every entry at `smoothing` and renormalize.
fn smooth_floor(d: &ActionDistribution, smoothing: f64) -> [f64; 4] {
    let floored = d.probs.map(|p| p.max(smoothing));
    let sum: f64 = floored.iter().sum();
    floored.map(|p| p / sum)
}

fn kl(p: &[f64; 4], q: &[f64; 4]) -> f64 {
    let mut acc = 0.0;
    for i in 0..4 {
        if p[i] > 0.0 {
            acc += p[i] * (p[i] / q[i]).ln();
        }
    }
    acc
}

/// Summed KL divergence of the pseudo-policy from the goal policy over the
/// observed states, under an explicit policy rule.
///
/// The candidate's own goal cell is absorbing: under the hypothesis "the
/// actor pursues this goal", the trajectory ends on entry and no further
/// action is ever emitted there. An observation sitting on that cell is
/// therefore scored against the smoothing floor directly (the likelihood of
/// continuing), not against a renormalized distribution — walking through a
/// candidate's goal and onward is strong evidence against that candidate.
pub fn kl_distance_with(
    q: &QTable,
    pseudo: &PseudoPolicy,
    smoothing: f64,
    rule: PolicyRule,
) -> f64 {
    let goal_cell = q.goal().state();
    let mut total = 0.0;
    for (&s, observed) in pseudo.states() {
        if s == goal_cell {
            total += kl(&observed.probs, &[smoothing; 4]);
        } else {
            let candidate = rule.distribution(q, s);
            total += kl(&observed.probs, &smooth_floor(&candidate, smoothing));
        }
    }
    total
}

/// KL distance under the literal utility-normalization policy.
pub fn kl_distance(q: &QTable, pseudo: &PseudoPolicy, smoothing: f64) -> f64 {
    kl_distance_with(q, pseudo, smoothing, PolicyRule::Ratio)
}

/// Per-goal divergence scores and the recognized (arg-min) goal.
#[derive(Debug, Clone)]
pub struct RecognitionResult {
    /// One `(goal, divergence)` entry per candidate, in library order.
    pub scores: Vec<(Goal, f64)>,
    pub predicted: Goal,
    pub trace_len: usize,
    pub elapsed: Duration,
}

/// Equality over the recognition content; wall-clock time is measurement,
/// not output, and reproducibility checks must not see it.
impl PartialEq for RecognitionResult {
    fn eq(&self, other: &Self) -> bool {
        self.scores == other.scores
            && self.predicted == other.predicted
            && self.trace_len == other.trace_len
    }
}

#[derive(Serialize, Deserialize)]
struct ScoreEntry {
    goal: Goal,
    kl: f64,
}

#[derive(Serialize, Deserialize)]
struct RecognitionFile {
    scores: Vec<ScoreEntry>,
    predicted: Goal,
    trace_len: usize,
    elapsed_us: u64,
}

impl RecognitionResult {
    pub fn to_json(&self) -> String {
        let file = RecognitionFile {
            scores: self
                .scores
                .iter()
                .map(|&(goal, kl)| ScoreEntry { goal, kl })
                .collect(),
            predicted: self.predicted,
            trace_len: self.trace_len,
            elapsed_us: self.elapsed.as_micros() as u64,
        };
        serde_json::to_string_pretty(&file).expect("result serialization cannot fail")
    }

    pub fn score_of(&self, goal: Goal) -> Option<f64> {
        self.scores.iter().find(|(g, _)| *g == goal).map(|(_, s)| *s)
    }
}

/// Score every candidate in the library against the trace and return the
/// divergence-minimizing goal. Exact ties go to the earliest library entry,
/// which keeps the outcome deterministic.
pub fn infer(
    library: &GoalLibrary,
    trace: &ObservationTrace,
    cfg: &RecognizerConfig,
) -> Result<RecognitionResult> {
    cfg.validate()?;
    if library.is_empty() {
        return Err(Error::InvalidInput(
            "cannot recognize against an empty goal library".into(),
        ));
    }
    if trace.is_empty() {
        return Err(Error::InvalidInput("cannot recognize an empty trace".into()));
    }
    if trace.source_spec != library.spec().name() {
        return Err(Error::SpecMismatch(format!(
            "trace comes from '{}', library from '{}'",
            trace.source_spec,
            library.spec().name()
        )));
    }
    trace.validate(library.spec())?;

    let started = Instant::now();
    let pseudo = pseudo_policy(trace, cfg.smoothing)?;
    let mut scores = Vec::with_capacity(library.len());
    let mut best: Option<(Goal, f64)> = None;
    for table in library.tables() {
        let m = kl_distance_with(table, &pseudo, cfg.smoothing, cfg.policy);
        scores.push((table.goal(), m));
        match best {
            Some((_, best_m)) if m >= best_m => {}
            _ => best = Some((table.goal(), m)),
        }
    }
    let (predicted, _) = best.expect("library is nonempty");
    Ok(RecognitionResult {
        scores,
        predicted,
        trace_len: trace.len(),
        elapsed: started.elapsed(),
    })
}

/// [`infer`] with the default policy rule and an explicit smoothing value.
pub fn infer_with_smoothing(
    library: &GoalLibrary,
    trace: &ObservationTrace,
    smoothing: f64,
) -> Result<RecognitionResult> {
    infer(
        library,
        trace,
        &RecognizerConfig {
            smoothing,
            ..RecognizerConfig::default()
        },
    )
}
