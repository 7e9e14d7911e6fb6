//! Actor observation traces and partial-observability subsampling.
//!
//! A trace is the chronological `(state, action)` record of one actor
//! trajectory toward a (possibly hidden) goal. Partial traces keep their
//! original step indices, so downstream consumers can see where the gaps
//! are. Two file encodings exist: a single JSON document with metadata, and
//! a line-oriented variant (one observation per line) for streaming input.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Action, Goal, GridSpec, GridState};
use crate::qlearn::{rollout, ActorRule, QTable};
use crate::seeding;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    #[serde(rename = "step")]
    pub step_index: u32,
    pub state: GridState,
    pub action: Action,
}

/// Ordered observation sequence with provenance metadata.
///
/// `observability` is the fraction of the full trajectory retained;
/// `true_goal` is present on generated fixtures and absent for blind
/// inference; `truncated` marks rollouts that ran out of steps before
/// reaching the goal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationTrace {
    pub source_spec: String,
    pub observability: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub true_goal: Option<Goal>,
    #[serde(default)]
    pub truncated: bool,
    pub observations: Vec<Observation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleMode {
    /// Keep a uniformly random subset; order and step indices survive.
    Random,
    /// Keep the first observations.
    Prefix,
}

impl ObservationTrace {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Chronological order and, for full traces, step-to-step consistency
    /// with the grid's transition function.
    pub fn validate(&self, spec: &GridSpec) -> Result<()> {
        for w in self.observations.windows(2) {
            if w[1].step_index <= w[0].step_index {
                return Err(Error::InvalidInput(format!(
                    "trace steps not strictly increasing: {} then {}",
                    w[0].step_index, w[1].step_index
                )));
            }
        }
        for o in &self.observations {
            if !spec.is_free(o.state) {
                return Err(Error::InvalidInput(format!(
                    "trace visits non-free cell {}",
                    o.state
                )));
            }
        }
        if self.observability == 1.0 {
            for w in self.observations.windows(2) {
                if w[1].step_index == w[0].step_index + 1 {
                    let expect = spec.transition(w[0].state, w[0].action);
                    if expect != w[1].state {
                        return Err(Error::InvalidInput(format!(
                            "full trace inconsistent at step {}: {} --{}--> {} observed {}",
                            w[0].step_index, w[0].state, w[0].action, expect, w[1].state
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("trace json: {e}")))
    }

    /// One observation per line, for streaming input. Metadata is not
    /// carried; the loader fills it from arguments.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for o in &self.observations {
            out.push_str(&serde_json::to_string(o).expect("observation serialization"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str, source_spec: &str, observability: f64) -> Result<Self> {
        let mut observations = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let o: Observation = serde_json::from_str(line)
                .map_err(|e| Error::Parse(format!("trace line {}: {e}", i + 1)))?;
            observations.push(o);
        }
        Ok(Self {
            source_spec: source_spec.to_string(),
            observability,
            true_goal: None,
            truncated: false,
            observations,
        })
    }
}

/// Roll an actor policy from `start` to `goal` and package the full
/// trajectory as an observability-1.0 trace with the true goal set.
/// Truncated rollouts are returned flagged, not rejected.
pub fn generate_trace_with(
    spec: &GridSpec,
    actor_q: &QTable,
    start: GridState,
    goal: Goal,
    actor: ActorRule,
    seed: u64,
) -> Result<ObservationTrace> {
    if start == goal.state() {
        return Err(Error::InvalidInput(format!(
            "trace start {start} equals the goal"
        )));
    }
    let max_steps = (spec.width() * spec.height() * 4).max(64);
    let roll = rollout(spec, actor_q, start, goal, actor, max_steps, seed)?;
    let observations = roll
        .steps
        .iter()
        .enumerate()
        .map(|(i, &(state, action))| Observation {
            step_index: i as u32,
            state,
            action,
        })
        .collect();
    Ok(ObservationTrace {
        source_spec: spec.name().to_string(),
        observability: 1.0,
        true_goal: Some(goal),
        truncated: roll.truncated,
        observations,
    })
}

/// [`generate_trace_with`] under the greedy actor.
pub fn generate_trace(
    spec: &GridSpec,
    actor_q: &QTable,
    start: GridState,
    goal: Goal,
    seed: u64,
) -> Result<ObservationTrace> {
    generate_trace_with(spec, actor_q, start, goal, ActorRule::Greedy, seed)
}

/// Keep `ceil(fraction * len)` observations.
///
/// `Random` picks them uniformly without replacement and keeps trace order;
/// `Prefix` keeps the head. Step indices are preserved either way, so the
/// result is a strict subsequence of the input.
pub fn subsample(
    trace: &ObservationTrace,
    fraction: f64,
    mode: SampleMode,
    seed: u64,
) -> Result<ObservationTrace> {
    if trace.is_empty() {
        return Err(Error::InvalidInput("cannot subsample an empty trace".into()));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "observability fraction must be in (0,1], got {fraction}"
        )));
    }
    let keep = ((fraction * trace.len() as f64).ceil() as usize).clamp(1, trace.len());
    let observations = match mode {
        SampleMode::Prefix => trace.observations[..keep].to_vec(),
        SampleMode::Random => {
            use rand::seq::SliceRandom;
            let mut rng = seeding::rng(seed);
            let mut idx: Vec<usize> = (0..trace.len()).collect();
            idx.shuffle(&mut rng);
            let mut chosen: Vec<usize> = idx.into_iter().take(keep).collect();
            chosen.sort_unstable();
            chosen.into_iter().map(|i| trace.observations[i]).collect()
        }
    };
    Ok(ObservationTrace {
        source_spec: trace.source_spec.clone(),
        observability: trace.observability * fraction,
        true_goal: trace.true_goal,
        truncated: trace.truncated,
        observations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::qlearn::value_iteration;

    fn fixture() -> (std::sync::Arc<GridSpec>, ObservationTrace) {
        let spec = GridSpec::make_empty(8).unwrap();
        let goal = Goal::new(6, 6);
        let q = value_iteration(&spec, goal, 0.99, 1e-9).unwrap();
        let t = generate_trace(&spec, &q, GridState::new(1, 1), goal, 7).unwrap();
        (spec, t)
    }

    #[test]
    fn oracle_trace_has_manhattan_length() {
        let (spec, t) = fixture();
        assert_eq!(t.len(), 10);
        assert!(!t.truncated);
        assert_eq!(t.observability, 1.0);
        assert_eq!(t.true_goal, Some(Goal::new(6, 6)));
        t.validate(&spec).unwrap();
        // ends with the goal-entering step
        let last = t.observations.last().unwrap();
        assert_eq!(spec.transition(last.state, last.action), GridState::new(6, 6));
    }

    #[test]
    fn adjacent_start_gives_single_observation() {
        let spec = GridSpec::make_empty(8).unwrap();
        let goal = Goal::new(6, 6);
        let q = value_iteration(&spec, goal, 0.99, 1e-9).unwrap();
        let t = generate_trace(&spec, &q, GridState::new(5, 6), goal, 0).unwrap();
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn start_on_goal_is_invalid() {
        let spec = GridSpec::make_empty(8).unwrap();
        let goal = Goal::new(6, 6);
        let q = value_iteration(&spec, goal, 0.99, 1e-9).unwrap();
        assert!(generate_trace(&spec, &q, goal.state(), goal, 0).is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        let (_, a) = fixture();
        let (_, b) = fixture();
        assert_eq!(a, b);
    }

    #[test]
    fn subsample_keeps_ceiling_count_in_order() {
        let (_, t) = fixture();
        for (frac, expect) in [(0.1, 1), (0.3, 3), (0.5, 5), (1.0, 10)] {
            let s = subsample(&t, frac, SampleMode::Random, 3).unwrap();
            assert_eq!(s.len(), expect, "fraction {frac}");
            let mut prev = None;
            for o in &s.observations {
                if let Some(p) = prev {
                    assert!(o.step_index > p);
                }
                prev = Some(o.step_index);
            }
        }
    }

    #[test]
    fn subsample_full_fraction_is_identity() {
        let (_, t) = fixture();
        assert_eq!(subsample(&t, 1.0, SampleMode::Random, 5).unwrap(), t);
        assert_eq!(subsample(&t, 1.0, SampleMode::Prefix, 5).unwrap(), t);
    }

    #[test]
    fn subsample_prefix_takes_head() {
        let (_, t) = fixture();
        let s = subsample(&t, 0.3, SampleMode::Prefix, 0).unwrap();
        assert_eq!(s.observations, t.observations[..3].to_vec());
    }

    #[test]
    fn subsample_is_a_subsequence() {
        let (_, t) = fixture();
        let s = subsample(&t, 0.4, SampleMode::Random, 11).unwrap();
        for o in &s.observations {
            assert_eq!(t.observations[o.step_index as usize], *o);
        }
        assert!((s.observability - 0.4).abs() < 1e-12);
    }

    #[test]
    fn subsample_rejects_bad_inputs() {
        let (_, t) = fixture();
        assert!(subsample(&t, 0.0, SampleMode::Random, 0).is_err());
        assert!(subsample(&t, 1.5, SampleMode::Random, 0).is_err());
        let empty = ObservationTrace {
            source_spec: "x".into(),
            observability: 1.0,
            true_goal: None,
            truncated: false,
            observations: vec![],
        };
        assert!(subsample(&empty, 0.5, SampleMode::Random, 0).is_err());
    }

    #[test]
    fn trace_json_round_trip() {
        let (_, t) = fixture();
        let back = ObservationTrace::from_json(&t.to_json()).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn jsonl_round_trip_and_line_errors() {
        let (_, t) = fixture();
        let lines = t.to_jsonl();
        let back = ObservationTrace::from_jsonl(&lines, &t.source_spec, 1.0).unwrap();
        assert_eq!(back.observations, t.observations);

        let bad = "{\"step\":0,\"state\":[1,1],\"action\":1}\nnot-json\n";
        let err = ObservationTrace::from_jsonl(bad, "g", 1.0).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }
}
