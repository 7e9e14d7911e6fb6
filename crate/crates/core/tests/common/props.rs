//! Property suites shared by the standalone `properties` target and the
//! acceptance gate. Each function builds its own deterministic runner and
//! panics with a minimal counterexample on failure.

use std::sync::Arc;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

use gatling_core::grid::{Action, Goal, GridSpec, GridState};
use gatling_core::metrics::{evaluate, EvalEpisode};
use gatling_core::qlearn::{policy_from_q, QTable, TrainConfig};
use gatling_core::recognize::{kl_distance, pseudo_policy, PseudoPolicy};
use gatling_core::scenario::{
    run_scenario, DomainSource, Event, ObserveGoal, Recognizer, Scenario,
};
use gatling_core::trace::{subsample, Observation, ObservationTrace, SampleMode};
use gatling_core::transfer::{
    aggregate, cosine_similarity, scale_qtable, Aggregation, WeightVector,
};
use gatling_core::{recognize, transfer};

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    })
}

fn small_spec() -> Arc<GridSpec> {
    GridSpec::make_empty(6).expect("empty-6 grid")
}

/// Random nonnegative q-table on the given grid.
fn table_strategy(spec: Arc<GridSpec>) -> impl Strategy<Value = QTable> {
    let n = spec.n_states() * 4;
    let goals: Vec<GridState> = spec.states().to_vec();
    (
        proptest::collection::vec(0.0f64..1.0, n),
        0..goals.len(),
    )
        .prop_map(move |(values, gi)| {
            QTable::from_values(spec.clone(), Goal(goals[gi]), values).expect("valid values")
        })
}

fn state_strategy() -> impl Strategy<Value = GridState> {
    (0u32..40, 0u32..40).prop_map(|(x, y)| GridState::new(x, y))
}

pub fn cosine_bounds_and_symmetry(cases: u32) {
    runner(cases)
        .run(
            &(state_strategy(), state_strategy(), state_strategy(), 1u32..5),
            |(s, b, d, k)| {
                let c = cosine_similarity(s, Goal(b), Goal(d));
                prop_assert!((-1.0..=1.0).contains(&c), "cosine {c} out of range");
                let sym = cosine_similarity(s, Goal(d), Goal(b));
                prop_assert!((c - sym).abs() < 1e-12, "asymmetric: {c} vs {sym}");
                // scaling both displacement vectors by the same positive
                // factor leaves the cosine unchanged
                let scale = |g: GridState| {
                    GridState::new(
                        (s.x as i64 + (g.x as i64 - s.x as i64) * k as i64).unsigned_abs() as u32,
                        (s.y as i64 + (g.y as i64 - s.y as i64) * k as i64).unsigned_abs() as u32,
                    )
                };
                // only valid when the scaled points stay in the quadrant
                let sb = scale(b);
                let sd = scale(d);
                let in_range = |g: GridState, o: GridState| {
                    s.x as i64 + (o.x as i64 - s.x as i64) * k as i64 >= 0
                        && s.y as i64 + (o.y as i64 - s.y as i64) * k as i64 >= 0
                        && g.x < 1 << 16
                        && g.y < 1 << 16
                };
                if in_range(sb, b) && in_range(sd, d) {
                    let scaled = cosine_similarity(s, Goal(sb), Goal(sd));
                    prop_assert!(
                        (c - scaled).abs() < 1e-9,
                        "not scale invariant: {c} vs {scaled}"
                    );
                }
                Ok(())
            },
        )
        .unwrap();
}

pub fn aggregation_argmax_scale_invariance(cases: u32) {
    let spec = small_spec();
    let strat = (
        proptest::collection::vec(table_strategy(spec.clone()), 1..4),
        proptest::collection::vec(-1.0f64..1.0, 3),
        0.1f64..10.0,
        prop_oneof![
            Just(Aggregation::Normalize),
            Just(Aggregation::SoftmaxWeights),
            Just(Aggregation::Max)
        ],
    );
    let spec2 = spec.clone();
    runner(cases)
        .run(&strat, move |(tables, raw_w, c, method)| {
            let w: Vec<f64> = raw_w.iter().take(tables.len()).copied().collect();
            let w = if w.len() < tables.len() {
                vec![0.5; tables.len()]
            } else {
                w
            };
            let goal = tables[0].goal();
            let refs: Vec<&QTable> = tables.iter().collect();
            let (out, _) =
                aggregate(&refs, goal, |_| WeightVector(w.clone()), method).expect("aggregate");
            let scaled_tables: Vec<QTable> = tables
                .iter()
                .map(|t| {
                    QTable::from_values(
                        spec2.clone(),
                        t.goal(),
                        t.values().iter().map(|v| v * c).collect(),
                    )
                    .expect("scaled values")
                })
                .collect();
            let refs2: Vec<&QTable> = scaled_tables.iter().collect();
            let (out_scaled, _) =
                aggregate(&refs2, goal, |_| WeightVector(w.clone()), method).expect("aggregate");
            for &s in spec2.states() {
                prop_assert_eq!(
                    out.greedy_set(s),
                    out_scaled.greedy_set(s),
                    "greedy set changed at {} under scale {}",
                    s,
                    c
                );
            }
            Ok(())
        })
        .unwrap();
}

pub fn single_table_aggregation_identity(cases: u32) {
    let spec = small_spec();
    let strat = (
        table_strategy(spec.clone()),
        -1.0f64..1.0,
        prop_oneof![Just(Aggregation::Normalize), Just(Aggregation::SoftmaxWeights)],
    );
    runner(cases)
        .run(&strat, move |(table, w, method)| {
            let (out, _) = aggregate(
                &[&table],
                table.goal(),
                |_| WeightVector(vec![w]),
                method,
            )
            .expect("aggregate");
            for (a, b) in out.values().iter().zip(table.values()) {
                prop_assert!((a - b).abs() <= 1e-12, "{a} != {b}");
            }
            Ok(())
        })
        .unwrap();
}

pub fn scaling_preserves_greedy_sets(cases: u32) {
    let spec = small_spec();
    let strat = (table_strategy(spec.clone()), 0.05f64..20.0);
    let spec2 = spec.clone();
    runner(cases)
        .run(&strat, move |(table, temp)| {
            let scaled = scale_qtable(&table, temp).expect("scale");
            for &s in spec2.states() {
                prop_assert_eq!(
                    table.greedy_set(s),
                    scaled.greedy_set(s),
                    "greedy set changed at {} under temperature {}",
                    s,
                    temp
                );
            }
            Ok(())
        })
        .unwrap();
}

fn pseudo_strategy(spec: Arc<GridSpec>) -> impl Strategy<Value = PseudoPolicy> {
    let states: Vec<GridState> = spec.states().to_vec();
    proptest::collection::vec((0..states.len(), 0usize..4), 1..8).prop_map(move |obs| {
        let observations = obs
            .into_iter()
            .enumerate()
            .map(|(i, (si, ai))| Observation {
                step_index: i as u32,
                state: states[si],
                action: Action::from_index(ai).expect("action index"),
            })
            .collect();
        let trace = ObservationTrace {
            source_spec: "empty-6".into(),
            observability: 1.0,
            true_goal: None,
            truncated: false,
            observations,
        };
        pseudo_policy(&trace, 1e-8).expect("pseudo policy")
    })
}

pub fn kl_nonnegative_and_zero_on_equal(cases: u32) {
    let spec = small_spec();
    let strat = (table_strategy(spec.clone()), pseudo_strategy(spec.clone()));
    let spec2 = spec.clone();
    runner(cases)
        .run(&strat, move |(table, pseudo)| {
            let d = kl_distance(&table, &pseudo, 1e-8);
            prop_assert!(d.is_finite() && d >= 0.0, "kl {d}");

            // pseudo that equals the floored, renormalized policy at a few
            // non-goal states scores (numerically) zero
            let mut expected = Vec::new();
            for &s in spec2.states().iter().take(3) {
                if s == table.goal().state() {
                    continue;
                }
                let p = policy_from_q(&table, s).expect("nonnegative table");
                let floored = p.probs.map(|v| v.max(1e-8));
                let sum: f64 = floored.iter().sum();
                expected.push((
                    s,
                    gatling_core::qlearn::ActionDistribution {
                        probs: floored.map(|v| v / sum),
                    },
                ));
            }
            if !expected.is_empty() {
                let matching =
                    recognize::PseudoPolicy::from_distributions(expected).expect("valid");
                let zero = kl_distance(&table, &matching, 1e-8);
                prop_assert!(zero.abs() < 1e-9, "kl on equal policy = {zero}");
            }
            Ok(())
        })
        .unwrap();
}

pub fn subsample_cardinality_and_subsequence(cases: u32) {
    let strat = (2usize..40, 0.001f64..1.0, any::<u64>(), any::<bool>());
    runner(cases)
        .run(&strat, |(len, fraction, seed, prefix)| {
            let observations: Vec<Observation> = (0..len)
                .map(|i| Observation {
                    step_index: i as u32,
                    state: GridState::new(1 + (i as u32 % 4), 1 + (i as u32 / 4 % 4)),
                    action: Action::from_index(i % 4).expect("action"),
                })
                .collect();
            let trace = ObservationTrace {
                source_spec: "synthetic".into(),
                observability: 1.0,
                true_goal: None,
                truncated: false,
                observations,
            };
            let mode = if prefix {
                SampleMode::Prefix
            } else {
                SampleMode::Random
            };
            let out = subsample(&trace, fraction, mode, seed).expect("subsample");
            let expect = ((fraction * len as f64).ceil() as usize).clamp(1, len);
            prop_assert_eq!(out.len(), expect);
            for o in &out.observations {
                prop_assert_eq!(&trace.observations[o.step_index as usize], o);
            }
            if prefix {
                prop_assert_eq!(out.observations.as_slice(), &trace.observations[..expect]);
            }
            Ok(())
        })
        .unwrap();
}

pub fn report_permutation_invariance(cases: u32) {
    let goals: Vec<Goal> = vec![Goal::new(1, 1), Goal::new(2, 3), Goal::new(4, 2)];
    let g2 = goals.clone();
    let strat = (
        proptest::collection::vec((0..goals.len(), 0..goals.len()), 1..30),
        any::<u64>(),
    );
    runner(cases)
        .run(&strat, move |(pairs, seed)| {
            let mut episodes: Vec<EvalEpisode> = pairs
                .iter()
                .map(|&(t, p)| EvalEpisode {
                    true_goal: g2[t],
                    predicted_goal: g2[p],
                    scores: vec![],
                })
                .collect();
            let before = evaluate(&episodes).expect("episodes nonempty");
            // deterministic shuffle from the seed
            let mut rng = gatling_core::seeding::rng(seed);
            use rand::seq::SliceRandom;
            episodes.shuffle(&mut rng);
            let after = evaluate(&episodes).expect("episodes nonempty");
            prop_assert_eq!(before, after);
            Ok(())
        })
        .unwrap();
}

pub fn scenario_prefix_equivalence(cases: u32) {
    let strat = (
        any::<u64>(),
        1usize..3, // goals in first set
        1usize..3, // goals in second set
        prop_oneof![Just(0.5f64), Just(1.0f64)],
    );
    runner(cases)
        .run(&strat, |(seed, k1, k2, obs)| {
            let observe = |o: f64| Event::Observe {
                goal: ObserveGoal::default(),
                count: 1,
                observability: o,
                mode: SampleMode::Random,
                start: None,
                min_start_distance: 0,
                trace: None,
            };
            let goal_set = |k: usize| Event::Goals {
                goals: None,
                sample: Some(k),
                exclude: vec![],
                min_separation: 0,
            };
            let scenario = Scenario {
                name: "prefix".into(),
                seed,
                runs: 1,
                recognizer: Recognizer::Gatling,
                domain: DomainSource::Empty { size: 5 },
                base_goals: None,
                train: TrainConfig {
                    episodes: 300,
                    ..TrainConfig::default()
                },
                transfer: transfer::TransferOptions::default(),
                recognition: recognize::RecognizerConfig::default(),
                actor: Default::default(),
                events: vec![goal_set(k1), observe(obs), goal_set(k2), observe(obs)],
                base_dir: None,
            };
            let full = run_scenario(&scenario).expect("scenario runs");
            let mut truncated = scenario.clone();
            truncated.events.truncate(2);
            let cut = run_scenario(&truncated).expect("scenario runs");
            prop_assert_eq!(&full.runs[0].groups[0], &cut.runs[0].groups[0]);
            Ok(())
        })
        .unwrap();
}
