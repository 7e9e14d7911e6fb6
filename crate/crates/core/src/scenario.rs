//! Scenario harness: sequential goal-set and observation events.
//!
//! A scenario fixes a domain, base goals, hyperparameters and an ordered
//! event list. Events are processed strictly in order; a goal-set event
//! replaces the current candidate library (by transfer for the `gatling`
//! recognizer, by training each goal from scratch for the `graql` baseline),
//! and an observe event scores one or more traces against the current
//! library. The three phases are timed separately: domain learning (base
//! training), goals adaptation (one duration per goal-set event) and
//! inference (one per observe event).
//!
//! Randomness is derived per `(run, event, trace)` from the scenario seed,
//! so outputs are reproducible and truncating the event list leaves the
//! earlier groups byte-identical. Actor trajectories are generated from
//! value-iteration oracle tables, which keeps the fixtures identical across
//! recognizers when comparing them.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Goal, GridSpec, GridState};
use crate::metrics::{evaluate, EvalEpisode, EvalReport};
use crate::qlearn::{q_update_count, train, value_iteration, ActorRule, QTable, TrainConfig};
use crate::recognize::{infer, RecognitionResult, RecognizerConfig};
use crate::seeding;
use crate::trace::{generate_trace_with, subsample, ObservationTrace, SampleMode};
use crate::transfer::{adapt_goals, GoalLibrary, TransferOptions};

/// Worker-count override; the only environment knob.
pub const WORKERS_ENV: &str = "GATLING_WORKERS";

fn worker_count() -> usize {
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n >= 1 {
                return n;
            }
        }
    }
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DomainSource {
    Empty { size: u32 },
    Crossing { size: u32, seed: u64 },
    File { path: PathBuf },
}

impl DomainSource {
    pub fn build(&self, base_dir: Option<&Path>) -> Result<Arc<GridSpec>> {
        match self {
            DomainSource::Empty { size } => GridSpec::make_empty(*size),
            DomainSource::Crossing { size, seed } => GridSpec::make_simple_crossing(*size, *seed),
            DomainSource::File { path } => {
                let resolved = resolve(path, base_dir);
                let text = std::fs::read_to_string(&resolved)?;
                GridSpec::from_json(&text)
            }
        }
    }
}

fn resolve(path: &Path, base_dir: Option<&Path>) -> PathBuf {
    match base_dir {
        Some(dir) if path.is_relative() => dir.join(path),
        _ => path.to_path_buf(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Recognizer {
    /// Transfer-based: trains base goals once, adapts to new goal sets by
    /// weighted aggregation.
    Gatling,
    /// Retraining baseline: trains a fresh table for every goal of every
    /// goal-set event.
    Graql,
}

impl std::fmt::Display for Recognizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Recognizer::Gatling => f.write_str("gatling"),
            Recognizer::Graql => f.write_str("graql"),
        }
    }
}

/// Which goal an observe event follows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObserveGoal {
    Named(ObserveGoalKeyword),
    Fixed(Goal),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObserveGoalKeyword {
    /// One batch of traces per goal in the current set.
    Each,
    /// The true goal is drawn uniformly from the current set per trace.
    Sample,
}

impl Default for ObserveGoal {
    fn default() -> Self {
        ObserveGoal::Named(ObserveGoalKeyword::Each)
    }
}

fn default_count() -> u32 {
    1
}

fn default_observability() -> f64 {
    1.0
}

fn default_mode() -> SampleMode {
    SampleMode::Random
}

fn is_zero(v: &u32) -> bool {
    *v == 0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Event {
    /// Replace the candidate goal set.
    Goals {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        goals: Option<Vec<Goal>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sample: Option<usize>,
        /// Cells the sampler must avoid, on top of the base goals (e.g. a
        /// fixed actor start cell).
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        exclude: Vec<Goal>,
        /// Minimum pairwise Manhattan distance between sampled goals.
        /// Near-coincident goals induce near-identical transfer targets, so
        /// experiment scenarios keep candidates separated.
        #[serde(default, skip_serializing_if = "is_zero")]
        min_separation: u32,
    },
    /// Score one or more traces against the current goal set.
    Observe {
        #[serde(default)]
        goal: ObserveGoal,
        #[serde(default = "default_count")]
        count: u32,
        #[serde(default = "default_observability")]
        observability: f64,
        #[serde(default = "default_mode")]
        mode: SampleMode,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        start: Option<GridState>,
        /// Minimum Manhattan distance between a sampled start and the true
        /// goal. Starts right next to the goal yield one- or two-step
        /// trajectories that carry almost no evidence at partial
        /// observability.
        #[serde(default, skip_serializing_if = "is_zero")]
        min_start_distance: u32,
        /// Load this trace file instead of generating.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        trace: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_runs")]
    pub runs: u32,
    #[serde(default = "default_recognizer")]
    pub recognizer: Recognizer,
    pub domain: DomainSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_goals: Option<Vec<Goal>>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub transfer: TransferOptions,
    #[serde(default)]
    pub recognition: RecognizerConfig,
    /// How generated actors behave: greedy shortest paths or stochastic
    /// softmax sampling over the oracle utilities.
    #[serde(default)]
    pub actor: ActorRule,
    pub events: Vec<Event>,
    /// Directory trace/grid paths are resolved against (set by the loader).
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn default_runs() -> u32 {
    1
}

fn default_recognizer() -> Recognizer {
    Recognizer::Gatling
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut s: Scenario =
            toml::from_str(text).map_err(|e| Error::Parse(format!("scenario toml: {e}")))?;
        s.base_dir = None;
        Ok(s)
    }

    pub fn from_toml_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut s = Self::from_toml_str(&text)?;
        s.base_dir = path.parent().map(Path::to_path_buf);
        if s.name.is_empty() {
            s.name = path
                .file_stem()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
        }
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serialization cannot fail")
    }

    /// Structural checks that do not need the domain built.
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::ScenarioValidation("runs must be >= 1".into()));
        }
        self.train.validate()?;
        self.transfer.validate()?;
        self.recognition.validate()?;
        let mut have_goals = false;
        for (i, e) in self.events.iter().enumerate() {
            match e {
                Event::Goals { goals, sample, .. } => {
                    match (goals, sample) {
                        (Some(g), None) => {
                            if g.is_empty() {
                                return Err(Error::ScenarioValidation(format!(
                                    "event {i}: goal set must not be empty"
                                )));
                            }
                        }
                        (None, Some(n)) => {
                            if *n == 0 {
                                return Err(Error::ScenarioValidation(format!(
                                    "event {i}: sample count must be >= 1"
                                )));
                            }
                        }
                        _ => {
                            return Err(Error::ScenarioValidation(format!(
                                "event {i}: goal-set event needs exactly one of `goals` or `sample`"
                            )))
                        }
                    }
                    have_goals = true;
                }
                Event::Observe {
                    count,
                    observability,
                    trace,
                    ..
                } => {
                    if !have_goals {
                        return Err(Error::ScenarioValidation(format!(
                            "event {i}: observe before any goal-set event"
                        )));
                    }
                    if *count == 0 {
                        return Err(Error::ScenarioValidation(format!(
                            "event {i}: observe count must be >= 1"
                        )));
                    }
                    if trace.is_none() && !(*observability > 0.0 && *observability <= 1.0) {
                        return Err(Error::ScenarioValidation(format!(
                            "event {i}: observability must be in (0,1], got {observability}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Durations of the three solver phases for one scenario run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub domain_learning: Duration,
    /// One entry per goal-set event.
    pub goals_adaptation: Vec<Duration>,
    /// One entry per observe event.
    pub inference: Vec<Duration>,
}

/// One recognition episode tagged with its experiment cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggedEpisode {
    pub episode: EvalEpisode,
    pub observability: f64,
    pub goal_set_size: usize,
    pub goal_set_index: usize,
}

/// Results grouped under one goal-set event.
#[derive(Debug, Clone, PartialEq)]
pub struct GoalSetGroup {
    pub goals: Vec<Goal>,
    pub results: Vec<RecognitionResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub run: u32,
    pub groups: Vec<GoalSetGroup>,
    pub episodes: Vec<TaggedEpisode>,
    pub timings: PhaseTimings,
    /// TD updates observed while inference was being timed; must be zero
    /// for both recognizers.
    pub q_updates_during_inference: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    fn over(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Self {
            mean,
            std: var.sqrt(),
        }
    }
}

/// Mean and spread of the four metrics for one `(observability, goal-count)`
/// cell, over the scenario's runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub observability: f64,
    pub goals: usize,
    pub runs: usize,
    pub accuracy: MeanStd,
    pub precision: MeanStd,
    pub recall: MeanStd,
    pub fscore: MeanStd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutcome {
    pub name: String,
    pub recognizer: Recognizer,
    pub runs: Vec<RunOutcome>,
    /// Pooled over every episode of every run; absent when the scenario
    /// produced no evaluable episodes.
    pub report: Option<EvalReport>,
    pub cells: Vec<CellStats>,
    /// Base-library construction cost (training for `gatling`, nothing for
    /// `graql`). The base library is seed-deterministic, so it is built once
    /// per scenario and shared by all runs.
    pub domain_learning: Duration,
}

impl ScenarioOutcome {
    /// Mean adaptation cost per dynamic goal across all runs and goal-set
    /// events.
    pub fn adaptation_per_goal(&self) -> Option<Duration> {
        let mut total = Duration::ZERO;
        let mut goals = 0usize;
        for run in &self.runs {
            for (g, d) in run.groups.iter().zip(&run.timings.goals_adaptation) {
                total += *d;
                goals += g.goals.len();
            }
        }
        (goals > 0).then(|| total / goals as u32)
    }

    /// Canonical JSON of the per-run recognition outputs, excluding
    /// wall-clock times, for byte-level reproducibility checks.
    pub fn results_json(&self) -> String {
        #[derive(Serialize)]
        struct R<'a> {
            scores: &'a [(Goal, f64)],
            predicted: Goal,
            trace_len: usize,
        }
        #[derive(Serialize)]
        struct G<'a> {
            goals: &'a [Goal],
            results: Vec<R<'a>>,
        }
        #[derive(Serialize)]
        struct Run<'a> {
            run: u32,
            groups: Vec<G<'a>>,
        }
        let runs: Vec<Run> = self
            .runs
            .iter()
            .map(|r| Run {
                run: r.run,
                groups: r
                    .groups
                    .iter()
                    .map(|g| G {
                        goals: &g.goals,
                        results: g
                            .results
                            .iter()
                            .map(|x| R {
                                scores: &x.scores,
                                predicted: x.predicted,
                                trace_len: x.trace_len,
                            })
                            .collect(),
                    })
                    .collect(),
            })
            .collect();
        serde_json::to_string_pretty(&runs).expect("results serialization cannot fail")
    }
}

/// Default base goals: the playable corners farthest from the origin corner
/// (mirroring the usual three-corner experiment layout), snapped to the
/// nearest free cell.
pub fn default_base_goals(spec: &GridSpec) -> Vec<Goal> {
    let xs: Vec<u32> = spec.states().iter().map(|s| s.x).collect();
    let ys: Vec<u32> = spec.states().iter().map(|s| s.y).collect();
    let (xmin, xmax) = (
        *xs.iter().min().expect("grid has states"),
        *xs.iter().max().expect("grid has states"),
    );
    let (ymin, ymax) = (
        *ys.iter().min().expect("grid has states"),
        *ys.iter().max().expect("grid has states"),
    );
    let corners = [
        GridState::new(xmin, ymax),
        GridState::new(xmax, ymax),
        GridState::new(xmax, ymin),
    ];
    let mut out: Vec<Goal> = Vec::new();
    for c in corners {
        let nearest = spec
            .states()
            .iter()
            .min_by_key(|s| s.manhattan(c))
            .copied()
            .expect("grid has states");
        if !out.iter().any(|g| g.state() == nearest) {
            out.push(Goal(nearest));
        }
    }
    out
}

/// Train one table per goal, fanning out across up to `GATLING_WORKERS`
/// threads. Each goal owns a derived seed, so the result is independent of
/// the worker count and arrival order.
fn train_goal_set(
    spec: &Arc<GridSpec>,
    goals: &[Goal],
    cfg: &TrainConfig,
    seed_base: u64,
) -> Result<Vec<QTable>> {
    let workers = worker_count().clamp(1, goals.len().max(1));
    let cfg_for = |i: usize| TrainConfig {
        seed: seeding::mix_all(seed_base, &[i as u64]),
        ..cfg.clone()
    };
    if workers <= 1 || goals.len() <= 1 {
        return goals
            .iter()
            .enumerate()
            .map(|(i, g)| train(spec, *g, &cfg_for(i)))
            .collect();
    }
    let mut slots: Vec<Option<Result<QTable>>> = Vec::new();
    slots.resize_with(goals.len(), || None);
    let slots = std::sync::Mutex::new(slots);
    let next = std::sync::atomic::AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= goals.len() {
                    break;
                }
                let r = train(spec, goals[i], &cfg_for(i));
                slots.lock().expect("worker panicked").as_mut_slice()[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("worker panicked")
        .into_iter()
        .map(|s| s.expect("every slot filled"))
        .collect()
}

/// Oracle actor tables, cached per goal for the lifetime of one scenario
/// execution. The actor is recognizer-independent so compared runs share
/// their trajectories exactly.
struct ActorCache {
    spec: Arc<GridSpec>,
    gamma: f64,
    tables: BTreeMap<Goal, QTable>,
}

impl ActorCache {
    fn new(spec: Arc<GridSpec>, gamma: f64) -> Self {
        Self {
            spec,
            gamma,
            tables: BTreeMap::new(),
        }
    }

    fn get(&mut self, goal: Goal) -> Result<&QTable> {
        if !self.tables.contains_key(&goal) {
            let t = value_iteration(&self.spec, goal, self.gamma, 1e-9)?;
            self.tables.insert(goal, t);
        }
        Ok(self.tables.get(&goal).expect("just inserted"))
    }
}

fn sample_distinct_goals(
    spec: &GridSpec,
    count: usize,
    exclude: &[Goal],
    min_separation: u32,
    seed: u64,
) -> Result<Vec<Goal>> {
    use rand::seq::SliceRandom;
    let mut pool: Vec<GridState> = spec
        .states()
        .iter()
        .copied()
        .filter(|s| !exclude.iter().any(|g| g.state() == *s))
        .collect();
    if pool.len() < count {
        return Err(Error::ScenarioValidation(format!(
            "cannot sample {count} dynamic goals from {} eligible cells",
            pool.len()
        )));
    }
    let mut rng = seeding::rng(seed);
    pool.shuffle(&mut rng);
    let mut chosen: Vec<GridState> = Vec::with_capacity(count);
    for s in pool {
        if chosen.iter().all(|c| c.manhattan(s) >= min_separation) {
            chosen.push(s);
            if chosen.len() == count {
                return Ok(chosen.into_iter().map(Goal).collect());
            }
        }
    }
    Err(Error::ScenarioValidation(format!(
        "cannot sample {count} goals at pairwise distance >= {min_separation}"
    )))
}

/// Uniform random free cell other than the goal.
pub fn sample_start(spec: &GridSpec, goal: Goal, seed: u64) -> GridState {
    sample_start_at_distance(spec, goal, 1, seed).expect("a free non-goal cell exists")
}

/// Uniform random free cell at Manhattan distance >= `min_distance` from
/// the goal. Falls back over nothing: errors when no cell qualifies.
pub fn sample_start_at_distance(
    spec: &GridSpec,
    goal: Goal,
    min_distance: u32,
    seed: u64,
) -> Result<GridState> {
    let pool: Vec<GridState> = spec
        .states()
        .iter()
        .copied()
        .filter(|s| s.manhattan(goal.state()) >= min_distance.max(1))
        .collect();
    if pool.is_empty() {
        return Err(Error::ScenarioValidation(format!(
            "no start cell at distance >= {min_distance} from goal {goal}"
        )));
    }
    let mut rng = seeding::rng(seed);
    Ok(pool[rand::Rng::random_range(&mut rng, 0..pool.len())])
}

// salts for the seed-derivation tree
const SALT_DOMAIN: u64 = 1;
const SALT_GOALSET: u64 = 3;
const SALT_GRAQL_TRAIN: u64 = 4;
const SALT_TRACE: u64 = 5;
const SALT_SUBSAMPLE: u64 = 6;
const SALT_START: u64 = 7;
const SALT_TRUTH: u64 = 8;

struct Execution<'a> {
    scenario: &'a Scenario,
    spec: Arc<GridSpec>,
    base_goals: Vec<Goal>,
    /// GATLing's trained base library; `graql` does not have one.
    base_library: Option<GoalLibrary>,
    actors: ActorCache,
    domain_learning: Duration,
}

impl<'a> Execution<'a> {
    fn prepare(scenario: &'a Scenario) -> Result<Self> {
        scenario.validate()?;
        let spec = scenario.domain.build(scenario.base_dir.as_deref())?;
        let base_goals = match &scenario.base_goals {
            Some(goals) => {
                for g in goals {
                    spec.check_goal(*g)?;
                }
                goals.clone()
            }
            None => default_base_goals(&spec),
        };
        if base_goals.is_empty() {
            return Err(Error::ScenarioValidation("no base goals".into()));
        }

        // Domain learning: the transfer recognizer trains its base tables
        // now; the retraining baseline defers all learning to goal arrival.
        let started = Instant::now();
        let base_library = match scenario.recognizer {
            Recognizer::Gatling => {
                let tables = train_goal_set(
                    &spec,
                    &base_goals,
                    &scenario.train,
                    seeding::mix_all(scenario.seed, &[SALT_DOMAIN]),
                )?;
                Some(GoalLibrary::new(spec.clone(), tables)?)
            }
            Recognizer::Graql => None,
        };
        let domain_learning = started.elapsed();

        let gamma = scenario.train.gamma;
        Ok(Self {
            scenario,
            spec: spec.clone(),
            base_goals,
            base_library,
            actors: ActorCache::new(spec, gamma),
            domain_learning,
        })
    }

    fn goal_set_for(&mut self, event_index: usize, run: u32, e: &Event) -> Result<Vec<Goal>> {
        let (goals, sample, exclude, min_separation) = match e {
            Event::Goals {
                goals,
                sample,
                exclude,
                min_separation,
            } => (goals, sample, exclude, *min_separation),
            _ => unreachable!("caller matches goal-set events"),
        };
        match (goals, sample) {
            (Some(g), None) => {
                let mut seen = std::collections::BTreeSet::new();
                for goal in g {
                    self.spec.check_goal(*goal)?;
                    if !seen.insert(*goal) {
                        return Err(Error::ScenarioValidation(format!(
                            "duplicate goal {goal} in goal-set event {event_index}"
                        )));
                    }
                }
                Ok(g.clone())
            }
            (None, Some(n)) => {
                let mut avoid = self.base_goals.clone();
                avoid.extend_from_slice(exclude);
                sample_distinct_goals(
                    &self.spec,
                    *n,
                    &avoid,
                    min_separation,
                    seeding::mix_all(
                        self.scenario.seed,
                        &[SALT_GOALSET, run as u64, event_index as u64],
                    ),
                )
            }
            _ => unreachable!("validated"),
        }
    }

    fn build_library(
        &mut self,
        goals: &[Goal],
        event_index: usize,
        run: u32,
    ) -> Result<(GoalLibrary, Duration)> {
        let started = Instant::now();
        let library = match self.scenario.recognizer {
            Recognizer::Gatling => {
                let base = self
                    .base_library
                    .as_ref()
                    .expect("gatling always has a base library");
                adapt_goals(base, goals, &self.scenario.transfer)?.library
            }
            Recognizer::Graql => {
                let tables = train_goal_set(
                    &self.spec,
                    goals,
                    &self.scenario.train,
                    seeding::mix_all(
                        self.scenario.seed,
                        &[SALT_GRAQL_TRAIN, run as u64, event_index as u64],
                    ),
                )?;
                GoalLibrary::new(self.spec.clone(), tables)?
            }
        };
        Ok((library, started.elapsed()))
    }

    /// The `(truth, trace)` fixtures for one observe event.
    fn observation_batch(
        &mut self,
        e: &Event,
        event_index: usize,
        run: u32,
        current_goals: &[Goal],
    ) -> Result<Vec<(Option<Goal>, ObservationTrace)>> {
        let (goal, count, observability, mode, start, min_start_distance, trace_file) = match e {
            Event::Observe {
                goal,
                count,
                observability,
                mode,
                start,
                min_start_distance,
                trace,
            } => (
                goal,
                *count,
                *observability,
                *mode,
                *start,
                *min_start_distance,
                trace,
            ),
            _ => unreachable!("caller matches observe events"),
        };

        if let Some(path) = trace_file {
            let resolved = resolve(path, self.scenario.base_dir.as_deref());
            let text = std::fs::read_to_string(&resolved)?;
            let trace = if resolved.extension().is_some_and(|e| e == "jsonl") {
                ObservationTrace::from_jsonl(&text, self.spec.name(), observability)?
            } else {
                ObservationTrace::from_json(&text)?
            };
            trace.validate(&self.spec)?;
            return Ok(vec![(trace.true_goal, trace)]);
        }

        let mut truths: Vec<(Goal, u64)> = Vec::new(); // (truth, trace salt)
        match goal {
            ObserveGoal::Named(ObserveGoalKeyword::Each) => {
                for (gi, g) in current_goals.iter().enumerate() {
                    for c in 0..count {
                        truths.push((*g, (gi as u64) << 16 | c as u64));
                    }
                }
            }
            ObserveGoal::Named(ObserveGoalKeyword::Sample) => {
                for c in 0..count {
                    let seed = seeding::mix_all(
                        self.scenario.seed,
                        &[SALT_TRUTH, run as u64, event_index as u64, c as u64],
                    );
                    let mut rng = seeding::rng(seed);
                    let g = current_goals
                        [rand::Rng::random_range(&mut rng, 0..current_goals.len())];
                    truths.push((g, 1 << 32 | c as u64));
                }
            }
            ObserveGoal::Fixed(g) => {
                if !current_goals.contains(g) {
                    return Err(Error::ScenarioValidation(format!(
                        "observe event {event_index}: goal {g} is not in the current goal set"
                    )));
                }
                for c in 0..count {
                    truths.push((*g, 2 << 32 | c as u64));
                }
            }
        }

        let mut batch = Vec::with_capacity(truths.len());
        for (truth, salt) in truths {
            let trace_seed = seeding::mix_all(
                self.scenario.seed,
                &[SALT_TRACE, run as u64, event_index as u64, salt],
            );
            let s0 = match start {
                Some(s) => s,
                None => sample_start_at_distance(
                    &self.spec,
                    truth,
                    min_start_distance,
                    seeding::mix_all(
                        self.scenario.seed,
                        &[SALT_START, run as u64, event_index as u64, salt],
                    ),
                )?,
            };
            let spec = self.spec.clone();
            let actor = self.actors.get(truth)?;
            let full = generate_trace_with(&spec, actor, s0, truth, self.scenario.actor, trace_seed)?;
            let trace = if observability < 1.0 {
                subsample(
                    &full,
                    observability,
                    mode,
                    seeding::mix_all(
                        self.scenario.seed,
                        &[SALT_SUBSAMPLE, run as u64, event_index as u64, salt],
                    ),
                )?
            } else {
                full
            };
            batch.push((Some(truth), trace));
        }
        Ok(batch)
    }

    fn run_once(&mut self, run: u32) -> Result<RunOutcome> {
        let mut groups: Vec<GoalSetGroup> = Vec::new();
        let mut episodes: Vec<TaggedEpisode> = Vec::new();
        let mut goals_adaptation = Vec::new();
        let mut inference = Vec::new();
        let mut current: Option<GoalLibrary> = None;
        let mut q_updates_during_inference = 0u64;

        let events = self.scenario.events.clone();
        for (ei, event) in events.iter().enumerate() {
            match event {
                Event::Goals { .. } => {
                    let goals = self.goal_set_for(ei, run, event)?;
                    let (library, elapsed) = self.build_library(&goals, ei, run)?;
                    goals_adaptation.push(elapsed);
                    groups.push(GoalSetGroup {
                        goals,
                        results: Vec::new(),
                    });
                    current = Some(library);
                }
                Event::Observe { observability, .. } => {
                    let library = current.as_ref().ok_or_else(|| {
                        Error::ScenarioValidation(format!(
                            "observe event {ei} before any goal-set event"
                        ))
                    })?;
                    let goal_set_index = groups.len() - 1;
                    let goals = groups[goal_set_index].goals.clone();
                    let batch = self.observation_batch(event, ei, run, &goals)?;

                    let updates_before = q_update_count();
                    let started = Instant::now();
                    let mut results = Vec::with_capacity(batch.len());
                    for (truth, trace) in &batch {
                        let r = infer(library, trace, &self.scenario.recognition)?;
                        if let Some(truth) = truth {
                            episodes.push(TaggedEpisode {
                                episode: EvalEpisode {
                                    true_goal: *truth,
                                    predicted_goal: r.predicted,
                                    scores: r.scores.clone(),
                                },
                                observability: *observability,
                                goal_set_size: goals.len(),
                                goal_set_index,
                            });
                        }
                        results.push(r);
                    }
                    inference.push(started.elapsed());
                    q_updates_during_inference += q_update_count() - updates_before;
                    groups[goal_set_index].results.extend(results);
                }
            }
        }

        Ok(RunOutcome {
            run,
            groups,
            episodes,
            timings: PhaseTimings {
                domain_learning: self.domain_learning,
                goals_adaptation,
                inference,
            },
            q_updates_during_inference,
        })
    }
}

fn cell_stats(runs: &[RunOutcome]) -> Vec<CellStats> {
    // group by (observability bits, goal-set size)
    let mut cells: BTreeMap<(u64, usize), Vec<(f64, f64, f64, f64)>> = BTreeMap::new();
    for run in runs {
        let mut per_cell: BTreeMap<(u64, usize), Vec<EvalEpisode>> = BTreeMap::new();
        for t in &run.episodes {
            per_cell
                .entry((t.observability.to_bits(), t.goal_set_size))
                .or_default()
                .push(t.episode.clone());
        }
        for (key, eps) in per_cell {
            let r = evaluate(&eps).expect("cell has episodes");
            cells
                .entry(key)
                .or_default()
                .push((r.accuracy, r.precision, r.recall, r.fscore));
        }
    }
    let mut out: Vec<CellStats> = cells
        .into_iter()
        .map(|((obs_bits, goals), metrics)| {
            let acc: Vec<f64> = metrics.iter().map(|m| m.0).collect();
            let prec: Vec<f64> = metrics.iter().map(|m| m.1).collect();
            let rec: Vec<f64> = metrics.iter().map(|m| m.2).collect();
            let f: Vec<f64> = metrics.iter().map(|m| m.3).collect();
            CellStats {
                observability: f64::from_bits(obs_bits),
                goals,
                runs: metrics.len(),
                accuracy: MeanStd::over(&acc),
                precision: MeanStd::over(&prec),
                recall: MeanStd::over(&rec),
                fscore: MeanStd::over(&f),
            }
        })
        .collect();
    out.sort_by(|a, b| {
        a.observability
            .total_cmp(&b.observability)
            .then(a.goals.cmp(&b.goals))
    });
    out
}

/// Execute a scenario: domain learning once, then `runs` independent
/// replays of the event sequence with per-run derived randomness.
pub fn run_scenario(scenario: &Scenario) -> Result<ScenarioOutcome> {
    let mut exec = Execution::prepare(scenario)?;
    let mut runs = Vec::with_capacity(scenario.runs as usize);
    for run in 0..scenario.runs {
        runs.push(exec.run_once(run)?);
    }
    let all: Vec<EvalEpisode> = runs
        .iter()
        .flat_map(|r| r.episodes.iter().map(|t| t.episode.clone()))
        .collect();
    let report = if all.is_empty() {
        None
    } else {
        Some(evaluate(&all)?)
    };
    let cells = cell_stats(&runs);
    Ok(ScenarioOutcome {
        name: scenario.name.clone(),
        recognizer: scenario.recognizer,
        runs,
        report,
        cells,
        domain_learning: exec.domain_learning,
    })
}

/// Side-by-side execution of the same scenario under both recognizers with
/// shared seeds (hence identical traces and truths).
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonOutcome {
    pub gatling: ScenarioOutcome,
    pub graql: ScenarioOutcome,
    pub gatling_adapt_per_goal: Option<Duration>,
    pub graql_adapt_per_goal: Option<Duration>,
    /// `gatling_adapt_per_goal / graql_adapt_per_goal`; the headline
    /// transfer-vs-retrain number. Reported, never asserted here: absolute
    /// values are machine-dependent.
    pub adaptation_ratio: Option<f64>,
    pub truths_identical: bool,
}

pub fn compare(scenario: &Scenario) -> Result<ComparisonOutcome> {
    let gatling = run_scenario(&Scenario {
        recognizer: Recognizer::Gatling,
        ..scenario.clone()
    })?;
    let graql = run_scenario(&Scenario {
        recognizer: Recognizer::Graql,
        ..scenario.clone()
    })?;
    let truths_identical = gatling.runs.len() == graql.runs.len()
        && gatling.runs.iter().zip(&graql.runs).all(|(a, b)| {
            a.episodes.len() == b.episodes.len()
                && a.episodes
                    .iter()
                    .zip(&b.episodes)
                    .all(|(x, y)| x.episode.true_goal == y.episode.true_goal)
        });
    let g = gatling.adaptation_per_goal();
    let q = graql.adaptation_per_goal();
    let adaptation_ratio = match (g, q) {
        (Some(g), Some(q)) if q > Duration::ZERO => Some(g.as_secs_f64() / q.as_secs_f64()),
        _ => None,
    };
    Ok(ComparisonOutcome {
        gatling,
        graql,
        gatling_adapt_per_goal: g,
        graql_adapt_per_goal: q,
        adaptation_ratio,
        truths_identical,
    })
}
