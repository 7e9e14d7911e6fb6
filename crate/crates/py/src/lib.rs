//! Python bindings for the goal-recognition toolkit.
//!
//! Exposes the grid, Q-table, library, trace and recognition types plus the
//! training / transfer / inference operations. Coordinates cross the
//! boundary as `(x, y)` tuples and actions as their canonical `0..4`
//! encoding (up, right, down, left).
//!
//! Build with `cargo build --release -p gatling-py`; the resulting cdylib
//! imports as `gatling_py` (see `python/smoke_test.py`).

use std::str::FromStr;
use std::sync::Arc;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use gatling_core::grid::{Action, Goal, GridState};
use gatling_core::qlearn::{ActorRule, TrainConfig};
use gatling_core::recognize::{PolicyRule, RecognizerConfig};
use gatling_core::report::ReportFormat;
use gatling_core::scenario::Scenario;
use gatling_core::trace::SampleMode;
use gatling_core::transfer::{Aggregation, TransferOptions, WeightScheme};
use gatling_core::{qlearn, recognize, report, scenario, trace, transfer};

fn err(e: gatling_core::Error) -> PyErr {
    PyValueError::new_err(format!("{}: {e}", e.class()))
}

fn state(xy: (u32, u32)) -> GridState {
    GridState::new(xy.0, xy.1)
}

fn goal(xy: (u32, u32)) -> Goal {
    Goal::new(xy.0, xy.1)
}

fn parse_weights(s: &str) -> PyResult<WeightScheme> {
    match s {
        "static" => Ok(WeightScheme::Static),
        "dynamic" => Ok(WeightScheme::Dynamic),
        other => Err(PyValueError::new_err(format!(
            "unknown weight scheme '{other}'"
        ))),
    }
}

fn parse_aggregation(s: &str) -> PyResult<Aggregation> {
    match s {
        "normalize" => Ok(Aggregation::Normalize),
        "softmax" => Ok(Aggregation::SoftmaxWeights),
        "max" => Ok(Aggregation::Max),
        other => Err(PyValueError::new_err(format!(
            "unknown aggregation '{other}'"
        ))),
    }
}

fn parse_policy(s: &str, beta: f64) -> PyResult<PolicyRule> {
    match s {
        "softmax" => Ok(PolicyRule::Softmax { beta }),
        "ratio" => Ok(PolicyRule::Ratio),
        other => Err(PyValueError::new_err(format!(
            "unknown policy rule '{other}'"
        ))),
    }
}

fn parse_mode(s: &str) -> PyResult<SampleMode> {
    match s {
        "random" => Ok(SampleMode::Random),
        "prefix" => Ok(SampleMode::Prefix),
        other => Err(PyValueError::new_err(format!("unknown mode '{other}'"))),
    }
}

/// A deterministic navigation grid.
#[pyclass(name = "GridSpec", from_py_object)]
#[derive(Clone)]
struct PyGridSpec {
    inner: Arc<gatling_core::grid::GridSpec>,
}

#[pymethods]
impl PyGridSpec {
    /// An n-by-n grid with a walled border and empty playable interior.
    #[staticmethod]
    fn empty(n: u32) -> PyResult<Self> {
        Ok(Self {
            inner: gatling_core::grid::GridSpec::make_empty(n).map_err(err)?,
        })
    }

    /// An n-by-n grid with two pierced full-length walls.
    #[staticmethod]
    #[pyo3(signature = (n, seed=0))]
    fn crossing(n: u32, seed: u64) -> PyResult<Self> {
        Ok(Self {
            inner: gatling_core::grid::GridSpec::make_simple_crossing(n, seed).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: gatling_core::grid::GridSpec::from_json(text).map_err(err)?,
        })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_string()
    }

    #[getter]
    fn width(&self) -> u32 {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> u32 {
        self.inner.height()
    }

    /// Free cells in row-major order.
    fn states(&self) -> Vec<(u32, u32)> {
        self.inner.states().iter().map(|s| (s.x, s.y)).collect()
    }

    fn is_free(&self, cell: (u32, u32)) -> bool {
        self.inner.is_free(state(cell))
    }

    fn transition(&self, cell: (u32, u32), action: u8) -> PyResult<(u32, u32)> {
        let a = Action::from_index(action as usize)
            .ok_or_else(|| PyValueError::new_err(format!("bad action {action}")))?;
        let t = self.inner.transition(state(cell), a);
        Ok((t.x, t.y))
    }

    /// ASCII rendering: '#' wall, '.' free, 'G' goal.
    #[pyo3(signature = (goal=None))]
    fn ascii(&self, goal: Option<(u32, u32)>) -> String {
        self.inner.ascii(goal.map(|g| Goal::new(g.0, g.1)))
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn __repr__(&self) -> String {
        format!(
            "GridSpec('{}', {}x{}, {} free cells)",
            self.inner.name(),
            self.inner.width(),
            self.inner.height(),
            self.inner.n_states()
        )
    }
}

/// A per-goal utility table.
#[pyclass(name = "QTable", from_py_object)]
#[derive(Clone)]
struct PyQTable {
    inner: qlearn::QTable,
}

#[pymethods]
impl PyQTable {
    #[getter]
    fn goal(&self) -> (u32, u32) {
        let g = self.inner.goal().state();
        (g.x, g.y)
    }

    fn q(&self, cell: (u32, u32), action: u8) -> PyResult<f64> {
        let a = Action::from_index(action as usize)
            .ok_or_else(|| PyValueError::new_err(format!("bad action {action}")))?;
        Ok(self.inner.q(state(cell), a))
    }

    fn row(&self, cell: (u32, u32)) -> [f64; 4] {
        self.inner.row(state(cell))
    }

    /// Actions attaining the row maximum.
    fn greedy(&self, cell: (u32, u32)) -> Vec<u32> {
        self.inner
            .greedy_set(state(cell))
            .into_iter()
            .map(|a| a as u32)
            .collect()
    }

    /// The utility-normalization policy at a state.
    fn policy(&self, cell: (u32, u32)) -> PyResult<[f64; 4]> {
        Ok(qlearn::policy_from_q(&self.inner, state(cell))
            .map_err(err)?
            .probs)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[staticmethod]
    fn from_json(text: &str, spec: &PyGridSpec) -> PyResult<Self> {
        Ok(Self {
            inner: qlearn::QTable::from_json(text, &spec.inner).map_err(err)?,
        })
    }

    fn __repr__(&self) -> String {
        let g = self.inner.goal().state();
        format!("QTable(goal=({}, {}), spec='{}')", g.x, g.y, self.inner.spec().name())
    }
}

/// A goal set with one Q-table per goal.
#[pyclass(name = "GoalLibrary", from_py_object)]
#[derive(Clone)]
struct PyGoalLibrary {
    inner: transfer::GoalLibrary,
}

#[pymethods]
impl PyGoalLibrary {
    #[new]
    fn new(spec: &PyGridSpec, tables: Vec<PyQTable>) -> PyResult<Self> {
        Ok(Self {
            inner: transfer::GoalLibrary::new(
                spec.inner.clone(),
                tables.into_iter().map(|t| t.inner).collect(),
            )
            .map_err(err)?,
        })
    }

    fn goals(&self) -> Vec<(u32, u32)> {
        self.inner
            .goals()
            .into_iter()
            .map(|g| (g.state().x, g.state().y))
            .collect()
    }

    fn tables(&self) -> Vec<PyQTable> {
        self.inner
            .tables()
            .iter()
            .map(|t| PyQTable { inner: t.clone() })
            .collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[staticmethod]
    fn from_json(text: &str, spec: &PyGridSpec) -> PyResult<Self> {
        Ok(Self {
            inner: transfer::GoalLibrary::from_json(text, &spec.inner).map_err(err)?,
        })
    }
}

/// An actor observation sequence.
#[pyclass(name = "Trace", from_py_object)]
#[derive(Clone)]
struct PyTrace {
    inner: trace::ObservationTrace,
}

#[pymethods]
impl PyTrace {
    #[getter]
    fn observability(&self) -> f64 {
        self.inner.observability
    }

    #[getter]
    fn true_goal(&self) -> Option<(u32, u32)> {
        self.inner.true_goal.map(|g| (g.state().x, g.state().y))
    }

    #[getter]
    fn truncated(&self) -> bool {
        self.inner.truncated
    }

    /// `(step, (x, y), action)` triples in chronological order.
    fn observations(&self) -> Vec<(u32, (u32, u32), u8)> {
        self.inner
            .observations
            .iter()
            .map(|o| (o.step_index, (o.state.x, o.state.y), o.action as u8))
            .collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: trace::ObservationTrace::from_json(text).map_err(err)?,
        })
    }
}

/// Train one Q-table toward a goal.
#[pyfunction]
#[pyo3(signature = (spec, goal, episodes=200_000, alpha=1.0, gamma=0.99, explore_epsilon=0.1, seed=0))]
fn train(
    spec: &PyGridSpec,
    goal: (u32, u32),
    episodes: u64,
    alpha: f64,
    gamma: f64,
    explore_epsilon: f64,
    seed: u64,
) -> PyResult<PyQTable> {
    let cfg = TrainConfig {
        alpha,
        gamma,
        episodes,
        explore_epsilon,
        seed,
        ..TrainConfig::default()
    };
    Ok(PyQTable {
        inner: qlearn::train(&spec.inner, self::goal(goal), &cfg).map_err(err)?,
    })
}

/// Train one table per goal and bundle them as a library.
#[pyfunction]
#[pyo3(signature = (spec, goals, episodes=200_000, alpha=1.0, gamma=0.99, explore_epsilon=0.1, seed=0))]
#[allow(clippy::too_many_arguments)]
fn train_library(
    spec: &PyGridSpec,
    goals: Vec<(u32, u32)>,
    episodes: u64,
    alpha: f64,
    gamma: f64,
    explore_epsilon: f64,
    seed: u64,
) -> PyResult<PyGoalLibrary> {
    let mut tables = Vec::with_capacity(goals.len());
    for (i, g) in goals.iter().enumerate() {
        let cfg = TrainConfig {
            alpha,
            gamma,
            episodes,
            explore_epsilon,
            seed: gatling_core::seeding::mix_all(seed, &[i as u64]),
            ..TrainConfig::default()
        };
        tables.push(qlearn::train(&spec.inner, goal(*g), &cfg).map_err(err)?);
    }
    Ok(PyGoalLibrary {
        inner: transfer::GoalLibrary::new(spec.inner.clone(), tables).map_err(err)?,
    })
}

/// Exact utilities from synchronous value iteration.
#[pyfunction]
#[pyo3(signature = (spec, goal, gamma=0.99, tol=1e-9))]
fn value_iteration(spec: &PyGridSpec, goal: (u32, u32), gamma: f64, tol: f64) -> PyResult<PyQTable> {
    Ok(PyQTable {
        inner: qlearn::value_iteration(&spec.inner, self::goal(goal), gamma, tol).map_err(err)?,
    })
}

/// Synthesize tables for new goals by weighted aggregation of a library.
#[pyfunction]
#[pyo3(signature = (library, goals, weights="dynamic", aggregation="softmax", scaling=false, temperature=0.5))]
fn adapt(
    library: &PyGoalLibrary,
    goals: Vec<(u32, u32)>,
    weights: &str,
    aggregation: &str,
    scaling: bool,
    temperature: f64,
) -> PyResult<PyGoalLibrary> {
    let opts = TransferOptions {
        weight_scheme: parse_weights(weights)?,
        aggregation: parse_aggregation(aggregation)?,
        scaling_enabled: scaling,
        scaling_temperature: temperature,
    };
    let goals: Vec<Goal> = goals.into_iter().map(goal).collect();
    let adaptation = transfer::adapt_goals(&library.inner, &goals, &opts).map_err(err)?;
    Ok(PyGoalLibrary {
        inner: adaptation.library,
    })
}

/// Cosine similarity of the displacement vectors from a state toward two
/// goals.
#[pyfunction]
fn cosine_similarity(s: (u32, u32), g_b: (u32, u32), g_d: (u32, u32)) -> f64 {
    transfer::cosine_similarity(state(s), goal(g_b), goal(g_d))
}

/// Roll an actor toward a goal and return the full trace.
#[pyfunction]
#[pyo3(signature = (spec, actor_q, start, goal, seed=0, actor="greedy", actor_beta=200.0))]
fn generate_trace(
    spec: &PyGridSpec,
    actor_q: &PyQTable,
    start: (u32, u32),
    goal: (u32, u32),
    seed: u64,
    actor: &str,
    actor_beta: f64,
) -> PyResult<PyTrace> {
    let rule = match actor {
        "greedy" => ActorRule::Greedy,
        "softmax" => ActorRule::SoftmaxSample { beta: actor_beta },
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown actor rule '{other}'"
            )))
        }
    };
    Ok(PyTrace {
        inner: trace::generate_trace_with(
            &spec.inner,
            &actor_q.inner,
            state(start),
            self::goal(goal),
            rule,
            seed,
        )
        .map_err(err)?,
    })
}

/// Keep a fraction of a trace's observations.
#[pyfunction]
#[pyo3(signature = (t, fraction, mode="random", seed=0))]
fn subsample(t: &PyTrace, fraction: f64, mode: &str, seed: u64) -> PyResult<PyTrace> {
    Ok(PyTrace {
        inner: trace::subsample(&t.inner, fraction, parse_mode(mode)?, seed).map_err(err)?,
    })
}

/// Recognize the goal of a trace against a candidate library.
///
/// Returns a dict with `predicted`, `scores`, `trace_len` and `elapsed_us`.
#[pyfunction]
#[pyo3(signature = (library, t, smoothing=1e-8, policy="softmax", beta=1.0))]
fn infer(
    py: Python<'_>,
    library: &PyGoalLibrary,
    t: &PyTrace,
    smoothing: f64,
    policy: &str,
    beta: f64,
) -> PyResult<Py<pyo3::types::PyDict>> {
    let cfg = RecognizerConfig {
        smoothing,
        policy: parse_policy(policy, beta)?,
    };
    let r = recognize::infer(&library.inner, &t.inner, &cfg).map_err(err)?;
    let dict = pyo3::types::PyDict::new(py);
    let p = r.predicted.state();
    dict.set_item("predicted", (p.x, p.y))?;
    let scores: Vec<((u32, u32), f64)> = r
        .scores
        .iter()
        .map(|(g, m)| ((g.state().x, g.state().y), *m))
        .collect();
    dict.set_item("scores", scores)?;
    dict.set_item("trace_len", r.trace_len)?;
    dict.set_item("elapsed_us", r.elapsed.as_micros() as u64)?;
    Ok(dict.unbind())
}

/// Run a scenario file and return the outcome as a JSON string.
#[pyfunction]
fn run_scenario_file(path: &str) -> PyResult<String> {
    let s = Scenario::from_toml_path(std::path::Path::new(path)).map_err(err)?;
    let outcome = scenario::run_scenario(&s).map_err(err)?;
    Ok(report::scenario_json(&outcome))
}

/// Run a scenario under both recognizers and return the comparison report.
#[pyfunction]
#[pyo3(signature = (path, format="json"))]
fn compare_scenario_file(path: &str, format: &str) -> PyResult<String> {
    let s = Scenario::from_toml_path(std::path::Path::new(path)).map_err(err)?;
    let cmp = scenario::compare(&s).map_err(err)?;
    let fmt = ReportFormat::from_str(format).map_err(err)?;
    Ok(report::comparison(&cmp, fmt))
}

#[pymodule]
fn gatling_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyGridSpec>()?;
    m.add_class::<PyQTable>()?;
    m.add_class::<PyGoalLibrary>()?;
    m.add_class::<PyTrace>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(train_library, m)?)?;
    m.add_function(wrap_pyfunction!(value_iteration, m)?)?;
    m.add_function(wrap_pyfunction!(adapt, m)?)?;
    m.add_function(wrap_pyfunction!(cosine_similarity, m)?)?;
    m.add_function(wrap_pyfunction!(generate_trace, m)?)?;
    m.add_function(wrap_pyfunction!(subsample, m)?)?;
    m.add_function(wrap_pyfunction!(infer, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario_file, m)?)?;
    m.add_function(wrap_pyfunction!(compare_scenario_file, m)?)?;
    Ok(())
}
