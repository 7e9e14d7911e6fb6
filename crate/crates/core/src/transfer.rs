//! Q-function transfer: building a new goal's table out of base tables.
//!
//! A dynamic goal never gets trained from scratch. Instead, each base
//! table's utilities are weighted — either once per goal pair (static,
//! inverse Euclidean distance) or per state (dynamic, cosine similarity of
//! the displacement vectors toward the base and dynamic goals) — and folded
//! together with one of three aggregation methods. An optional per-state
//! power sharpening emphasizes each state's top-ranked actions afterwards.

use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Goal, GridSpec, GridState};
use crate::qlearn::QTable;

/// Per-base-goal weights used during aggregation.
///
/// Static weights are strictly positive; dynamic (cosine) weights lie in
/// `[-1, 1]` and may be negative.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(pub Vec<f64>);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightScheme {
    Static,
    Dynamic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// Weighted average: `sum_i w_i Q_i(s,a) / sum_j w_j`.
    Normalize,
    /// Weights pass through an exponential: `sum_i e^{w_i} Q_i / sum_j e^{w_j}`.
    #[serde(rename = "softmax")]
    SoftmaxWeights,
    /// Hard selection `max_i Q_i(s,a)`; ignores the weights entirely.
    Max,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransferOptions {
    pub weight_scheme: WeightScheme,
    pub aggregation: Aggregation,
    pub scaling_enabled: bool,
    pub scaling_temperature: f64,
}

impl Default for TransferOptions {
    fn default() -> Self {
        Self {
            weight_scheme: WeightScheme::Dynamic,
            aggregation: Aggregation::SoftmaxWeights,
            scaling_enabled: false,
            scaling_temperature: 0.5,
        }
    }
}

impl TransferOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.scaling_temperature > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "scaling_temperature must be positive, got {}",
                self.scaling_temperature
            )));
        }
        Ok(())
    }
}

/// How an adapted table was produced; stored alongside its values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub weight_scheme: WeightScheme,
    pub aggregation: Aggregation,
    /// Sharpening temperature when scaling was applied.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub scaling: Option<f64>,
    pub base_goals: Vec<Goal>,
}

/// A goal set paired with one Q-table per goal, all on the same grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GoalLibrary {
    spec: Arc<GridSpec>,
    tables: Vec<QTable>,
}

#[derive(Serialize, Deserialize)]
struct LibraryFile {
    spec_ref: String,
    tables: Vec<crate::qlearn::QTableFile>,
}

impl GoalLibrary {
    pub fn new(spec: Arc<GridSpec>, tables: Vec<QTable>) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for t in &tables {
            if t.spec().name() != spec.name() {
                return Err(Error::SpecMismatch(format!(
                    "table for goal {} was built on '{}', library grid is '{}'",
                    t.goal(),
                    t.spec().name(),
                    spec.name()
                )));
            }
            if !seen.insert(t.goal()) {
                return Err(Error::InvalidInput(format!(
                    "duplicate goal {} in library",
                    t.goal()
                )));
            }
        }
        Ok(Self { spec, tables })
    }

    pub fn empty(spec: Arc<GridSpec>) -> Self {
        Self {
            spec,
            tables: Vec::new(),
        }
    }

    pub fn spec(&self) -> &Arc<GridSpec> {
        &self.spec
    }

    pub fn goals(&self) -> Vec<Goal> {
        self.tables.iter().map(|t| t.goal()).collect()
    }

    pub fn tables(&self) -> &[QTable] {
        &self.tables
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    pub fn to_json(&self) -> String {
        let file = LibraryFile {
            spec_ref: self.spec.name().to_string(),
            tables: self.tables.iter().map(|t| t.to_file()).collect(),
        };
        serde_json::to_string(&file).expect("library serialization cannot fail")
    }

    pub fn from_json(text: &str, spec: &Arc<GridSpec>) -> Result<Self> {
        let file: LibraryFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("library json: {e}")))?;
        if file.spec_ref != spec.name() {
            return Err(Error::SpecMismatch(format!(
                "library was built on '{}', grid is '{}'",
                file.spec_ref,
                spec.name()
            )));
        }
        let tables = file
            .tables
            .into_iter()
            .map(|t| QTable::from_file(t, spec))
            .collect::<Result<Vec<_>>>()?;
        Self::new(spec.clone(), tables)
    }
}

/// Static weights from base-goal-to-dynamic-goal Euclidean distance:
/// `w_i = 1 / (1 + ||g_b_i - g_d||)`. Identical at every state; always
/// positive, so the Normalize denominator is safe under this scheme.
pub fn static_weights(base_goals: &[Goal], g_d: Goal) -> Result<WeightVector> {
    if base_goals.is_empty() {
        return Err(Error::InvalidInput("no base goals for weighting".into()));
    }
    Ok(WeightVector(
        base_goals
            .iter()
            .map(|b| 1.0 / (1.0 + b.state().euclidean(g_d.state())))
            .collect(),
    ))
}

/// Cosine of the angle between the displacement vectors `s -> g_b` and
/// `s -> g_d`. Ranges over `[-1, 1]`; 1 means the goals lie in the same
/// direction from `s`, -1 opposite directions, 0 orthogonal. When `s`
/// coincides with either goal the direction is undefined and 0 (the neutral
/// weight) is returned.
pub fn cosine_similarity(s: GridState, g_b: Goal, g_d: Goal) -> f64 {
    let (ux, uy) = s.displacement(g_b.state());
    let (vx, vy) = s.displacement(g_d.state());
    let nu = (ux * ux + uy * uy).sqrt();
    let nv = (vx * vx + vy * vy).sqrt();
    if nu == 0.0 || nv == 0.0 {
        return 0.0;
    }
    ((ux * vx + uy * vy) / (nu * nv)).clamp(-1.0, 1.0)
}

/// Per-state dynamic weights: `w_i = cosine_similarity(s, g_b_i, g_d)`.
pub fn dynamic_weights(s: GridState, base_goals: &[Goal], g_d: Goal) -> Result<WeightVector> {
    if base_goals.is_empty() {
        return Err(Error::InvalidInput("no base goals for weighting".into()));
    }
    Ok(WeightVector(
        base_goals
            .iter()
            .map(|b| cosine_similarity(s, *b, g_d))
            .collect(),
    ))
}

/// Counters for the places aggregation had to intervene.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateDiagnostics {
    /// States where the Normalize denominator was within 1e-12 of zero and
    /// uniform weights were substituted.
    pub normalize_fallback_states: usize,
    /// Entries that came out negative (possible under dynamic weights) and
    /// were clamped to zero to keep the Q-table invariant.
    pub clamped_entries: usize,
}

impl AggregateDiagnostics {
    fn absorb(&mut self, other: AggregateDiagnostics) {
        self.normalize_fallback_states += other.normalize_fallback_states;
        self.clamped_entries += other.clamped_entries;
    }
}

/// Combine base tables into a table for `goal`, using `weights_at` to
/// produce the weight vector at each state.
///
/// The output is a heuristic utility table: it carries no guarantee beyond
/// what the weighting gives it, but it always satisfies the Q-table type
/// invariant (finite, nonnegative) — negative aggregates are clamped to
/// zero and counted in the diagnostics rather than raised as errors.
pub fn aggregate<F>(
    tables: &[&QTable],
    goal: Goal,
    weights_at: F,
    method: Aggregation,
) -> Result<(QTable, AggregateDiagnostics)>
where
    F: Fn(GridState) -> WeightVector,
{
    if tables.is_empty() {
        return Err(Error::InvalidInput("aggregate needs at least one table".into()));
    }
    let spec = tables[0].spec().clone();
    for t in tables {
        if t.spec().name() != spec.name() {
            return Err(Error::SpecMismatch(format!(
                "aggregation inputs span grids '{}' and '{}'",
                spec.name(),
                t.spec().name()
            )));
        }
    }
    spec.check_goal(goal)?;

    let mut diag = AggregateDiagnostics::default();
    let mut values = vec![0.0f64; spec.n_states() * 4];
    for (si, &s) in spec.states().iter().enumerate() {
        let WeightVector(w) = weights_at(s);
        if w.len() != tables.len() {
            return Err(Error::InvalidInput(format!(
                "weight vector has {} entries for {} tables",
                w.len(),
                tables.len()
            )));
        }
        let rows: Vec<[f64; 4]> = tables.iter().map(|t| t.row(s)).collect();
        let out = &mut values[si * 4..si * 4 + 4];
        match method {
            Aggregation::Normalize => {
                // A weighted average needs a meaningfully positive total
                // weight; a near-zero total blows up and a negative one
                // inverts every action ranking. Both degenerate cases fall
                // back to uniform weights and are counted.
                let denom: f64 = w.iter().sum();
                let (weights, denom) = if denom <= 1e-12 {
                    diag.normalize_fallback_states += 1;
                    (vec![1.0; w.len()], w.len() as f64)
                } else {
                    (w, denom)
                };
                for a in 0..4 {
                    let num: f64 = weights
                        .iter()
                        .zip(&rows)
                        .map(|(wi, row)| wi * row[a])
                        .sum();
                    out[a] = num / denom;
                }
            }
            Aggregation::SoftmaxWeights => {
                let exps: Vec<f64> = w.iter().map(|wi| wi.exp()).collect();
                let denom: f64 = exps.iter().sum();
                for a in 0..4 {
                    let num: f64 = exps.iter().zip(&rows).map(|(e, row)| e * row[a]).sum();
                    out[a] = num / denom;
                }
            }
            Aggregation::Max => {
                for a in 0..4 {
                    out[a] = rows.iter().map(|row| row[a]).fold(f64::NEG_INFINITY, f64::max);
                }
            }
        }
        for v in out.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
                diag.clamped_entries += 1;
            }
        }
    }
    let table = QTable::from_values(spec, goal, values)?;
    Ok((table, diag))
}

/// Per-state power sharpening: with row maximum `m > 0`, each entry becomes
/// `m * (v / m)^(1/temperature)`. Temperatures below 1 push mass toward the
/// top-ranked action(s); 1 is the identity; ties at the maximum survive
/// unchanged at any temperature. All-zero rows pass through.
pub fn scale_qtable(q: &QTable, temperature: f64) -> Result<QTable> {
    if !(temperature > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "scaling temperature must be positive, got {temperature}"
        )));
    }
    if temperature == 1.0 {
        return Ok(q.clone());
    }
    let inv = 1.0 / temperature;
    let spec = q.spec().clone();
    let mut values = Vec::with_capacity(q.values().len());
    for &s in spec.states() {
        let row = q.row(s);
        let m = row.into_iter().fold(f64::NEG_INFINITY, f64::max);
        if m > 0.0 {
            for v in row {
                if v == m {
                    values.push(m);
                } else {
                    values.push(m * (v / m).powf(inv));
                }
            }
        } else {
            values.extend_from_slice(&row);
        }
    }
    QTable::from_values(spec, q.goal(), values)
}

/// Result of adapting a set of dynamic goals.
#[derive(Debug)]
pub struct Adaptation {
    pub library: GoalLibrary,
    pub diagnostics: AggregateDiagnostics,
    /// Wall-clock duration of the whole adaptation (the goals-adaptation
    /// phase cost for this goal set).
    pub elapsed: Duration,
}

/// Build a library for `dynamic_goals` by weighting and aggregating the
/// base library's tables per `opts`, optionally sharpening the result.
/// An empty dynamic goal list yields an empty library.
pub fn adapt_goals(
    base: &GoalLibrary,
    dynamic_goals: &[Goal],
    opts: &TransferOptions,
) -> Result<Adaptation> {
    opts.validate()?;
    if base.is_empty() {
        return Err(Error::InvalidInput(
            "cannot adapt from an empty base library".into(),
        ));
    }
    let start = Instant::now();
    let spec = base.spec().clone();
    let base_goals = base.goals();
    let tables: Vec<&QTable> = base.tables().iter().collect();

    // The sharpener exists because the desired action may not end up
    // top-ranked after aggregation: averaging near-flat utility tables
    // drowns the per-goal signal. Emphasizing each base table's top
    // action(s) before mixing keeps the aggregate directional, so scaling
    // is applied to the inputs.
    let scaled_tables: Vec<QTable>;
    let tables: Vec<&QTable> = if opts.scaling_enabled {
        scaled_tables = base
            .tables()
            .iter()
            .map(|t| scale_qtable(t, opts.scaling_temperature))
            .collect::<Result<_>>()?;
        scaled_tables.iter().collect()
    } else {
        tables
    };

    let mut diagnostics = AggregateDiagnostics::default();
    let mut adapted = Vec::with_capacity(dynamic_goals.len());
    for &g_d in dynamic_goals {
        spec.check_goal(g_d)?;
        let (mut table, diag) = match opts.weight_scheme {
            WeightScheme::Static => {
                let w = static_weights(&base_goals, g_d)?;
                aggregate(&tables, g_d, |_s| w.clone(), opts.aggregation)?
            }
            WeightScheme::Dynamic => aggregate(
                &tables,
                g_d,
                |s| dynamic_weights(s, &base_goals, g_d).expect("base goals nonempty"),
                opts.aggregation,
            )?,
        };
        diagnostics.absorb(diag);
        table.set_provenance(Provenance {
            weight_scheme: opts.weight_scheme,
            aggregation: opts.aggregation,
            scaling: opts.scaling_enabled.then_some(opts.scaling_temperature),
            base_goals: base_goals.clone(),
        });
        adapted.push(table);
    }
    let library = GoalLibrary::new(spec, adapted)?;
    Ok(Adaptation {
        library,
        diagnostics,
        elapsed: start.elapsed(),
    })
}
