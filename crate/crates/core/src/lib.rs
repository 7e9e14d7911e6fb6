//! Goal recognition in deterministic gridworlds.
//!
//! The crate learns one tabular Q-function per navigation goal, synthesizes
//! Q-functions for goals that arrive later by weighted aggregation of the
//! already-trained tables, and recognizes which goal an observed actor is
//! pursuing by scoring its partial state/action trace against each candidate
//! policy with a smoothed KL divergence.
//!
//! Modules follow the pipeline:
//!
//! - [`grid`]: the deterministic navigation MDP (states, cardinal actions,
//!   wall-blocking transitions, goal-entry reward).
//! - [`qlearn`]: tabular Q-learning, a value-iteration oracle, and policies
//!   derived from Q-tables.
//! - [`transfer`]: weighting schemes (Euclidean, cosine-similarity) and
//!   aggregation methods that build a new goal's Q-table out of base tables.
//! - [`trace`]: actor trajectory generation and partial-observability
//!   subsampling, plus the trace file formats.
//! - [`recognize`]: pseudo-policy construction and KL-divergence goal
//!   scoring.
//! - [`metrics`]: accuracy / precision / recall / F-score over batches of
//!   recognition episodes.
//! - [`scenario`]: the sequential event harness that times the three solver
//!   phases and drives whole experiments, including the retrain-per-goal
//!   baseline comparison.
//! - [`report`]: CSV / markdown / JSON emission of result tables.

pub mod error;
pub mod grid;
pub mod metrics;
pub mod qlearn;
pub mod recognize;
pub mod report;
pub mod scenario;
pub mod seeding;
pub mod trace;
pub mod transfer;

pub use error::{Error, Result};
pub use grid::{Action, Goal, GridSpec, GridState};
pub use qlearn::{ActionDistribution, QTable, TrainConfig};
pub use recognize::{RecognitionResult, RecognizerConfig};
pub use trace::ObservationTrace;
pub use transfer::{GoalLibrary, TransferOptions};
