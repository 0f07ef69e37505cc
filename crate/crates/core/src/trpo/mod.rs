//! Trust-region policy optimization with generalized advantage estimation on
//! the funnel task.

pub mod gae;
pub mod rollout;
mod train;
mod update;
mod value;

pub use gae::{compute_gae, gae_episode};
pub use rollout::{collect_rollouts, run_episode, ActionSource, Episode, Greedy, RolloutBatch, Stochastic};
pub use train::{
    checkpoint_dir, curve_to_csv, evaluate, parse_curve_csv, CurveRow, EvalSummary, IterationReport, TrainConfig,
    Trainer, CURVE_FILE, CURVE_HEADER, POLICY_FILE, STATE_FILE, VALUE_FILE,
};
pub use update::{conjugate_gradient, trpo_update, BatchCache, TrpoSettings, UpdateDiagnostics};
pub use value::{ValueFitSettings, ValueFunction};
