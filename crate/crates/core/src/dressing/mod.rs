//! Dressing tasks: garment and manipulator setup, the three-phase trial protocol,
//! the proposed and baseline controllers, campaign metrics and friction sweeps.

mod campaign;
mod task;
mod trial;

pub use campaign::{
    friction_grid, friction_sweep, run_campaign, summary_csv_row, sweep_csv, sweep_detail_csv, trial_seed, trials_csv_rows, CampaignResult,
    SweepPoint, SweepResult, NOT_APPLICABLE, SUMMARY_HEADER, SWEEP_DETAIL_HEADER, TRIALS_HEADER,
};
pub use task::{Scene, TaskKind, TaskSpec, TubeGeometry};
pub use trial::{advance_target, make_baseline1, run_trial, ControllerKind, DressingController, Outcome, Phase, TrajectorySample, TrialRecord};
