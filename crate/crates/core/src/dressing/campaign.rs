use std::fmt::Write as _;

use super::task::TaskSpec;
use super::trial::{run_trial, DressingController, Outcome, TrialRecord};
use crate::error::TaskError;
use crate::{par, seed};

/// Aggregate of one (task, controller, friction) campaign.
#[derive(Clone, Debug, PartialEq)]
pub struct CampaignResult {
    pub task: String,
    pub controller: String,
    pub friction: f64,
    pub seed: u64,
    pub records: Vec<TrialRecord>,
}

impl CampaignResult {
    pub fn from_records(task: &str, controller: &str, friction: f64, seed: u64, records: Vec<TrialRecord>) -> Self {
        Self { task: task.into(), controller: controller.into(), friction, seed, records }
    }

    fn rate(&self, o: Outcome) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records.iter().filter(|r| r.outcome == o).count() as f64 / self.records.len() as f64
    }

    pub fn success_rate(&self) -> f64 {
        self.rate(Outcome::Success)
    }

    pub fn torn_rate(&self) -> f64 {
        self.rate(Outcome::Torn)
    }

    pub fn timeout_rate(&self) -> f64 {
        self.rate(Outcome::Timeout)
    }

    /// Mean time to completion over successes; `None` when nothing succeeded.
    pub fn mean_tc(&self) -> Option<f64> {
        let tcs: Vec<f64> = self.records.iter().filter_map(|r| r.time_to_completion).collect();
        (!tcs.is_empty()).then(|| tcs.iter().sum::<f64>() / tcs.len() as f64)
    }
}

/// Per-trial seed within a campaign.
pub fn trial_seed(campaign_seed: u64, index: usize) -> u64 {
    seed::derive(campaign_seed, seed::stream::TRIAL, index as u64)
}

/// Runs `n_trials` independent trials; records come back in trial-index order.
pub fn run_campaign(task: &TaskSpec, controller: &DressingController, n_trials: usize) -> Result<CampaignResult, TaskError> {
    if n_trials == 0 {
        return Err(TaskError::Invalid("campaign needs at least one trial".into()));
    }
    task.validate()?;
    let records = par::try_map_indexed(n_trials, |i| run_trial(task, controller, trial_seed(task.seed, i), false))?;
    Ok(CampaignResult::from_records(&task.name, controller.name(), task.cloth.friction, task.seed, records))
}

/// Uniformly spaced coefficients `k * max / (n - 1)`.
pub fn friction_grid(max: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|k| max * k as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepPoint {
    pub coefficient: f64,
    pub success_rate: f64,
    pub torn_rate: f64,
    pub timeout_rate: f64,
    pub mean_tc: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub controller: String,
    pub points: Vec<SweepPoint>,
    pub campaigns: Vec<CampaignResult>,
}

/// One campaign per (controller, coefficient). Coefficient `k` uses campaign seed
/// `derive(task.seed, SWEEP, k)` for every controller, so controllers see the same scenes.
pub fn friction_sweep(
    task: &TaskSpec,
    controllers: &[DressingController],
    max_friction: f64,
    n_coefficients: usize,
    trials_per: usize,
) -> Result<Vec<SweepResult>, TaskError> {
    if n_coefficients == 0 || trials_per == 0 {
        return Err(TaskError::Invalid("sweep needs at least one coefficient and one trial".into()));
    }
    if !(max_friction >= 0.0 && max_friction.is_finite()) {
        return Err(TaskError::Invalid(format!("bad friction range [0, {max_friction}]")));
    }
    task.validate()?;
    let grid = friction_grid(max_friction, n_coefficients);
    let tasks: Vec<TaskSpec> = grid
        .iter()
        .enumerate()
        .map(|(k, &mu)| {
            let mut t = task.clone();
            t.cloth.friction = mu;
            t.seed = seed::derive(task.seed, seed::stream::SWEEP, k as u64);
            t
        })
        .collect();
    let per_controller = n_coefficients * trials_per;
    let flat = par::try_map_indexed(controllers.len() * per_controller, |j| {
        let (c, rest) = (j / per_controller, j % per_controller);
        let t = &tasks[rest / trials_per];
        run_trial(t, &controllers[c], trial_seed(t.seed, rest % trials_per), false)
    })?;
    let mut it = flat.into_iter();
    let mut out = Vec::with_capacity(controllers.len());
    for ctl in controllers {
        let mut campaigns = Vec::with_capacity(n_coefficients);
        for t in &tasks {
            let records: Vec<TrialRecord> = it.by_ref().take(trials_per).collect();
            campaigns.push(CampaignResult::from_records(&t.name, ctl.name(), t.cloth.friction, t.seed, records));
        }
        let points = campaigns
            .iter()
            .map(|c| SweepPoint {
                coefficient: c.friction,
                success_rate: c.success_rate(),
                torn_rate: c.torn_rate(),
                timeout_rate: c.timeout_rate(),
                mean_tc: c.mean_tc(),
            })
            .collect();
        out.push(SweepResult { controller: ctl.name().into(), points, campaigns });
    }
    Ok(out)
}

/// Marker written for a mean time to completion with no successes.
pub const NOT_APPLICABLE: &str = "N/A";

fn tc_text(tc: Option<f64>) -> String {
    tc.map_or_else(|| NOT_APPLICABLE.to_string(), |v| format!("{v:.4}"))
}

pub const TRIALS_HEADER: &str = "task,controller,seed,friction,outcome,tc,max_force_ratio";
pub const SUMMARY_HEADER: &str = "task,controller,friction,trials,success_rate,torn_rate,timeout_rate,mean_tc";

/// One row per trial, no header.
pub fn trials_csv_rows(c: &CampaignResult, out: &mut String) {
    for r in &c.records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{:.6}",
            c.task,
            c.controller,
            r.seed,
            r.friction,
            r.outcome,
            tc_text(r.time_to_completion),
            r.max_force_ratio
        );
    }
}

/// One summary row, no header.
pub fn summary_csv_row(c: &CampaignResult, out: &mut String) {
    let _ = writeln!(
        out,
        "{},{},{},{},{:.4},{:.4},{:.4},{}",
        c.task,
        c.controller,
        c.friction,
        c.records.len(),
        c.success_rate(),
        c.torn_rate(),
        c.timeout_rate(),
        tc_text(c.mean_tc())
    );
}

/// Wide table: `coefficient` then `<controller>_success_rate` per controller.
pub fn sweep_csv(results: &[SweepResult]) -> String {
    let mut s = String::from("coefficient");
    for r in results {
        let _ = write!(s, ",{}_success_rate", r.controller);
    }
    s.push('\n');
    let n = results.first().map_or(0, |r| r.points.len());
    for k in 0..n {
        let _ = write!(s, "{}", results[0].points[k].coefficient);
        for r in results {
            let _ = write!(s, ",{:.4}", r.points[k].success_rate);
        }
        s.push('\n');
    }
    s
}

pub const SWEEP_DETAIL_HEADER: &str = "controller,coefficient,success_rate,torn_rate,timeout_rate,mean_tc";

/// Long table with every rate per (controller, coefficient).
pub fn sweep_detail_csv(results: &[SweepResult]) -> String {
    let mut s = format!("{SWEEP_DETAIL_HEADER}\n");
    for r in results {
        for p in &r.points {
            let _ = writeln!(
                s,
                "{},{},{:.4},{:.4},{:.4},{}",
                r.controller,
                p.coefficient,
                p.success_rate,
                p.torn_rate,
                p.timeout_rate,
                tc_text(p.mean_tc)
            );
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(outcome: Outcome, tc: Option<f64>) -> TrialRecord {
        TrialRecord { seed: 0, friction: 0.2, outcome, time_to_completion: tc, max_force_ratio: 0.0, diagnostic: None, trajectory: None }
    }

    #[test]
    fn rates_and_tc() {
        let c = CampaignResult::from_records("t", "c", 0.2, 0, vec![rec(Outcome::Success, Some(2.0)); 4]);
        assert_eq!(c.success_rate(), 1.0);
        assert_eq!(c.mean_tc(), Some(2.0));
        let c = CampaignResult::from_records("t", "c", 0.2, 0, vec![rec(Outcome::Torn, None), rec(Outcome::Timeout, None)]);
        assert_eq!(c.success_rate(), 0.0);
        assert_eq!(c.mean_tc(), None);
        assert_eq!(c.torn_rate() + c.timeout_rate(), 1.0);
        let mut row = String::new();
        summary_csv_row(&c, &mut row);
        assert!(row.trim_end().ends_with(",N/A"), "{row}");
    }

    #[test]
    fn grid_is_uniform() {
        let g = friction_grid(1.0, 26);
        assert_eq!(g.len(), 26);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[25], 1.0);
        assert!((g[5] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn zero_trials_rejected() {
        let ctl = super::super::trial::make_baseline1(0.25).unwrap();
        assert!(run_campaign(&TaskSpec::tube(), &ctl, 0).is_err());
    }
}
