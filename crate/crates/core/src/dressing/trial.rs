use std::fmt;
use std::path::PathBuf;

use super::task::TaskSpec;
use crate::cloth::{step_cloth, ColliderMotion};
use crate::error::TaskError;
use crate::geom::{spline_from_centroids, Spline, Vec3};
use crate::manipulator::{control_step, ControlState, Controller};
use crate::policy::PolicyParams;
use crate::seed;

/// Controller named by a task run, before policy files are read.
#[derive(Clone, Debug, PartialEq)]
pub enum ControllerKind {
    Proposed(PathBuf),
    Baseline1 { speed: f64 },
    Baseline2(PathBuf),
}

impl ControllerKind {
    pub fn load(&self) -> Result<DressingController, TaskError> {
        Ok(match self {
            ControllerKind::Proposed(p) => DressingController::Proposed(PolicyParams::load(p)?),
            ControllerKind::Baseline1 { speed } => make_baseline1(*speed)?,
            ControllerKind::Baseline2(p) => DressingController::Baseline2(PolicyParams::load(p)?),
        })
    }
}

/// A ready-to-run dressing controller.
#[derive(Clone, Debug)]
pub enum DressingController {
    /// Haptic sphere policy.
    Proposed(PolicyParams),
    /// Leading sphere moves straight at the target with a fixed speed; haptics unused.
    Baseline1 { speed: f64 },
    /// Haptic sphere policy trained with a force-magnitude penalty.
    Baseline2(PolicyParams),
}

pub fn make_baseline1(speed: f64) -> Result<DressingController, TaskError> {
    if !(speed > 0.0 && speed.is_finite()) {
        return Err(TaskError::Invalid(format!("baseline speed must be positive, got {speed}")));
    }
    Ok(DressingController::Baseline1 { speed })
}

impl DressingController {
    pub fn name(&self) -> &'static str {
        match self {
            DressingController::Proposed(_) => "proposed",
            DressingController::Baseline1 { .. } => "baseline1",
            DressingController::Baseline2(_) => "baseline2",
        }
    }

    pub fn controller(&self) -> Controller<'_> {
        match self {
            DressingController::Proposed(p) | DressingController::Baseline2(p) => Controller::Haptic(p),
            DressingController::Baseline1 { speed } => Controller::Linear { speed: *speed },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Outcome {
    Success,
    Timeout,
    Torn,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::Timeout => "timeout",
            Outcome::Torn => "torn",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Settle,
    Interpolate,
    Control,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Settle => "settle",
            Phase::Interpolate => "interpolate",
            Phase::Control => "control",
        }
    }
}

/// One control-period sample of a trial.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectorySample {
    pub time: f64,
    pub phase: Phase,
    pub leading: Vec3,
    pub target: Vec3,
    /// Arc-length parameter of the leading target (0 outside the control phase).
    pub target_arc: f64,
    pub max_force_ratio: f64,
    /// Sphere carrying `max_force_ratio`.
    pub max_sphere: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub seed: u64,
    pub friction: f64,
    pub outcome: Outcome,
    /// Control-phase time to completion; successes only.
    pub time_to_completion: Option<f64>,
    /// Largest binned force ratio seen during the control phase.
    pub max_force_ratio: f64,
    /// Set when the simulation diverged; such trials count as torn.
    pub diagnostic: Option<String>,
    pub trajectory: Option<Vec<TrajectorySample>>,
}

/// Leading target: a point `lead` metres of arc past the closest point to the leading
/// sphere, clamped to the spline end and never moving backwards.
pub fn advance_target(spline: &Spline, leading: Vec3, lead: f64, previous: f64) -> f64 {
    let len = spline.length();
    previous.max((spline.closest_arc_length(leading) + lead).min(len)).min(len)
}

fn steps(duration: f64, dt: f64) -> usize {
    (duration / dt - 1e-9).ceil().max(0.0) as usize
}

fn diverged(task: &TaskSpec, seed: u64, max_ratio: f64, detail: String, trajectory: Option<Vec<TrajectorySample>>) -> TrialRecord {
    log::warn!("trial {seed}: {detail}");
    TrialRecord {
        seed,
        friction: task.cloth.friction,
        outcome: Outcome::Torn,
        time_to_completion: None,
        max_force_ratio: max_ratio,
        diagnostic: Some(detail),
        trajectory,
    }
}

/// One dressing rollout: settle, interpolate to the sampled pose, then closed-loop control.
pub fn run_trial(task: &TaskSpec, controller: &DressingController, seed: u64, record_trajectory: bool) -> Result<TrialRecord, TaskError> {
    task.validate()?;
    let mut rng = seed::rng(seed);
    let scene = task.sample_scene(&mut rng)?;
    let chain = &scene.manipulator.chain;
    let layout = &scene.manipulator.layout;
    let mut cloth = scene.garment;
    let params = &task.cloth;
    let dt = params.dt;
    let lead_idx = layout.leading_index();
    let loops: Vec<Vec<usize>> = task.guiding_loops.iter().map(|n| cloth.loops[n].clone()).collect();
    let mut log = record_trajectory.then(Vec::new);
    let leading_of = |q: &[f64]| layout.centers(chain, &chain.forward_kinematics(q))[lead_idx];

    // Settle with the manipulator held at rest, then move it linearly in joint space.
    let mut time = 0.0;
    let resting = chain.capsules(&chain.forward_kinematics(&scene.rest));
    let fixed: Vec<ColliderMotion> = resting.iter().map(|c| ColliderMotion::fixed(*c)).collect();
    for _ in 0..steps(task.settle_duration, dt) {
        if let Err(e) = step_cloth(&mut cloth, params, &fixed) {
            return Ok(diverged(task, seed, 0.0, format!("settle: {e}"), log));
        }
        time += dt;
        if let Some(l) = log.as_mut() {
            let p = leading_of(&scene.rest);
            l.push(TrajectorySample { time, phase: Phase::Settle, leading: p, target: p, target_arc: 0.0, max_force_ratio: 0.0, max_sphere: 0 });
        }
    }
    let n_interp = steps(task.interpolation_duration, dt);
    let mut prev = resting;
    for k in 1..=n_interp {
        let t = k as f64 / n_interp as f64;
        let q: Vec<f64> = scene.rest.iter().zip(&scene.initial).map(|(a, b)| a + (b - a) * t).collect();
        let now = chain.capsules(&chain.forward_kinematics(&q));
        let motions: Vec<ColliderMotion> = prev.iter().zip(&now).map(|(a, b)| ColliderMotion { from: *a, to: *b }).collect();
        if let Err(e) = step_cloth(&mut cloth, params, &motions) {
            return Ok(diverged(task, seed, 0.0, format!("interpolation: {e}"), log));
        }
        prev = now;
        time += dt;
        if let Some(l) = log.as_mut() {
            let p = leading_of(&q);
            l.push(TrajectorySample { time, phase: Phase::Interpolate, leading: p, target: p, target_arc: 0.0, max_force_ratio: 0.0, max_sphere: 0 });
        }
    }

    let mut state = ControlState::new(chain, scene.initial.clone(), task.control.tear_grace);
    let mut arc = 0.0_f64;
    let mut max_ratio = 0.0_f64;
    let control_steps = steps(task.time_limit, dt);
    for k in 0..=control_steps {
        let elapsed = k as f64 * dt;
        let spline = match spline_from_centroids(&loops, &cloth.positions) {
            Ok(s) => s,
            Err(e) => return Ok(diverged(task, seed, max_ratio, format!("guiding spline: {e}"), log)),
        };
        let leading = leading_of(&state.q);
        let end = spline.point_at_arc_length(spline.length());
        if leading.distance(end) < task.control.epsilon {
            return Ok(TrialRecord {
                seed,
                friction: params.friction,
                outcome: Outcome::Success,
                time_to_completion: Some(elapsed),
                max_force_ratio: max_ratio,
                diagnostic: None,
                trajectory: log,
            });
        }
        if k == control_steps {
            break;
        }
        arc = advance_target(&spline, leading, task.target_lead, arc);
        let target = spline.point_at_arc_length(arc);
        let flags = match control_step(chain, layout, controller.controller(), Some((&mut cloth, params)), dt, &mut state, target, &task.control) {
            Ok(f) => f,
            Err(TaskError::Cloth(e)) => return Ok(diverged(task, seed, max_ratio, format!("control: {e}"), log)),
            Err(e) => return Err(e),
        };
        max_ratio = max_ratio.max(flags.max_ratio);
        if let Some(l) = log.as_mut() {
            let max_sphere = flags.ratios.iter().enumerate().fold((0, -1.0), |b, (k, r)| if r.norm() > b.1 { (k, r.norm()) } else { b }).0;
            l.push(TrajectorySample { time: time + elapsed + dt, phase: Phase::Control, leading, target, target_arc: arc, max_force_ratio: flags.max_ratio, max_sphere });
        }
        if !max_ratio.is_finite() || state.q.iter().any(|v| !v.is_finite()) {
            return Ok(diverged(task, seed, max_ratio, "non-finite state".into(), log));
        }
        if flags.torn {
            return Ok(TrialRecord {
                seed,
                friction: params.friction,
                outcome: Outcome::Torn,
                time_to_completion: None,
                max_force_ratio: max_ratio,
                diagnostic: None,
                trajectory: log,
            });
        }
    }
    Ok(TrialRecord {
        seed,
        friction: params.friction,
        outcome: Outcome::Timeout,
        time_to_completion: None,
        max_force_ratio: max_ratio,
        diagnostic: None,
        trajectory: log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn target_is_monotone_and_clamped() {
        let s = Spline::new(vec![Vec3::ZERO, Vec3::new(0.0, 0.0, 1.0)]).unwrap();
        let a = advance_target(&s, Vec3::new(0.0, 0.0, 0.5), 0.15, 0.0);
        assert!((a - 0.65).abs() < 1e-9);
        // Falling back along the path does not pull the target back.
        assert_eq!(advance_target(&s, Vec3::ZERO, 0.15, a), a);
        assert!((advance_target(&s, Vec3::new(0.0, 0.0, 0.95), 0.15, a) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn baseline_speed_must_be_positive() {
        assert!(make_baseline1(0.0).is_err());
        assert!(make_baseline1(f64::NAN).is_err());
        assert_eq!(make_baseline1(0.25).unwrap().name(), "baseline1");
    }

    #[test]
    fn baseline_tube_trial_is_deterministic_and_tracks_target() {
        let mut task = TaskSpec::tube();
        task.settle_duration = 0.2;
        task.interpolation_duration = 0.1;
        let ctl = make_baseline1(0.25).unwrap();
        let a = run_trial(&task, &ctl, 11, true).unwrap();
        let b = run_trial(&task, &ctl, 11, true).unwrap();
        assert_eq!(a, b);
        let traj = a.trajectory.as_ref().unwrap();
        let arcs: Vec<f64> = traj.iter().filter(|s| s.phase == Phase::Control).map(|s| s.target_arc).collect();
        assert!(arcs.windows(2).all(|w| w[1] >= w[0]));
        if let Some(tc) = a.time_to_completion {
            assert_eq!(a.outcome, Outcome::Success);
            assert!(tc <= task.time_limit);
        }
    }
}
