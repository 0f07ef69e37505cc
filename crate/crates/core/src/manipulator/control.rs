use super::chain::KinematicChain;
use super::ik::{ik_solve, IkConfig, IkResult};
use super::layout::{bin_forces, HapticSphereLayout, SphereCommand};
use crate::cloth::{step_cloth, ClothMesh, ClothParams, ColliderMotion};
use crate::error::{PolicyError, TaskError};
use crate::funnel_env::Observation;
use crate::geom::{Capsule, Vec3};
use crate::policy::PolicyParams;

/// How sphere velocities are proposed.
#[derive(Clone, Copy, Debug)]
pub enum Controller<'a> {
    /// Every sphere queries the policy mean on `[target - x, force ratio]`.
    Haptic(&'a PolicyParams),
    /// The leading sphere moves straight at the target with this speed; the rest hold still.
    Linear { speed: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlConfig {
    /// Velocity norm cap applied to policy actions, m/s.
    pub speed_limit: f64,
    /// Reach tolerance for the leading sphere, m.
    pub epsilon: f64,
    /// Consecutive over-limit control steps that count as a tear.
    pub tear_grace: usize,
    pub ik: IkConfig,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self { speed_limit: 2.0, epsilon: 0.05, tear_grace: 3, ik: IkConfig::default() }
    }
}

/// Policy observation for one sphere; the force ratio is capped at unit norm.
pub fn sphere_observation(position: Vec3, target: Vec3, ratio: Vec3) -> Observation {
    Observation { rel_pos: target - position, force: ratio.clamp_norm(1.0) }
}

/// Leading sphere targets `leading_target`, trailing spheres their own position.
pub fn query_sphere_policies(
    policy: &PolicyParams,
    layout: &HapticSphereLayout,
    positions: &[Vec3],
    ratios: &[Vec3],
    leading_target: Vec3,
    dt: f64,
    speed_limit: f64,
) -> Result<Vec<SphereCommand>, PolicyError> {
    layout
        .spheres
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let x = positions[k];
            let target = if s.leading { leading_target } else { x };
            let v = policy.mean_action(&sphere_observation(x, target, ratios[k]))?.clamp_norm(speed_limit);
            Ok(SphereCommand { sphere: k, current: x, desired: x + v * dt, weight: layout.weight(k) })
        })
        .collect()
}

/// Haptic-unaware commands: fixed-speed straight line for the leading sphere.
pub fn linear_commands(layout: &HapticSphereLayout, positions: &[Vec3], leading_target: Vec3, speed: f64, dt: f64) -> Vec<SphereCommand> {
    layout
        .spheres
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let x = positions[k];
            let desired = if s.leading { x + (leading_target - x).normalize_or_zero() * (speed * dt) } else { x };
            SphereCommand { sphere: k, current: x, desired, weight: layout.weight(k) }
        })
        .collect()
}

/// Counts consecutive control steps with any force ratio above one.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TearMonitor {
    pub grace: usize,
    pub run: usize,
    pub torn: bool,
}

impl TearMonitor {
    pub fn new(grace: usize) -> Self {
        Self { grace, run: 0, torn: false }
    }

    /// Feeds one step's largest ratio norm; returns whether the cloth counts as torn.
    pub fn observe(&mut self, max_ratio: f64) -> bool {
        if max_ratio > 1.0 {
            self.run += 1;
        } else {
            self.run = 0;
        }
        self.torn |= self.run >= self.grace;
        self.torn
    }
}

/// Manipulator configuration plus the collider poses of the previous control step.
#[derive(Clone, Debug)]
pub struct ControlState {
    pub q: Vec<f64>,
    pub prev_capsules: Vec<Capsule>,
    pub monitor: TearMonitor,
}

impl ControlState {
    pub fn new(chain: &KinematicChain, q: Vec<f64>, grace: usize) -> Self {
        let prev_capsules = chain.capsules(&chain.forward_kinematics(&q));
        Self { q, prev_capsules, monitor: TearMonitor::new(grace) }
    }

    /// Collider motions from the previous poses to the current configuration.
    pub fn collider_motions(&self, chain: &KinematicChain) -> Vec<ColliderMotion> {
        let now = chain.capsules(&chain.forward_kinematics(&self.q));
        self.prev_capsules.iter().zip(now).map(|(from, to)| ColliderMotion { from: *from, to }).collect()
    }
}

#[derive(Clone, Debug)]
pub struct StepFlags {
    pub ratios: Vec<Vec3>,
    pub max_ratio: f64,
    /// Some sphere's force ratio exceeded one this step.
    pub over_limit: bool,
    pub torn: bool,
    /// Leading sphere within epsilon of the leading target before the IK move.
    pub reached: bool,
    pub leading_position: Vec3,
    pub ik: IkResult,
}

/// One control cycle: cloth step against the latest collider motion, force binning,
/// sphere commands, IK, and the configuration update.
#[allow(clippy::too_many_arguments)]
pub fn control_step(
    chain: &KinematicChain,
    layout: &HapticSphereLayout,
    controller: Controller<'_>,
    cloth: Option<(&mut ClothMesh, &ClothParams)>,
    dt: f64,
    state: &mut ControlState,
    leading_target: Vec3,
    cfg: &ControlConfig,
) -> Result<StepFlags, TaskError> {
    let motions = state.collider_motions(chain);
    let pose = chain.forward_kinematics(&state.q);
    let centers = layout.centers(chain, &pose);
    let ratios = match cloth {
        Some((mesh, params)) => {
            let report = step_cloth(mesh, params, &motions)?;
            bin_forces(&report, &mesh.positions, &centers, params.fmax)
        }
        None => vec![Vec3::ZERO; layout.len()],
    };
    state.prev_capsules = motions.iter().map(|m| m.to).collect();
    let max_ratio = ratios.iter().map(|r| r.norm()).fold(0.0, f64::max);
    let torn = state.monitor.observe(max_ratio);
    let lead = centers[layout.leading_index()];
    let reached = lead.distance(leading_target) < cfg.epsilon;

    let commands = match controller {
        Controller::Haptic(policy) => query_sphere_policies(policy, layout, &centers, &ratios, leading_target, dt, cfg.speed_limit)?,
        Controller::Linear { speed } => linear_commands(layout, &centers, leading_target, speed, dt),
    };
    let ik = ik_solve(chain, layout, &state.q, &commands, &cfg.ik);
    if let Some(d) = &ik.diagnostic {
        log::warn!("{d}");
    }
    state.q = ik.q.clone();
    Ok(StepFlags { over_limit: max_ratio > 1.0, ratios, max_ratio, torn, reached, leading_position: lead, ik })
}
