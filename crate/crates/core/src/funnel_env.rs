//! Analytic training environment: a kinematic haptic-sensing sphere that must
//! reach the throat of a randomly oriented rigid funnel.
//!
//! Observation is `[target - position, (d / r) n]` where `d` is the sphere's
//! penetration into the shell and `n` the penetration direction. Episodes end
//! on reaching the target, on penetrating deeper than half the radius, or at
//! the step limit.

use rand::Rng;

use crate::config::Config;
use crate::error::{ConfigError, EnvError};
use crate::geom::{FunnelSurface, Rotation, Vec3};
use crate::seed;

pub const OBS_DIM: usize = 6;
pub const ACT_DIM: usize = 3;

/// Bonus for reaching the target.
pub const REACH_BONUS: f64 = 5.0;
/// Penalty for penetrating deeper than half the sphere radius.
pub const PENETRATION_PENALTY: f64 = -10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CurriculumStage {
    Shallow,
    Wide,
}

impl std::str::FromStr for CurriculumStage {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "shallow" => Ok(Self::Shallow),
            "wide" => Ok(Self::Wide),
            other => Err(format!("unknown curriculum stage `{other}`")),
        }
    }
}

impl std::fmt::Display for CurriculumStage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Shallow => "shallow",
            Self::Wide => "wide",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvConfig {
    pub sphere_radius: f64,
    pub dt: f64,
    pub epsilon: f64,
    pub max_steps: usize,
    pub init_box_half_extent: f64,
    pub action_speed_limit: f64,
    pub stage: CurriculumStage,
    /// Mouth radius as a multiple of the sphere radius.
    pub mouth_ratio: f64,
    /// Throat radius as a multiple of the sphere radius.
    pub throat_ratio: f64,
    pub shallow_height: f64,
    pub wide_height: f64,
    /// Coefficient `c` of the optional `-c |f|^2` reward term (0 for the standard reward).
    pub force_penalty: f64,
    pub max_reset_attempts: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            sphere_radius: 0.2,
            dt: 0.02,
            epsilon: 0.05,
            max_steps: 1000,
            init_box_half_extent: 0.5,
            action_speed_limit: 2.0,
            stage: CurriculumStage::Shallow,
            mouth_ratio: 2.0,
            throat_ratio: 1.1,
            shallow_height: 0.2,
            wide_height: 0.5,
            force_penalty: 0.0,
            max_reset_attempts: 1000,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |m: &str| Err(EnvError::InvalidConfig(m.to_string()));
        if !(self.sphere_radius > 0.0) {
            return bad("sphere_radius must be > 0");
        }
        if !(self.dt > 0.0) {
            return bad("dt must be > 0");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be > 0");
        }
        if self.max_steps == 0 {
            return bad("max_steps must be > 0");
        }
        if !(self.action_speed_limit > 0.0) {
            return bad("action_speed_limit must be > 0");
        }
        if !(self.mouth_ratio > self.throat_ratio && self.throat_ratio > 0.0) {
            return bad("need mouth_ratio > throat_ratio > 0");
        }
        if !(self.shallow_height > 0.0 && self.wide_height > 0.0) {
            return bad("funnel heights must be > 0");
        }
        if !(self.init_box_half_extent > 0.0) {
            return bad("init_box_half_extent must be > 0");
        }
        Ok(())
    }

    pub fn with_stage(&self, stage: CurriculumStage) -> Self {
        Self { stage, ..self.clone() }
    }

    /// Funnel for the current stage, throat at the origin, axis along `axis`.
    pub fn funnel(&self, axis: Vec3) -> FunnelSurface {
        let height = match self.stage {
            CurriculumStage::Shallow => self.shallow_height,
            CurriculumStage::Wide => self.wide_height,
        };
        FunnelSurface {
            throat_center: Vec3::ZERO,
            axis,
            mouth_radius: self.mouth_ratio * self.sphere_radius,
            throat_radius: self.throat_ratio * self.sphere_radius,
            height,
        }
    }

    /// Reads `env.*` keys, falling back to `self` for missing ones.
    pub fn from_config(cfg: &Config, base: &EnvConfig) -> Result<Self, ConfigError> {
        Ok(Self {
            sphere_radius: cfg.get_or("env.sphere_radius", base.sphere_radius)?,
            dt: cfg.get_or("env.dt", base.dt)?,
            epsilon: cfg.get_or("env.epsilon", base.epsilon)?,
            max_steps: cfg.get_or("env.max_steps", base.max_steps)?,
            init_box_half_extent: cfg.get_or("env.init_box_half_extent", base.init_box_half_extent)?,
            action_speed_limit: cfg.get_or("env.action_speed_limit", base.action_speed_limit)?,
            stage: cfg.get_or("env.curriculum_stage", base.stage)?,
            mouth_ratio: cfg.get_or("env.mouth_ratio", base.mouth_ratio)?,
            throat_ratio: cfg.get_or("env.throat_ratio", base.throat_ratio)?,
            shallow_height: cfg.get_or("env.shallow_height", base.shallow_height)?,
            wide_height: cfg.get_or("env.wide_height", base.wide_height)?,
            force_penalty: cfg.get_or("env.force_penalty", base.force_penalty)?,
            max_reset_attempts: cfg.get_or("env.max_reset_attempts", base.max_reset_attempts)?,
        })
    }

    pub fn write_config(&self, cfg: &mut Config) {
        cfg.set("env.sphere_radius", self.sphere_radius);
        cfg.set("env.dt", self.dt);
        cfg.set("env.epsilon", self.epsilon);
        cfg.set("env.max_steps", self.max_steps);
        cfg.set("env.init_box_half_extent", self.init_box_half_extent);
        cfg.set("env.action_speed_limit", self.action_speed_limit);
        cfg.set("env.curriculum_stage", self.stage);
        cfg.set("env.mouth_ratio", self.mouth_ratio);
        cfg.set("env.throat_ratio", self.throat_ratio);
        cfg.set("env.shallow_height", self.shallow_height);
        cfg.set("env.wide_height", self.wide_height);
        cfg.set("env.force_penalty", self.force_penalty);
        cfg.set("env.max_reset_attempts", self.max_reset_attempts);
    }
}

/// `[target - position, normalized contact force]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    pub rel_pos: Vec3,
    pub force: Vec3,
}

impl Observation {
    pub fn to_array(&self) -> [f64; OBS_DIM] {
        [self.rel_pos.x, self.rel_pos.y, self.rel_pos.z, self.force.x, self.force.y, self.force.z]
    }

    pub fn from_array(a: [f64; OBS_DIM]) -> Self {
        Self { rel_pos: Vec3::new(a[0], a[1], a[2]), force: Vec3::new(a[3], a[4], a[5]) }
    }

    pub fn is_finite(&self) -> bool {
        self.rel_pos.is_finite() && self.force.is_finite()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Terminal {
    Alive,
    ReachedTarget,
    DeepPenetration,
    MaxSteps,
}

impl Terminal {
    pub fn is_done(self) -> bool {
        self != Terminal::Alive
    }

    /// True for terminations that end the MDP (no bootstrapping past them).
    pub fn is_absorbing(self) -> bool {
        matches!(self, Terminal::ReachedTarget | Terminal::DeepPenetration)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvState {
    pub sphere_pos: Vec3,
    pub target: Vec3,
    pub funnel: FunnelSurface,
    pub step_count: usize,
    pub status: Terminal,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepResult {
    pub obs: Observation,
    pub reward: f64,
    pub terminal: Terminal,
    /// Penetration depth after the step.
    pub depth: f64,
}

#[derive(Clone, Debug)]
pub struct FunnelEnv {
    config: EnvConfig,
}

impl FunnelEnv {
    pub fn new(config: EnvConfig) -> Result<Self, EnvError> {
        config.validate()?;
        Ok(Self { config })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    /// Samples a funnel orientation uniformly over rotations and a start position uniformly in
    /// the box around the origin, resampling starts that are already deeply penetrating.
    pub fn reset(&self, rng_seed: u64) -> Result<(EnvState, Observation), EnvError> {
        let mut rng = seed::rng(rng_seed);
        let axis = Rotation::random(&mut rng).rotate(Vec3::Z);
        let funnel = self.config.funnel(axis);
        let h = self.config.init_box_half_extent;
        let r = self.config.sphere_radius;
        for _ in 0..self.config.max_reset_attempts {
            let p = Vec3::new(rng.gen_range(-h..h), rng.gen_range(-h..h), rng.gen_range(-h..h));
            let pen = funnel.sphere_penetration(p, r);
            if pen.depth > 0.5 * r {
                continue;
            }
            let state = EnvState {
                sphere_pos: p,
                target: funnel.throat_center,
                funnel,
                step_count: 0,
                status: Terminal::Alive,
            };
            let obs = Observation { rel_pos: state.target - p, force: pen.normal * (pen.depth / r) };
            return Ok((state, obs));
        }
        Err(EnvError::ResetFailed(self.config.max_reset_attempts))
    }

    /// Integrates `x += dt * v` with `|v|` clipped to the speed limit and scores the new state.
    pub fn step(&self, state: &mut EnvState, action: Vec3) -> Result<StepResult, EnvError> {
        if state.status.is_done() {
            return Err(EnvError::EpisodeOver(state.status));
        }
        if !action.is_finite() {
            return Err(EnvError::NonFiniteAction);
        }
        let cfg = &self.config;
        let v = action.clamp_norm(cfg.action_speed_limit);
        let next = state.sphere_pos + v * cfg.dt;
        let pen = state.funnel.sphere_penetration(next, cfg.sphere_radius);
        let force = pen.normal * (pen.depth / cfg.sphere_radius);
        let dist = next.distance(state.target);

        let reached = dist < cfg.epsilon;
        let too_deep = pen.depth > 0.5 * cfg.sphere_radius;
        state.step_count += 1;
        let (bonus, terminal) = if reached {
            (REACH_BONUS, Terminal::ReachedTarget)
        } else if too_deep {
            (PENETRATION_PENALTY, Terminal::DeepPenetration)
        } else if state.step_count >= cfg.max_steps {
            (0.0, Terminal::MaxSteps)
        } else {
            (0.0, Terminal::Alive)
        };
        let mut reward = -dist + bonus;
        if cfg.force_penalty != 0.0 {
            reward -= cfg.force_penalty * force.norm_squared();
        }
        state.sphere_pos = next;
        state.status = terminal;
        Ok(StepResult { obs: Observation { rel_pos: state.target - next, force }, reward, terminal, depth: pen.depth })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axis_env() -> (FunnelEnv, EnvState) {
        let env = FunnelEnv::new(EnvConfig::default()).unwrap();
        let funnel = env.config().funnel(Vec3::Z);
        let state = EnvState {
            sphere_pos: Vec3::ZERO,
            target: Vec3::ZERO,
            funnel,
            step_count: 0,
            status: Terminal::Alive,
        };
        (env, state)
    }

    #[test]
    fn zero_action_at_target_reaches() {
        let (env, mut s) = axis_env();
        let r = env.step(&mut s, Vec3::ZERO).unwrap();
        assert_eq!(r.reward, 5.0);
        assert_eq!(r.terminal, Terminal::ReachedTarget);
        assert!(matches!(env.step(&mut s, Vec3::ZERO), Err(EnvError::EpisodeOver(Terminal::ReachedTarget))));
    }

    #[test]
    fn distance_reward_without_contact() {
        let (env, mut s) = axis_env();
        // 0.7 m behind the throat along the axis: no contact with the shell.
        s.sphere_pos = Vec3::new(0.0, 0.0, -0.7);
        let r = env.step(&mut s, Vec3::ZERO).unwrap();
        assert_eq!(r.depth, 0.0);
        assert_eq!(r.reward, -0.7);
        assert_eq!(r.terminal, Terminal::Alive);
    }

    #[test]
    fn deep_penetration_terminates() {
        let (env, mut s) = axis_env();
        let f = s.funnel;
        // Put the center 0.09 m from the shell (d = 0.11 > 0.1), outside the cone at mid-height.
        let a = 0.1;
        let wall = Vec3::new(f.radius_at(a), 0.0, a);
        let outward = Vec3::new(f.height, 0.0, -(f.mouth_radius - f.throat_radius)).normalize_or_zero();
        let center = wall + outward * 0.09;
        s.sphere_pos = center;
        let r = env.step(&mut s, Vec3::ZERO).unwrap();
        assert!((r.depth - 0.11).abs() < 1e-12);
        assert_eq!(r.terminal, Terminal::DeepPenetration);
        let dist = center.norm();
        assert!((r.reward - (-dist - 10.0)).abs() < 1e-12);
    }

    #[test]
    fn reach_wins_over_penetration() {
        let cfg = EnvConfig { epsilon: 0.3, ..EnvConfig::default() };
        let env = FunnelEnv::new(cfg).unwrap();
        let funnel = env.config().funnel(Vec3::Z);
        let mut s = EnvState {
            sphere_pos: Vec3::new(0.2, 0.0, 0.0),
            target: Vec3::ZERO,
            funnel,
            step_count: 0,
            status: Terminal::Alive,
        };
        let r = env.step(&mut s, Vec3::ZERO).unwrap();
        assert!(r.depth > 0.1);
        assert_eq!(r.terminal, Terminal::ReachedTarget);
    }

    #[test]
    fn max_steps_terminal() {
        let cfg = EnvConfig { max_steps: 3, ..EnvConfig::default() };
        let env = FunnelEnv::new(cfg).unwrap();
        let funnel = env.config().funnel(Vec3::Z);
        let mut s =
            EnvState { sphere_pos: Vec3::new(0.0, 0.0, -0.7), target: Vec3::ZERO, funnel, step_count: 0, status: Terminal::Alive };
        let t: Vec<Terminal> = (0..3).map(|_| env.step(&mut s, Vec3::ZERO).unwrap().terminal).collect();
        assert_eq!(t, vec![Terminal::Alive, Terminal::Alive, Terminal::MaxSteps]);
    }

    #[test]
    fn action_is_clipped() {
        let (env, mut s) = axis_env();
        s.sphere_pos = Vec3::new(0.0, 0.0, -0.7);
        env.step(&mut s, Vec3::new(0.0, 0.0, -100.0)).unwrap();
        assert!((s.sphere_pos.z + 0.7 + 2.0 * 0.02).abs() < 1e-12);
    }

    #[test]
    fn reset_is_deterministic_and_valid() {
        let env = FunnelEnv::new(EnvConfig::default()).unwrap();
        let (a, oa) = env.reset(42).unwrap();
        let (b, ob) = env.reset(42).unwrap();
        assert_eq!(a, b);
        assert_eq!(oa, ob);
        assert_eq!(oa.rel_pos + a.sphere_pos, a.target);
        assert!(a.sphere_pos.max_abs() <= 0.5);
        assert!((a.funnel.axis.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn invalid_config_rejected() {
        assert!(FunnelEnv::new(EnvConfig { dt: 0.0, ..EnvConfig::default() }).is_err());
        assert!(FunnelEnv::new(EnvConfig { sphere_radius: -1.0, ..EnvConfig::default() }).is_err());
        assert!(FunnelEnv::new(EnvConfig { max_steps: 0, ..EnvConfig::default() }).is_err());
    }
}
