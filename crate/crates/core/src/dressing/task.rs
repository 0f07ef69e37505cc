use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::cloth::{calibrate_fmax, generate_sleeve_garment, generate_tube, probe_patch, ClothMaterial, ClothMesh, ClothParams, FmaxCalibration, ProbeProtocol, SleeveSpec};
use crate::config::Config;
use crate::error::{ConfigError, TaskError};
use crate::geom::{Rotation, Vec3};
use crate::manipulator::{parse_manipulator, read_manipulator, ControlConfig, Manipulator};

const ARM: &str = include_str!("../../data/arm.manip");
const LEG: &str = include_str!("../../data/leg.manip");
const SPHERE: &str = include_str!("../../data/sphere.manip");

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TaskKind {
    /// A single sphere crosses a tube pinned at both rings.
    Tube,
    /// An arm enters a garment whose body is held as if worn and exits through its sleeve.
    Sleeve,
}

impl TaskKind {
    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Tube => "tube",
            TaskKind::Sleeve => "sleeve",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TubeGeometry {
    pub length: f64,
    pub radius: f64,
    pub rows: usize,
    pub cols: usize,
}

/// Everything needed to run trials of one dressing task.
#[derive(Clone, Debug)]
pub struct TaskSpec {
    pub name: String,
    pub kind: TaskKind,
    pub tube: TubeGeometry,
    pub sleeve: SleeveSpec,
    /// Axial compression of the garment before pinning, as a fraction of its length,
    /// so it sags into the manipulator's path.
    pub slack: f64,
    /// Total garment mass, spread evenly over the vertices.
    pub garment_mass: f64,
    pub stretch_stiffness: f64,
    pub bend_stiffness: f64,
    pub cloth: ClothParams,
    /// `arm`, `leg`, `sphere`, or a path to a description file.
    pub manipulator: String,
    pub guiding_loops: Vec<String>,
    /// Loops held fixed in space.
    pub pinned_loops: Vec<String>,
    /// Joint angles of the rest pose, root translation excluded; empty means all zero.
    pub rest_pose: Vec<f64>,
    /// Distance of the manipulator root in front of the first loop, metres.
    pub approach: f64,
    /// Uniform half-ranges of the initial-pose perturbation: root translation (m) and joints (rad).
    pub root_jitter: f64,
    pub joint_jitter: f64,
    /// Angle of the garment axis below horizontal for the sleeve task, radians.
    pub sleeve_tilt: f64,
    /// Rotation of the manipulator base about its local x axis, away from the garment axis, radians.
    pub arm_tilt: f64,
    pub settle_duration: f64,
    pub interpolation_duration: f64,
    pub time_limit: f64,
    /// Arc-length lead of the leading target along the guiding spline, metres.
    pub target_lead: f64,
    pub control: ControlConfig,
    pub seed: u64,
}

impl TaskSpec {
    pub fn tube() -> Self {
        Self {
            name: "tube".into(),
            kind: TaskKind::Tube,
            tube: TubeGeometry { length: 1.0, radius: 0.15, rows: 21, cols: 16 },
            sleeve: SleeveSpec {
                body_radius: 0.2,
                sleeve_radius: 0.09,
                body_length: 0.25,
                sleeve_length: 0.4,
                body_rows: 6,
                sleeve_rows: 9,
                cols: 16,
            },
            slack: 0.1,
            garment_mass: 0.2,
            stretch_stiffness: 0.9,
            bend_stiffness: 0.1,
            cloth: ClothParams::default(),
            manipulator: "sphere".into(),
            guiding_loops: vec!["entry".into(), "exit".into()],
            pinned_loops: vec!["entry".into(), "exit".into()],
            rest_pose: Vec::new(),
            approach: 0.0,
            root_jitter: 0.0,
            joint_jitter: 0.0,
            sleeve_tilt: 0.0,
            arm_tilt: 0.0,
            settle_duration: 2.0,
            interpolation_duration: 2.0,
            time_limit: 10.0,
            target_lead: 0.15,
            control: ControlConfig { speed_limit: 0.3, ..ControlConfig::default() },
            seed: 0,
        }
    }

    pub fn sleeve() -> Self {
        Self {
            name: "sleeve".into(),
            kind: TaskKind::Sleeve,
            sleeve: SleeveSpec {
                body_radius: 0.15,
                sleeve_radius: 0.07,
                body_length: 0.25,
                sleeve_length: 0.4,
                body_rows: 5,
                sleeve_rows: 9,
                cols: 24,
            },
            slack: 0.0,
            manipulator: "arm".into(),
            guiding_loops: vec!["entry".into(), "junction".into(), "cuff".into()],
            // The body part is held as if worn; the sleeve hangs free.
            pinned_loops: vec!["entry".into(), "junction".into()],
            // Elbow bent so the hand starts just inside the collar.
            rest_pose: vec![0.8, 0.0, 0.0, -1.6, 0.0],
            approach: 0.3,
            root_jitter: 0.03,
            joint_jitter: 17f64.to_radians(),
            ..Self::tube()
        }
    }

    pub fn validate(&self) -> Result<(), TaskError> {
        let bad = |m: String| Err(TaskError::Invalid(m));
        if !(self.settle_duration > 0.0 && self.interpolation_duration > 0.0 && self.time_limit > 0.0) {
            return bad("durations must be positive".into());
        }
        if !(self.garment_mass > 0.0) {
            return bad("garment mass must be positive".into());
        }
        if !(self.target_lead > 0.0 && self.control.epsilon > 0.0) {
            return bad("target lead and epsilon must be positive".into());
        }
        if self.guiding_loops.len() < 2 {
            return bad("need at least two guiding loops".into());
        }
        if !(0.0..1.0).contains(&self.slack) {
            return bad(format!("slack {} outside [0, 1)", self.slack));
        }
        if !(self.root_jitter >= 0.0 && self.joint_jitter >= 0.0) {
            return bad("pose jitter must be non-negative".into());
        }
        self.cloth.validate()?;
        Ok(())
    }

    pub fn load_manipulator(&self) -> Result<Manipulator, TaskError> {
        let m = match self.manipulator.as_str() {
            "arm" => parse_manipulator(ARM)?,
            "leg" => parse_manipulator(LEG)?,
            "sphere" => parse_manipulator(SPHERE)?,
            path => read_manipulator(Path::new(path))?,
        };
        Ok(m)
    }

    /// Mass of one garment vertex.
    pub fn vertex_mass(&self) -> f64 {
        let n = match self.kind {
            TaskKind::Tube => self.tube.rows * self.tube.cols,
            TaskKind::Sleeve => (self.sleeve.body_rows + self.sleeve.sleeve_rows - 1) * self.sleeve.cols,
        };
        self.garment_mass / n as f64
    }

    pub fn material(&self) -> ClothMaterial {
        ClothMaterial { vertex_mass: self.vertex_mass(), stretch_stiffness: self.stretch_stiffness, bend_stiffness: self.bend_stiffness }
    }

    /// Fmax for this garment's material: the probe patch uses the garment's vertex mass
    /// and stiffnesses and the task's cloth parameters.
    pub fn calibrate_fmax(&self, protocol: &ProbeProtocol) -> Result<FmaxCalibration, TaskError> {
        let patch = probe_patch(protocol, &self.material())?;
        Ok(calibrate_fmax(&patch, &self.cloth, protocol)?)
    }

    /// Garment at rest in task coordinates, before any per-trial randomization.
    pub fn build_garment(&self) -> Result<ClothMesh, TaskError> {
        let mat = self.material();
        let mesh = match self.kind {
            TaskKind::Tube => {
                let t = self.tube;
                generate_tube(t.length, t.radius, t.rows, t.cols, false, &mat)?
            }
            TaskKind::Sleeve => generate_sleeve_garment(&self.sleeve, None, &mat)?,
        };
        let mut mesh = mesh;
        for p in mesh.positions.iter_mut() {
            p.z *= 1.0 - self.slack;
        }
        mesh.prev_positions = mesh.positions.clone();
        for name in self.guiding_loops.iter().chain(&self.pinned_loops) {
            if !mesh.loops.contains_key(name) {
                return Err(TaskError::Invalid(format!("garment has no loop named {name}")));
            }
        }
        for name in &self.pinned_loops {
            mesh.pin_loop(name)?;
        }
        Ok(mesh)
    }

    /// Per-trial scene: oriented garment, manipulator placement, and the rest and
    /// initial configurations.
    pub fn sample_scene(&self, rng: &mut ChaCha8Rng) -> Result<Scene, TaskError> {
        let mut garment = self.build_garment()?;
        let mut manip = self.load_manipulator()?;
        let n = manip.chain.num_dofs();
        let rot = match self.kind {
            // Uniformly random tube axis.
            TaskKind::Tube => Rotation::between(Vec3::Z, Rotation::random(rng).rotate(Vec3::Z)),
            // Garment axis horizontal along +x, tilted down by `sleeve_tilt`.
            TaskKind::Sleeve => Rotation::from_axis_angle(Vec3::Y, std::f64::consts::FRAC_PI_2 + self.sleeve_tilt),
        };
        garment.transform(|v| rot.rotate(v), Vec3::ZERO);
        let first = garment.loop_centroid(&self.guiding_loops[0]).expect("validated loop");
        let axis = rot.rotate(Vec3::Z);
        let mut rest = vec![0.0; n];
        if !self.rest_pose.is_empty() {
            if self.rest_pose.len() != n - 3 {
                return Err(TaskError::Invalid(format!("rest pose has {} joint values, manipulator has {}", self.rest_pose.len(), n - 3)));
            }
            rest[3..].copy_from_slice(&self.rest_pose);
        }
        match self.kind {
            TaskKind::Tube => {
                manip.chain.base_position = Vec3::ZERO;
                manip.chain.base_rotation = Rotation::IDENTITY;
            }
            TaskKind::Sleeve => {
                // Manipulators are described pointing along local +z.
                manip.chain.base_rotation = rot * Rotation::from_axis_angle(Vec3::X, self.arm_tilt);
                manip.chain.base_position = first - axis * self.approach;
            }
        }
        if self.kind == TaskKind::Tube {
            let start = first - axis * self.approach;
            rest[..3].copy_from_slice(&start.to_array());
        }
        let mut initial = rest.clone();
        for (k, v) in initial.iter_mut().enumerate() {
            let r = if k < 3 { self.root_jitter } else { self.joint_jitter };
            if r > 0.0 {
                *v += rng.gen_range(-r..=r);
            }
        }
        manip.chain.clamp(&mut initial);
        Ok(Scene { garment, manipulator: manip, rest, initial, axis })
    }

    /// Reads `task.*`, `cloth.*` and `control.*` keys over `base`.
    pub fn from_config(cfg: &Config, base: &TaskSpec) -> Result<Self, ConfigError> {
        let kind = match cfg.get_or("task.kind", base.kind.name().to_string())?.as_str() {
            "tube" => TaskKind::Tube,
            "sleeve" => TaskKind::Sleeve,
            other => return Err(ConfigError::Value { key: "task.kind".into(), detail: format!("unknown task kind {other}") }),
        };
        let base = if kind == base.kind {
            base.clone()
        } else if kind == TaskKind::Tube {
            TaskSpec::tube()
        } else {
            TaskSpec::sleeve()
        };
        let b = &base;
        let t = b.tube;
        let s = b.sleeve;
        let ctl = b.control;
        Ok(Self {
            name: cfg.get_or("task.name", b.name.clone())?,
            kind,
            tube: TubeGeometry {
                length: cfg.get_or("task.tube.length", t.length)?,
                radius: cfg.get_or("task.tube.radius", t.radius)?,
                rows: cfg.get_or("task.tube.rows", t.rows)?,
                cols: cfg.get_or("task.tube.cols", t.cols)?,
            },
            sleeve: SleeveSpec {
                body_radius: cfg.get_or("task.sleeve.body_radius", s.body_radius)?,
                sleeve_radius: cfg.get_or("task.sleeve.sleeve_radius", s.sleeve_radius)?,
                body_length: cfg.get_or("task.sleeve.body_length", s.body_length)?,
                sleeve_length: cfg.get_or("task.sleeve.sleeve_length", s.sleeve_length)?,
                body_rows: cfg.get_or("task.sleeve.body_rows", s.body_rows)?,
                sleeve_rows: cfg.get_or("task.sleeve.sleeve_rows", s.sleeve_rows)?,
                cols: cfg.get_or("task.sleeve.cols", s.cols)?,
            },
            slack: cfg.get_or("task.slack", b.slack)?,
            garment_mass: cfg.get_or("task.garment_mass", b.garment_mass)?,
            stretch_stiffness: cfg.get_or("task.stretch_stiffness", b.stretch_stiffness)?,
            bend_stiffness: cfg.get_or("task.bend_stiffness", b.bend_stiffness)?,
            cloth: ClothParams::from_config(cfg, &b.cloth)?,
            manipulator: cfg.get_or("task.manipulator", b.manipulator.clone())?,
            guiding_loops: cfg.get_list("task.guiding_loops").unwrap_or_else(|| b.guiding_loops.clone()),
            pinned_loops: cfg.get_list("task.pinned_loops").unwrap_or_else(|| b.pinned_loops.clone()),
            rest_pose: match cfg.get_list("task.rest_pose") {
                Some(v) => v
                    .iter()
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<f64>().map_err(|e| ConfigError::Value { key: "task.rest_pose".into(), detail: e.to_string() }))
                    .collect::<Result<_, _>>()?,
                None => b.rest_pose.clone(),
            },
            approach: cfg.get_or("task.approach", b.approach)?,
            root_jitter: cfg.get_or("task.root_jitter", b.root_jitter)?,
            joint_jitter: cfg.get_or("task.joint_jitter", b.joint_jitter)?,
            sleeve_tilt: cfg.get_or("task.sleeve_tilt", b.sleeve_tilt)?,
            arm_tilt: cfg.get_or("task.arm_tilt", b.arm_tilt)?,
            settle_duration: cfg.get_or("task.settle_duration", b.settle_duration)?,
            interpolation_duration: cfg.get_or("task.interpolation_duration", b.interpolation_duration)?,
            time_limit: cfg.get_or("task.time_limit", b.time_limit)?,
            target_lead: cfg.get_or("task.target_lead", b.target_lead)?,
            control: ControlConfig {
                speed_limit: cfg.get_or("control.speed_limit", ctl.speed_limit)?,
                epsilon: cfg.get_or("control.epsilon", ctl.epsilon)?,
                tear_grace: cfg.get_or("control.tear_grace", ctl.tear_grace)?,
                ik: crate::manipulator::IkConfig {
                    iterations: cfg.get_or("control.ik_iterations", ctl.ik.iterations)?,
                    initial_step: cfg.get_or("control.ik_initial_step", ctl.ik.initial_step)?,
                    shrink: cfg.get_or("control.ik_shrink", ctl.ik.shrink)?,
                    max_backtracks: cfg.get_or("control.ik_max_backtracks", ctl.ik.max_backtracks)?,
                    max_delta: cfg.get_or("control.ik_max_delta", ctl.ik.max_delta)?,
                },
            },
            seed: cfg.get_or("seed", b.seed)?,
        })
    }

    pub fn write_config(&self, cfg: &mut Config) {
        cfg.set("task.name", &self.name);
        cfg.set("task.kind", self.kind.name());
        let t = self.tube;
        cfg.set("task.tube.length", t.length);
        cfg.set("task.tube.radius", t.radius);
        cfg.set("task.tube.rows", t.rows);
        cfg.set("task.tube.cols", t.cols);
        let s = self.sleeve;
        cfg.set("task.sleeve.body_radius", s.body_radius);
        cfg.set("task.sleeve.sleeve_radius", s.sleeve_radius);
        cfg.set("task.sleeve.body_length", s.body_length);
        cfg.set("task.sleeve.sleeve_length", s.sleeve_length);
        cfg.set("task.sleeve.body_rows", s.body_rows);
        cfg.set("task.sleeve.sleeve_rows", s.sleeve_rows);
        cfg.set("task.sleeve.cols", s.cols);
        cfg.set("task.slack", self.slack);
        cfg.set("task.garment_mass", self.garment_mass);
        cfg.set("task.stretch_stiffness", self.stretch_stiffness);
        cfg.set("task.bend_stiffness", self.bend_stiffness);
        self.cloth.write_config(cfg);
        cfg.set("task.manipulator", &self.manipulator);
        cfg.set("task.guiding_loops", self.guiding_loops.join(","));
        cfg.set("task.pinned_loops", self.pinned_loops.join(","));
        let rest: Vec<String> = self.rest_pose.iter().map(|v| v.to_string()).collect();
        cfg.set("task.rest_pose", rest.join(","));
        cfg.set("task.approach", self.approach);
        cfg.set("task.root_jitter", self.root_jitter);
        cfg.set("task.joint_jitter", self.joint_jitter);
        cfg.set("task.sleeve_tilt", self.sleeve_tilt);
        cfg.set("task.arm_tilt", self.arm_tilt);
        cfg.set("task.settle_duration", self.settle_duration);
        cfg.set("task.interpolation_duration", self.interpolation_duration);
        cfg.set("task.time_limit", self.time_limit);
        cfg.set("task.target_lead", self.target_lead);
        let c = self.control;
        cfg.set("control.speed_limit", c.speed_limit);
        cfg.set("control.epsilon", c.epsilon);
        cfg.set("control.tear_grace", c.tear_grace);
        cfg.set("control.ik_iterations", c.ik.iterations);
        cfg.set("control.ik_initial_step", c.ik.initial_step);
        cfg.set("control.ik_shrink", c.ik.shrink);
        cfg.set("control.ik_max_backtracks", c.ik.max_backtracks);
        cfg.set("control.ik_max_delta", c.ik.max_delta);
        cfg.set("seed", self.seed);
    }

    pub fn load(path: &Path) -> Result<Self, TaskError> {
        let cfg = Config::load(path)?;
        let kind = cfg.raw("task.kind").unwrap_or("tube").to_string();
        let base = if kind == "sleeve" { TaskSpec::sleeve() } else { TaskSpec::tube() };
        let spec = Self::from_config(&cfg, &base)?;
        cfg.reject_unused()?;
        spec.validate()?;
        Ok(spec)
    }

    /// Path-like manipulator names are resolved relative to `dir`.
    pub fn resolve_paths(&mut self, dir: &Path) {
        if !matches!(self.manipulator.as_str(), "arm" | "leg" | "sphere") {
            let p = PathBuf::from(&self.manipulator);
            if p.is_relative() {
                self.manipulator = dir.join(p).to_string_lossy().into_owned();
            }
        }
    }
}

/// Garment and manipulator placed for one trial.
#[derive(Clone, Debug)]
pub struct Scene {
    pub garment: ClothMesh,
    pub manipulator: Manipulator,
    pub rest: Vec<f64>,
    pub initial: Vec<f64>,
    /// Garment axis in world coordinates.
    pub axis: Vec3,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn config_round_trip() {
        for spec in [TaskSpec::tube(), TaskSpec::sleeve()] {
            let mut cfg = Config::new();
            spec.write_config(&mut cfg);
            let text = cfg.to_text();
            let back = Config::parse(&text).unwrap();
            let other = if spec.kind == TaskKind::Tube { TaskSpec::sleeve() } else { TaskSpec::tube() };
            let s2 = TaskSpec::from_config(&back, &other).unwrap();
            assert!(back.unused_keys().is_empty());
            let mut cfg2 = Config::new();
            s2.write_config(&mut cfg2);
            assert_eq!(cfg2.to_text(), text);
        }
    }

    #[test]
    fn scenes_are_seeded() {
        for spec in [TaskSpec::tube(), TaskSpec::sleeve()] {
            let a = spec.sample_scene(&mut seed::rng(3)).unwrap();
            let b = spec.sample_scene(&mut seed::rng(3)).unwrap();
            let c = spec.sample_scene(&mut seed::rng(4)).unwrap();
            assert_eq!(a.garment.positions, b.garment.positions);
            assert_eq!(a.initial, b.initial);
            assert!(a.garment.positions != c.garment.positions || a.initial != c.initial);
            assert!(a.manipulator.chain.within_limits(&a.initial));
        }
    }

    #[test]
    fn tube_sphere_starts_at_entry() {
        let spec = TaskSpec::tube();
        let s = spec.sample_scene(&mut seed::rng(1)).unwrap();
        let entry = s.garment.loop_centroid("entry").unwrap();
        assert!(Vec3::new(s.initial[0], s.initial[1], s.initial[2]).distance(entry) < 1e-12);
        assert_eq!(s.garment.pinned().len(), 2 * spec.tube.cols);
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut s = TaskSpec::tube();
        s.time_limit = 0.0;
        assert!(s.validate().is_err());
        let mut s = TaskSpec::tube();
        s.guiding_loops = vec!["entry".into(), "cuff".into()];
        assert!(s.build_garment().is_err());
    }
}
