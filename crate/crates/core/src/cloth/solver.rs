use super::mesh::{ClothMesh, DistanceConstraint};
use crate::config::Config;
use crate::error::{ClothError, ConfigError};
use crate::geom::{Capsule, Vec3};

/// Solver settings.
#[derive(Clone, Debug, PartialEq)]
pub struct ClothParams {
    pub gravity: Vec3,
    /// Control step; each is split into `substeps` solver steps.
    pub dt: f64,
    pub substeps: usize,
    pub iterations: usize,
    pub friction: f64,
    /// Summed contact force tolerated before tearing, in newtons.
    pub fmax: f64,
    pub vertex_mass: f64,
    /// Linear velocity damping rate (1/s).
    pub damping: f64,
    /// Contact distance kept between vertices and collider surfaces.
    pub thickness: f64,
}

impl Default for ClothParams {
    fn default() -> Self {
        Self {
            gravity: Vec3::new(0.0, 0.0, -9.81),
            dt: 0.02,
            substeps: 4,
            iterations: 10,
            friction: 0.2,
            fmax: 1.0,
            vertex_mass: 1e-3,
            damping: 0.2,
            thickness: 0.01,
        }
    }
}

impl ClothParams {
    pub fn validate(&self) -> Result<(), ClothError> {
        let bad = |m: String| Err(ClothError::InvalidParams(m));
        if !(self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if self.substeps == 0 {
            return bad("substeps must be at least 1".into());
        }
        if !(self.friction >= 0.0) {
            return bad(format!("friction must be non-negative, got {}", self.friction));
        }
        if !(self.fmax > 0.0) {
            return bad(format!("fmax must be positive, got {}", self.fmax));
        }
        if !(self.vertex_mass > 0.0) {
            return bad(format!("vertex mass must be positive, got {}", self.vertex_mass));
        }
        if !(self.damping >= 0.0 && self.thickness >= 0.0) || !self.gravity.is_finite() {
            return bad("damping and thickness must be non-negative, gravity finite".into());
        }
        Ok(())
    }

    pub fn substep(&self) -> f64 {
        self.dt / self.substeps as f64
    }

    /// Reads `cloth.*` keys over `base`.
    pub fn from_config(cfg: &Config, base: &ClothParams) -> Result<Self, ConfigError> {
        let g = match cfg.get_list("cloth.gravity") {
            Some(v) => parse_vec3("cloth.gravity", &v)?,
            None => base.gravity,
        };
        Ok(Self {
            gravity: g,
            dt: cfg.get_or("cloth.dt", base.dt)?,
            substeps: cfg.get_or("cloth.substeps", base.substeps)?,
            iterations: cfg.get_or("cloth.iterations", base.iterations)?,
            friction: cfg.get_or("cloth.friction", base.friction)?,
            fmax: cfg.get_or("cloth.fmax", base.fmax)?,
            vertex_mass: cfg.get_or("cloth.vertex_mass", base.vertex_mass)?,
            damping: cfg.get_or("cloth.damping", base.damping)?,
            thickness: cfg.get_or("cloth.thickness", base.thickness)?,
        })
    }

    pub fn write_config(&self, cfg: &mut Config) {
        cfg.set("cloth.gravity", format!("{},{},{}", self.gravity.x, self.gravity.y, self.gravity.z));
        cfg.set("cloth.dt", self.dt);
        cfg.set("cloth.substeps", self.substeps);
        cfg.set("cloth.iterations", self.iterations);
        cfg.set("cloth.friction", self.friction);
        cfg.set("cloth.fmax", self.fmax);
        cfg.set("cloth.vertex_mass", self.vertex_mass);
        cfg.set("cloth.damping", self.damping);
        cfg.set("cloth.thickness", self.thickness);
    }
}

pub(crate) fn parse_vec3(key: &str, items: &[String]) -> Result<Vec3, ConfigError> {
    let vals: Result<Vec<f64>, _> = items.iter().map(|s| s.parse::<f64>()).collect();
    match vals {
        Ok(v) if v.len() == 3 => Ok(Vec3::new(v[0], v[1], v[2])),
        _ => Err(ConfigError::Value { key: key.into(), detail: "expected three comma-separated numbers".into() }),
    }
}

/// Kinematic collider moving linearly from `from` to `to` over one control step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ColliderMotion {
    pub from: Capsule,
    pub to: Capsule,
}

impl ColliderMotion {
    pub fn fixed(c: Capsule) -> Self {
        Self { from: c, to: c }
    }

    fn at(&self, s: f64) -> Capsule {
        Capsule { a: self.from.a.lerp(self.to.a, s), b: self.from.b.lerp(self.to.b, s), radius: self.from.radius }
    }
}

/// Per-vertex contact forces of one control step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ContactReport {
    /// Force exerted by the cloth on the collider at each vertex (zero without contact).
    pub forces: Vec<Vec3>,
    /// Collider that last corrected each vertex during the step.
    pub collider: Vec<Option<usize>>,
}

impl ContactReport {
    pub fn contacting(&self) -> impl Iterator<Item = usize> + '_ {
        self.collider.iter().enumerate().filter_map(|(i, c)| c.map(|_| i))
    }

    /// Vector sum of forces on collider `k`.
    pub fn total_on(&self, k: usize) -> Vec3 {
        self.forces.iter().zip(&self.collider).filter(|(_, c)| **c == Some(k)).map(|(f, _)| *f).sum()
    }
}

#[inline]
fn project(c: &DistanceConstraint, pos: &mut [Vec3], inv_mass: &[f64]) {
    let (wi, wj) = (inv_mass[c.i], inv_mass[c.j]);
    let w = wi + wj;
    if w == 0.0 {
        return;
    }
    let d = pos[c.j] - pos[c.i];
    let len = d.norm();
    if len < 1e-12 {
        return;
    }
    let corr = d * (c.stiffness * (len - c.rest) / (w * len));
    pos[c.i] += corr * wi;
    pos[c.j] -= corr * wj;
}

/// One Gauss-Seidel sweep over the stretch constraints.
pub fn stretch_sweep(mesh: &mut ClothMesh) {
    for c in &mesh.stretch {
        project(c, &mut mesh.positions, &mesh.inv_mass);
    }
}

/// Advances the cloth by one control step against kinematic colliders.
///
/// Per substep `h`: predict with exact constant-gravity motion, project stretch then
/// bend constraints, push vertices out of colliders (interpolated along their motion),
/// apply Coulomb friction to the displacement relative to the collider surface, then
/// update velocities. Reported forces are `-m * dp_n / h^2` averaged over the substeps,
/// i.e. the force on the collider (a vertex resting on a surface reports `m g`).
pub fn step_cloth(mesh: &mut ClothMesh, params: &ClothParams, colliders: &[ColliderMotion]) -> Result<ContactReport, ClothError> {
    let n = mesh.num_vertices();
    let h = params.substep();
    let g = params.gravity;
    let keep = (1.0 - params.damping * h).max(0.0);
    let mut report = ContactReport { forces: vec![Vec3::ZERO; n], collider: vec![None; n] };
    let mut impulse = vec![Vec3::ZERO; n];
    let mut start = mesh.positions.clone();
    let mut pred = vec![Vec3::ZERO; n];
    let mut poses: Vec<Capsule> = colliders.iter().map(|c| c.at(0.0)).collect();

    for s in 0..params.substeps {
        for i in 0..n {
            if mesh.inv_mass[i] == 0.0 {
                pred[i] = start[i];
            } else {
                mesh.velocities[i] *= keep;
                pred[i] = start[i] + mesh.velocities[i] * h + g * (0.5 * h * h);
            }
        }
        for _ in 0..params.iterations {
            for c in &mesh.stretch {
                project(c, &mut pred, &mesh.inv_mass);
            }
            for c in &mesh.bend {
                project(c, &mut pred, &mesh.inv_mass);
            }
        }

        let frac = (s + 1) as f64 / params.substeps as f64;
        let next_poses: Vec<Capsule> = colliders.iter().map(|c| c.at(frac)).collect();
        for i in 0..n {
            if mesh.inv_mass[i] == 0.0 {
                continue;
            }
            for (k, (cap, prev)) in next_poses.iter().zip(&poses).enumerate() {
                let contact = cap.closest_point(pred[i]);
                let gap = contact.signed_distance - params.thickness;
                if gap >= 0.0 {
                    continue;
                }
                let dn = -gap;
                let nrm = contact.normal;
                pred[i] += nrm * dn;
                // Coulomb friction on motion relative to the collider surface point.
                let t = contact.segment_t;
                let surf_motion = (cap.a - prev.a) * (1.0 - t) + (cap.b - prev.b) * t;
                let rel = (pred[i] - start[i]) - surf_motion;
                let tang = rel - nrm * rel.dot(nrm);
                let tl = tang.norm();
                let limit = params.friction * dn;
                if tl <= limit {
                    pred[i] -= tang;
                } else if tl > 0.0 {
                    pred[i] -= tang * (limit / tl);
                }
                impulse[i] -= nrm * (mesh.mass(i) * dn / h);
                report.collider[i] = Some(k);
            }
        }

        for i in 0..n {
            if mesh.inv_mass[i] == 0.0 {
                continue;
            }
            mesh.velocities[i] = (pred[i] - start[i]) / h + g * (0.5 * h);
            start[i] = pred[i];
        }
        poses = next_poses;
    }

    if let Some(v) = start.iter().position(|p| !p.is_finite()) {
        return Err(ClothError::Diverged { vertex: v });
    }
    mesh.prev_positions = std::mem::replace(&mut mesh.positions, start);
    for i in 0..n {
        if report.collider[i].is_some() {
            report.forces[i] = impulse[i] / params.dt;
        }
    }
    Ok(report)
}
