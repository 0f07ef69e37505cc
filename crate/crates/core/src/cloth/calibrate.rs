use super::mesh::{ClothMaterial, ClothMesh};
use super::generate::generate_patch;
use super::solver::{step_cloth, ClothParams, ColliderMotion};
use crate::config::Config;
use crate::error::{ClothError, ConfigError};
use crate::geom::{Capsule, Vec3};

/// How the tearing probe is driven.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeProtocol {
    pub patch_size: f64,
    pub patch_resolution: usize,
    pub sphere_radius: f64,
    /// Push speeds tried, m/s.
    pub speeds: Vec<f64>,
    /// Stretch strain at which the cloth counts as torn.
    pub tear_strain: f64,
    /// Settling time before the push, s.
    pub settle_time: f64,
    /// Maximum push travel below the patch plane, m.
    pub max_travel: f64,
    /// Reported when the probe never tears the patch, N.
    pub force_ceiling: f64,
}

impl Default for ProbeProtocol {
    fn default() -> Self {
        Self {
            patch_size: 0.6,
            patch_resolution: 13,
            sphere_radius: 0.1,
            speeds: vec![0.05, 0.1, 0.2, 0.4],
            tear_strain: 0.3,
            settle_time: 0.5,
            max_travel: 0.3,
            force_ceiling: 100.0,
        }
    }
}

impl ProbeProtocol {
    pub fn from_config(cfg: &Config, base: &ProbeProtocol) -> Result<Self, ConfigError> {
        let speeds = match cfg.get_list("calibrate.speeds") {
            Some(v) => v
                .iter()
                .map(|s| s.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| ConfigError::Value { key: "calibrate.speeds".into(), detail: e.to_string() })?,
            None => base.speeds.clone(),
        };
        Ok(Self {
            patch_size: cfg.get_or("calibrate.patch_size", base.patch_size)?,
            patch_resolution: cfg.get_or("calibrate.patch_resolution", base.patch_resolution)?,
            sphere_radius: cfg.get_or("calibrate.sphere_radius", base.sphere_radius)?,
            speeds,
            tear_strain: cfg.get_or("calibrate.tear_strain", base.tear_strain)?,
            settle_time: cfg.get_or("calibrate.settle_time", base.settle_time)?,
            max_travel: cfg.get_or("calibrate.max_travel", base.max_travel)?,
            force_ceiling: cfg.get_or("calibrate.force_ceiling", base.force_ceiling)?,
        })
    }

    pub fn write_config(&self, cfg: &mut Config) {
        cfg.set("calibrate.patch_size", self.patch_size);
        cfg.set("calibrate.patch_resolution", self.patch_resolution);
        cfg.set("calibrate.sphere_radius", self.sphere_radius);
        let s: Vec<String> = self.speeds.iter().map(|v| v.to_string()).collect();
        cfg.set("calibrate.speeds", s.join(","));
        cfg.set("calibrate.tear_strain", self.tear_strain);
        cfg.set("calibrate.settle_time", self.settle_time);
        cfg.set("calibrate.max_travel", self.max_travel);
        cfg.set("calibrate.force_ceiling", self.force_ceiling);
    }
}

/// Result of one probe push.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeRun {
    pub speed: f64,
    /// Summed contact force when the strain threshold was first exceeded.
    pub tear_force: Option<f64>,
    pub peak_force: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FmaxCalibration {
    pub fmax: f64,
    /// True when no speed tore the patch and `fmax` is the force ceiling.
    pub hit_ceiling: bool,
    pub runs: Vec<ProbeRun>,
}

/// The pinned-border patch used by the probe.
pub fn probe_patch(protocol: &ProbeProtocol, material: &ClothMaterial) -> Result<ClothMesh, ClothError> {
    let mut patch = generate_patch(protocol.patch_size, protocol.patch_resolution, material)?;
    patch.pin_loop("border")?;
    Ok(patch)
}

fn settle(patch: &mut ClothMesh, params: &ClothParams, time: f64) -> Result<(), ClothError> {
    for _ in 0..(time / params.dt).round() as usize {
        step_cloth(patch, params, &[])?;
    }
    Ok(())
}

fn probe_start(protocol: &ProbeProtocol) -> Vec3 {
    Vec3::new(0.0, 0.0, protocol.sphere_radius + 0.02)
}

/// Pushes the probe sphere straight down through the patch centre at `speed`.
pub fn probe_push(patch: &ClothMesh, params: &ClothParams, protocol: &ProbeProtocol, speed: f64) -> Result<ProbeRun, ClothError> {
    let mut mesh = patch.clone();
    settle(&mut mesh, params, protocol.settle_time)?;
    let mut c = probe_start(protocol);
    let mut peak: f64 = 0.0;
    let floor = -protocol.max_travel;
    while c.z > floor {
        let next = c - Vec3::Z * (speed * params.dt);
        let motion = ColliderMotion {
            from: Capsule::sphere(c, protocol.sphere_radius),
            to: Capsule::sphere(next, protocol.sphere_radius),
        };
        let report = step_cloth(&mut mesh, params, &[motion])?;
        c = next;
        let force = report.total_on(0).norm();
        peak = peak.max(force);
        if mesh.max_strain() > protocol.tear_strain {
            return Ok(ProbeRun { speed, tear_force: Some(force), peak_force: peak });
        }
        if force > protocol.force_ceiling {
            break;
        }
    }
    Ok(ProbeRun { speed, tear_force: None, peak_force: peak })
}

/// Fmax as the smallest tearing force over the protocol's push speeds.
pub fn calibrate_fmax(patch: &ClothMesh, params: &ClothParams, protocol: &ProbeProtocol) -> Result<FmaxCalibration, ClothError> {
    if protocol.speeds.is_empty() || protocol.speeds.iter().any(|s| !(*s > 0.0)) {
        return Err(ClothError::InvalidParams("probe speeds must be positive".into()));
    }
    let runs = crate::par::try_map_indexed(protocol.speeds.len(), |k| probe_push(patch, params, protocol, protocol.speeds[k]))?;
    let fmax = runs.iter().filter_map(|r| r.tear_force).fold(f64::INFINITY, f64::min);
    if fmax.is_finite() {
        Ok(FmaxCalibration { fmax, hit_ceiling: false, runs })
    } else {
        Ok(FmaxCalibration { fmax: protocol.force_ceiling, hit_ceiling: true, runs })
    }
}

/// Outcome of a force-limited replay.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplayResult {
    pub tore: bool,
    pub max_strain: f64,
    pub max_force: f64,
}

/// Pushes with the slowest protocol speed while the contact force is below `limit`,
/// backing off when it is reached, for `duration` seconds.
pub fn replay_force_limited(
    patch: &ClothMesh,
    params: &ClothParams,
    protocol: &ProbeProtocol,
    limit: f64,
    duration: f64,
) -> Result<ReplayResult, ClothError> {
    let mut mesh = patch.clone();
    settle(&mut mesh, params, protocol.settle_time)?;
    let speed = protocol.speeds.iter().copied().fold(f64::INFINITY, f64::min);
    let mut c = probe_start(protocol);
    let mut force = 0.0;
    let mut res = ReplayResult { tore: false, max_strain: 0.0, max_force: 0.0 };
    for _ in 0..(duration / params.dt).round() as usize {
        let dir = if force < limit { -1.0 } else { 1.0 };
        let next = c + Vec3::Z * (dir * speed * params.dt);
        let motion = ColliderMotion {
            from: Capsule::sphere(c, protocol.sphere_radius),
            to: Capsule::sphere(next, protocol.sphere_radius),
        };
        let report = step_cloth(&mut mesh, params, &[motion])?;
        c = next;
        force = report.total_on(0).norm();
        res.max_force = res.max_force.max(force);
        let strain = mesh.max_strain();
        res.max_strain = res.max_strain.max(strain);
        res.tore |= strain > protocol.tear_strain;
    }
    Ok(res)
}
