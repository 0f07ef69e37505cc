use super::chain::{KinematicChain, Pose};
use crate::cloth::ContactReport;
use crate::error::ManipulatorError;
use crate::geom::Vec3;

/// IK weight of the leading sphere relative to a trailing one.
pub const LEADING_WEIGHT_RATIO: f64 = 40.0;
/// Medial-axis spacing used by [`HapticSphereLayout::auto`], metres.
pub const AUTO_SPACING: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HapticSphere {
    pub link: usize,
    /// Centre in the link frame, on the link's medial segment.
    pub local: Vec3,
    pub leading: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HapticSphereLayout {
    pub spheres: Vec<HapticSphere>,
}

impl HapticSphereLayout {
    pub fn new(chain: &KinematicChain, spheres: Vec<HapticSphere>) -> Result<Self, ManipulatorError> {
        let leading = spheres.iter().filter(|s| s.leading).count();
        if leading != 1 {
            return Err(ManipulatorError::Invalid(format!("layout needs exactly one leading sphere, found {leading}")));
        }
        for (k, s) in spheres.iter().enumerate() {
            let l = chain
                .links
                .get(s.link)
                .ok_or_else(|| ManipulatorError::Invalid(format!("sphere {k}: no link {}", s.link)))?;
            let seg = l.b - l.a;
            let t = if seg.norm_squared() > 0.0 { ((s.local - l.a).dot(seg) / seg.norm_squared()).clamp(0.0, 1.0) } else { 0.0 };
            if (l.a + seg * t).distance(s.local) > 1e-9 {
                return Err(ManipulatorError::Invalid(format!("sphere {k} is off the medial axis of link {}", l.name)));
            }
        }
        Ok(Self { spheres })
    }

    /// One sphere per [`AUTO_SPACING`] of medial axis on every link, starting at the
    /// link's first endpoint, plus a leading sphere at the tip of the last link.
    pub fn auto(chain: &KinematicChain) -> Self {
        let mut spheres = Vec::new();
        for (i, l) in chain.links.iter().enumerate() {
            let len = l.a.distance(l.b);
            let n = (len / AUTO_SPACING - 1e-9).ceil() as usize;
            for k in 0..n {
                spheres.push(HapticSphere { link: i, local: l.a.lerp(l.b, k as f64 / n as f64), leading: false });
            }
        }
        let last = chain.links.len() - 1;
        spheres.push(HapticSphere { link: last, local: chain.links[last].b, leading: true });
        Self { spheres }
    }

    pub fn len(&self) -> usize {
        self.spheres.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spheres.is_empty()
    }

    pub fn leading_index(&self) -> usize {
        self.spheres.iter().position(|s| s.leading).expect("layout has a leading sphere")
    }

    /// IK weight: 40 for the leading sphere, 1 otherwise.
    pub fn weight(&self, k: usize) -> f64 {
        if self.spheres[k].leading {
            LEADING_WEIGHT_RATIO
        } else {
            1.0
        }
    }

    pub fn centers(&self, chain: &KinematicChain, pose: &Pose) -> Vec<Vec3> {
        self.spheres.iter().map(|s| chain.point(pose, s.link, s.local)).collect()
    }
}

/// Index of the sphere centre nearest to `v` (lowest index on ties).
pub fn nearest_sphere(centers: &[Vec3], v: Vec3) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (k, c) in centers.iter().enumerate() {
        let d = c.distance_squared(v);
        if d < best.0 {
            best = (d, k);
        }
    }
    best.1
}

/// Sums each contacting vertex's force into its nearest sphere and divides by `fmax`.
pub fn bin_forces(report: &ContactReport, vertices: &[Vec3], centers: &[Vec3], fmax: f64) -> Vec<Vec3> {
    let mut out = vec![Vec3::ZERO; centers.len()];
    if centers.is_empty() {
        return out;
    }
    for j in report.contacting() {
        out[nearest_sphere(centers, vertices[j])] += report.forces[j];
    }
    for f in out.iter_mut() {
        *f = *f / fmax;
    }
    out
}

/// Desired position for one sphere, as fed to the IK solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SphereCommand {
    pub sphere: usize,
    pub current: Vec3,
    pub desired: Vec3,
    pub weight: f64,
}
