use crate::error::ManipulatorError;
use crate::geom::{Capsule, Rotation, Vec3};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum JointKind {
    /// One rotation about a link-local axis.
    Hinge { axis: Vec3 },
    /// Three rotations about local x, then y, then z.
    Ball,
}

impl JointKind {
    pub fn dofs(&self) -> usize {
        match self {
            JointKind::Hinge { .. } => 1,
            JointKind::Ball => 3,
        }
    }
}

/// Rigid capsule link attached to its parent through a joint.
#[derive(Clone, Debug, PartialEq)]
pub struct Link {
    pub name: String,
    pub parent: Option<usize>,
    /// Joint position in the parent link frame (in the root frame for top-level links).
    pub origin: Vec3,
    pub joint: JointKind,
    /// Per-DOF limits, radians.
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Capsule medial segment and radius in the link frame.
    pub a: Vec3,
    pub b: Vec3,
    pub radius: f64,
}

/// Tree of capsule links on a translating root.
///
/// Coordinates `q` are the three root translations (metres, world axes) followed by
/// each link's joint angles in link order.
#[derive(Clone, Debug, PartialEq)]
pub struct KinematicChain {
    pub links: Vec<Link>,
    pub base_position: Vec3,
    pub base_rotation: Rotation,
    pub root_lo: Vec3,
    pub root_hi: Vec3,
    offsets: Vec<usize>,
    /// Ancestor links of each link, itself included.
    ancestors: Vec<Vec<usize>>,
}

/// Forward kinematics of one configuration.
#[derive(Clone, Debug)]
pub struct Pose {
    pub q: Vec<f64>,
    /// Link frame rotation and origin in world coordinates.
    pub frames: Vec<(Rotation, Vec3)>,
    /// World axis and pivot of every angular DOF, indexed like `q`.
    axes: Vec<(Vec3, Vec3)>,
    /// Set when the requested `q` was outside the limits and got clamped.
    pub clamped: bool,
}

impl KinematicChain {
    pub fn new(links: Vec<Link>, root_lo: Vec3, root_hi: Vec3) -> Result<Self, ManipulatorError> {
        let bad = |m: String| Err(ManipulatorError::Invalid(m));
        if links.is_empty() {
            return bad("manipulator needs at least one link".into());
        }
        for k in 0..3 {
            if !(root_lo[k] <= root_hi[k]) {
                return bad(format!("root bound {k}: lo {} > hi {}", root_lo[k], root_hi[k]));
            }
        }
        let mut offsets = Vec::with_capacity(links.len());
        let mut ancestors: Vec<Vec<usize>> = Vec::with_capacity(links.len());
        let mut n = 3;
        for (i, l) in links.iter().enumerate() {
            if let Some(p) = l.parent {
                if p >= i {
                    return bad(format!("link {} must come after its parent", l.name));
                }
            }
            if l.lo.len() != l.joint.dofs() || l.hi.len() != l.joint.dofs() {
                return bad(format!("link {}: expected {} limit pairs", l.name, l.joint.dofs()));
            }
            if l.lo.iter().zip(&l.hi).any(|(lo, hi)| !(lo <= hi)) {
                return bad(format!("link {}: joint limit lo > hi", l.name));
            }
            if let JointKind::Hinge { axis } = l.joint {
                if axis.try_normalize().is_none() {
                    return bad(format!("link {}: zero hinge axis", l.name));
                }
            }
            if !(l.radius > 0.0) {
                return bad(format!("link {}: radius must be positive", l.name));
            }
            offsets.push(n);
            n += l.joint.dofs();
            let mut anc = l.parent.map(|p| ancestors[p].clone()).unwrap_or_default();
            anc.push(i);
            ancestors.push(anc);
        }
        Ok(Self {
            links,
            base_position: Vec3::ZERO,
            base_rotation: Rotation::IDENTITY,
            root_lo,
            root_hi,
            offsets,
            ancestors,
        })
    }

    pub fn num_dofs(&self) -> usize {
        3 + self.links.iter().map(|l| l.joint.dofs()).sum::<usize>()
    }

    /// Index of the first coordinate of link `i`'s joint.
    pub fn dof_offset(&self, i: usize) -> usize {
        self.offsets[i]
    }

    pub fn lower(&self) -> Vec<f64> {
        let mut v = self.root_lo.to_array().to_vec();
        self.links.iter().for_each(|l| v.extend(&l.lo));
        v
    }

    pub fn upper(&self) -> Vec<f64> {
        let mut v = self.root_hi.to_array().to_vec();
        self.links.iter().for_each(|l| v.extend(&l.hi));
        v
    }

    /// Clamps `q` into the limits in place; returns whether anything changed.
    pub fn clamp(&self, q: &mut [f64]) -> bool {
        let (lo, hi) = (self.lower(), self.upper());
        let mut changed = false;
        for k in 0..q.len() {
            let c = q[k].clamp(lo[k], hi[k]);
            changed |= c != q[k];
            q[k] = c;
        }
        changed
    }

    pub fn within_limits(&self, q: &[f64]) -> bool {
        let (lo, hi) = (self.lower(), self.upper());
        q.len() == self.num_dofs() && q.iter().zip(lo.iter().zip(&hi)).all(|(v, (l, h))| l <= v && v <= h)
    }

    pub fn forward_kinematics(&self, q: &[f64]) -> Pose {
        assert_eq!(q.len(), self.num_dofs(), "configuration length");
        let mut q = q.to_vec();
        let clamped = self.clamp(&mut q);
        if clamped {
            log::warn!("joint configuration outside limits; clamped");
        }
        let root = self.base_position + Vec3::new(q[0], q[1], q[2]);
        let mut frames: Vec<(Rotation, Vec3)> = Vec::with_capacity(self.links.len());
        let mut axes = vec![(Vec3::ZERO, Vec3::ZERO); q.len()];
        for k in 0..3 {
            axes[k] = (Vec3::from_array(std::array::from_fn(|j| (j == k) as u8 as f64)), Vec3::ZERO);
        }
        for (i, l) in self.links.iter().enumerate() {
            let (prot, ppos) = match l.parent {
                Some(p) => frames[p],
                None => (self.base_rotation, root),
            };
            let pivot = ppos + prot.rotate(l.origin);
            let off = self.offsets[i];
            let rot = match l.joint {
                JointKind::Hinge { axis } => {
                    axes[off] = (prot.rotate(axis.normalize_or_zero()), pivot);
                    prot * Rotation::from_axis_angle(axis, q[off])
                }
                JointKind::Ball => {
                    let mut r = prot;
                    for (k, local) in [Vec3::X, Vec3::Y, Vec3::Z].into_iter().enumerate() {
                        axes[off + k] = (r.rotate(local), pivot);
                        r = r * Rotation::from_axis_angle(local, q[off + k]);
                    }
                    r
                }
            };
            frames.push((rot, pivot));
        }
        Pose { q, frames, axes, clamped }
    }

    /// World position of a link-local point.
    pub fn point(&self, pose: &Pose, link: usize, local: Vec3) -> Vec3 {
        let (r, p) = pose.frames[link];
        p + r.rotate(local)
    }

    pub fn capsules(&self, pose: &Pose) -> Vec<Capsule> {
        self.links
            .iter()
            .enumerate()
            .map(|(i, l)| Capsule::new(self.point(pose, i, l.a), self.point(pose, i, l.b), l.radius))
            .collect()
    }

    /// Jacobian columns `d point / d q_k` for a point rigidly attached to `link`.
    pub fn point_jacobian(&self, pose: &Pose, link: usize, world: Vec3) -> Vec<Vec3> {
        let mut cols = vec![Vec3::ZERO; pose.q.len()];
        cols[0] = Vec3::X;
        cols[1] = Vec3::Y;
        cols[2] = Vec3::Z;
        for &a in &self.ancestors[link] {
            let off = self.offsets[a];
            for k in off..off + self.links[a].joint.dofs() {
                let (axis, pivot) = pose.axes[k];
                cols[k] = axis.cross(world - pivot);
            }
        }
        cols
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn planar_two_link() -> KinematicChain {
        let link = |name: &str, parent, origin| Link {
            name: name.into(),
            parent,
            origin,
            joint: JointKind::Hinge { axis: Vec3::Z },
            lo: vec![-std::f64::consts::PI],
            hi: vec![std::f64::consts::PI],
            a: Vec3::ZERO,
            b: Vec3::new(0.5, 0.0, 0.0),
            radius: 0.05,
        };
        KinematicChain::new(
            vec![link("upper", None, Vec3::ZERO), link("lower", Some(0), Vec3::new(0.5, 0.0, 0.0))],
            Vec3::ZERO,
            Vec3::ZERO,
        )
        .unwrap()
    }

    pub(crate) fn spatial_arm() -> KinematicChain {
        let lim = |n: usize, v: f64| (vec![-v; n], vec![v; n]);
        let (slo, shi) = lim(3, 1.5);
        let (elo, ehi) = (vec![0.0], vec![2.5]);
        let (wlo, whi) = lim(1, 0.8);
        KinematicChain::new(
            vec![
                Link { name: "upper".into(), parent: None, origin: Vec3::ZERO, joint: JointKind::Ball, lo: slo, hi: shi, a: Vec3::ZERO, b: Vec3::new(0.3, 0.0, 0.0), radius: 0.05 },
                Link { name: "fore".into(), parent: Some(0), origin: Vec3::new(0.3, 0.0, 0.0), joint: JointKind::Hinge { axis: Vec3::new(0.0, 0.0, 1.0) }, lo: elo, hi: ehi, a: Vec3::ZERO, b: Vec3::new(0.27, 0.0, 0.0), radius: 0.04 },
                Link { name: "hand".into(), parent: Some(1), origin: Vec3::new(0.27, 0.0, 0.0), joint: JointKind::Hinge { axis: Vec3::new(0.0, 1.0, 0.0) }, lo: wlo, hi: whi, a: Vec3::ZERO, b: Vec3::new(0.12, 0.0, 0.0), radius: 0.035 },
            ],
            Vec3::splat(-0.3),
            Vec3::splat(0.3),
        )
        .unwrap()
    }

    pub(crate) fn random_q(chain: &KinematicChain, rng: &mut impl Rng) -> Vec<f64> {
        chain.lower().iter().zip(chain.upper()).map(|(l, h)| if h > *l { rng.gen_range(*l..h) } else { *l }).collect()
    }

    #[test]
    fn identity_pose() {
        let c = planar_two_link();
        let pose = c.forward_kinematics(&[0.0; 5]);
        assert!(!pose.clamped);
        let caps = c.capsules(&pose);
        assert_eq!(caps[1].b, Vec3::new(1.0, 0.0, 0.0));
        let pose = c.forward_kinematics(&[0.0, 0.0, 0.0, std::f64::consts::FRAC_PI_2, 0.0]);
        assert!(c.capsules(&pose)[1].b.distance(Vec3::new(0.0, 1.0, 0.0)) < 1e-12);
    }

    #[test]
    fn last_hinge_leaves_upstream_alone() {
        let c = spatial_arm();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let q = random_q(&c, &mut rng);
        let mut q2 = q.clone();
        *q2.last_mut().unwrap() += 0.3;
        let (a, b) = (c.forward_kinematics(&q), c.forward_kinematics(&q2));
        assert_eq!(c.capsules(&a)[..2], c.capsules(&b)[..2]);
        assert_ne!(c.capsules(&a)[2].b, c.capsules(&b)[2].b);
    }

    #[test]
    fn out_of_limits_is_clamped_and_flagged() {
        let c = spatial_arm();
        let mut q = vec![0.0; c.num_dofs()];
        q[6] = 3.0;
        let pose = c.forward_kinematics(&q);
        assert!(pose.clamped);
        assert_eq!(pose.q[6], 2.5);
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let c = spatial_arm();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = 1e-6;
        for _ in 0..50 {
            // Keep away from the limits so the difference stencil is not clamped.
            let q: Vec<f64> = random_q(&c, &mut rng).iter().zip(c.lower().iter().zip(c.upper())).map(|(v, (l, u))| v.clamp(l + 2.0 * h, u - 2.0 * h)).collect();
            let link = rng.gen_range(0..c.links.len());
            let local = c.links[link].b * rng.gen::<f64>();
            let pose = c.forward_kinematics(&q);
            let cols = c.point_jacobian(&pose, link, c.point(&pose, link, local));
            for k in 0..q.len() {
                let mut qp = q.clone();
                let mut qm = q.clone();
                qp[k] += h;
                qm[k] -= h;
                let fd = (c.point(&c.forward_kinematics(&qp), link, local) - c.point(&c.forward_kinematics(&qm), link, local)) / (2.0 * h);
                let err = (fd - cols[k]).norm();
                assert!(err <= 1e-6 * cols[k].norm().max(1.0), "dof {k}: analytic {:?} fd {:?}", cols[k], fd);
            }
        }
    }

    #[test]
    fn rejects_bad_chains() {
        let mut l = planar_two_link().links;
        l[1].parent = Some(1);
        assert!(KinematicChain::new(l, Vec3::ZERO, Vec3::ZERO).is_err());
        let mut l = planar_two_link().links;
        l[0].lo = vec![1.0];
        l[0].hi = vec![0.0];
        assert!(KinematicChain::new(l, Vec3::ZERO, Vec3::ZERO).is_err());
        assert!(KinematicChain::new(planar_two_link().links, Vec3::splat(1.0), Vec3::ZERO).is_err());
    }
}
