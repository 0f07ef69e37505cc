use super::Vec3;

/// Rigid truncated-cone shell of revolution.
///
/// The shell is the lateral surface between the throat circle (radius
/// `throat_radius`, centered at `throat_center`) and the mouth circle (radius
/// `mouth_radius`, centered at `throat_center + height * axis`). Both ends are
/// open. The shell has zero thickness.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FunnelSurface {
    pub throat_center: Vec3,
    /// Unit vector from the throat toward the mouth.
    pub axis: Vec3,
    pub mouth_radius: f64,
    pub throat_radius: f64,
    pub height: f64,
}

/// Closest shell point and the unit normal pointing from the shell toward the query.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FunnelContact {
    pub point: Vec3,
    pub normal: Vec3,
    pub distance: f64,
}

/// Penetration of a sphere into the shell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Penetration {
    /// `max(0, r - distance(center, shell))`.
    pub depth: f64,
    /// Unit direction from the closest shell point toward the sphere center.
    pub normal: Vec3,
}

impl FunnelSurface {
    pub fn is_valid(&self) -> bool {
        self.mouth_radius > self.throat_radius
            && self.throat_radius > 0.0
            && self.height > 0.0
            && (self.axis.norm() - 1.0).abs() < 1e-9
            && self.throat_center.is_finite()
    }

    pub fn mouth_center(&self) -> Vec3 {
        self.throat_center + self.axis * self.height
    }

    /// Shell radius at axial coordinate `a` in `[0, height]`.
    pub fn radius_at(&self, a: f64) -> f64 {
        self.throat_radius + (self.mouth_radius - self.throat_radius) * (a / self.height)
    }

    /// Closest point on the shell, including the exact point-to-circle distance at both rims.
    pub fn closest_point(&self, p: Vec3) -> FunnelContact {
        let rel = p - self.throat_center;
        let axial = rel.dot(self.axis);
        let radial_vec = rel - self.axis * axial;
        let radial = radial_vec.norm();
        let e = radial_vec.try_normalize().unwrap_or_else(|| self.axis.any_orthogonal());

        // Meridian segment from (0, throat) to (height, mouth) in (axial, radial) coordinates.
        let (sa, sr) = (self.height, self.mouth_radius - self.throat_radius);
        let len2 = sa * sa + sr * sr;
        let t = ((axial * sa + (radial - self.throat_radius) * sr) / len2).clamp(0.0, 1.0);
        let qa = t * sa;
        let qr = self.throat_radius + t * sr;

        let point = self.throat_center + self.axis * qa + e * qr;
        let offset = p - point;
        let distance = offset.norm();
        let normal = offset.try_normalize().unwrap_or_else(|| {
            // On the shell: inward-facing meridian normal.
            let len = len2.sqrt();
            (self.axis * (sr / len) - e * (sa / len)).normalize_or_zero()
        });
        FunnelContact { point, normal, distance }
    }

    pub fn sphere_penetration(&self, center: Vec3, radius: f64) -> Penetration {
        let c = self.closest_point(center);
        Penetration { depth: (radius - c.distance).max(0.0), normal: c.normal }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Rotation;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn sample_funnel() -> FunnelSurface {
        FunnelSurface {
            throat_center: Vec3::ZERO,
            axis: Vec3::Z,
            mouth_radius: 0.4,
            throat_radius: 0.22,
            height: 0.5,
        }
    }

    #[test]
    fn on_axis_query_hits_wall_foot() {
        let f = sample_funnel();
        // Deep inside the mouth on the axis: perpendicular foot on the slanted wall.
        let p = Vec3::new(0.0, 0.0, 0.4);
        let c = f.closest_point(p);
        let slope: f64 = (0.4 - 0.22) / 0.5;
        let expected = (0.22 + slope * 0.4) / (1.0 + slope * slope).sqrt();
        assert!((c.distance - expected).abs() < 1e-12);
        // The foot lies on the shell.
        let a = c.point.z;
        let rho = (c.point.x.powi(2) + c.point.y.powi(2)).sqrt();
        assert!((rho - f.radius_at(a)).abs() < 1e-12);
        assert!((c.normal.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn surface_points_are_fixed_points() {
        let f = FunnelSurface {
            throat_center: Vec3::new(0.1, -0.2, 0.3),
            axis: Rotation::from_axis_angle(Vec3::new(1.0, 1.0, 0.0), 0.7).rotate(Vec3::Z),
            ..sample_funnel()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let a = rng.gen_range(0.0..f.height);
            let th = rng.gen_range(0.0..std::f64::consts::TAU);
            let e1 = f.axis.any_orthogonal();
            let e2 = f.axis.cross(e1);
            let p = f.throat_center + f.axis * a + (e1 * th.cos() + e2 * th.sin()) * f.radius_at(a);
            let c = f.closest_point(p);
            assert!(c.point.distance(p) < 1e-9);
            assert!(c.distance < 1e-9);
            assert!((c.normal.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn rim_uses_circle_distance() {
        let f = sample_funnel();
        // Above the mouth rim, outside the meridian segment's reach.
        let p = Vec3::new(0.6, 0.0, 0.7);
        let c = f.closest_point(p);
        assert!(c.point.distance(Vec3::new(0.4, 0.0, 0.5)) < 1e-12);
        assert!((c.distance - p.distance(Vec3::new(0.4, 0.0, 0.5))).abs() < 1e-12);
    }

    #[test]
    fn penetration_cases() {
        let f = FunnelSurface { height: 0.2, ..sample_funnel() };
        let pen = f.sphere_penetration(Vec3::new(0.0, 0.0, 0.1), 0.2);
        assert_eq!(pen.depth, 0.0);
        let on_shell = Vec3::new(f.radius_at(0.1), 0.0, 0.1);
        let pen = f.sphere_penetration(on_shell, 0.2);
        assert!((pen.depth - 0.2).abs() < 1e-12);
    }
}
