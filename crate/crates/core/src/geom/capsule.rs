use super::Vec3;

/// Segment `a`–`b` swept by a sphere of `radius`. `a == b` is a sphere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Capsule {
    pub a: Vec3,
    pub b: Vec3,
    pub radius: f64,
}

/// Result of a closest-point query against a capsule surface.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CapsuleContact {
    /// Closest point on the capsule surface.
    pub point: Vec3,
    /// Outward unit normal at `point`.
    pub normal: Vec3,
    /// Distance from the query to the medial segment minus the radius.
    pub signed_distance: f64,
    /// Parameter in `[0, 1]` of the closest medial-segment point.
    pub segment_t: f64,
}

impl Capsule {
    pub fn new(a: Vec3, b: Vec3, radius: f64) -> Self {
        Self { a, b, radius }
    }

    pub fn sphere(center: Vec3, radius: f64) -> Self {
        Self { a: center, b: center, radius }
    }

    /// True when the medial segment has (numerically) zero length.
    pub fn is_sphere(&self) -> bool {
        self.a.distance_squared(self.b) <= 1e-24
    }

    pub fn length(&self) -> f64 {
        self.a.distance(self.b)
    }

    /// Parameter of the medial-segment point closest to `p`.
    pub fn segment_parameter(&self, p: Vec3) -> f64 {
        let ab = self.b - self.a;
        let len2 = ab.norm_squared();
        if len2 <= 1e-24 {
            return 0.0;
        }
        ((p - self.a).dot(ab) / len2).clamp(0.0, 1.0)
    }

    pub fn closest_point(&self, p: Vec3) -> CapsuleContact {
        let t = self.segment_parameter(p);
        let on_axis = self.a.lerp(self.b, t);
        let offset = p - on_axis;
        let dist = offset.norm();
        let normal = match offset.try_normalize() {
            Some(n) => n,
            None if self.is_sphere() => Vec3::Z,
            None => (self.b - self.a).any_orthogonal(),
        };
        CapsuleContact {
            point: on_axis + normal * self.radius,
            normal,
            signed_distance: dist - self.radius,
            segment_t: t,
        }
    }

    pub fn translated(&self, by: Vec3) -> Capsule {
        Capsule { a: self.a + by, b: self.b + by, radius: self.radius }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn surface_point_at_midpoint_offset() {
        let c = Capsule::new(Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), 0.1);
        let q = c.closest_point(Vec3::new(0.5, 0.1, 0.0));
        assert!(q.signed_distance.abs() < 1e-15);
        assert!((q.point - Vec3::new(0.5, 0.1, 0.0)).norm() < 1e-15);
        assert!((q.normal - Vec3::Y).norm() < 1e-15);
    }

    #[test]
    fn degenerate_capsule_is_sphere() {
        let center = Vec3::new(0.2, -0.1, 0.3);
        let c = Capsule::new(center, center, 0.25);
        let p = Vec3::new(1.0, 0.5, -0.2);
        let q = c.closest_point(p);
        assert!((q.signed_distance - (p.distance(center) - 0.25)).abs() < 1e-14);
        assert!((q.point.distance(center) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn inside_is_negative() {
        let c = Capsule::new(Vec3::ZERO, Vec3::Z, 0.3);
        let q = c.closest_point(Vec3::new(0.1, 0.0, 0.5));
        assert!((q.signed_distance + 0.2).abs() < 1e-14);
    }

    #[test]
    fn point_on_axis_gets_a_unit_normal() {
        let c = Capsule::new(Vec3::ZERO, Vec3::Z, 0.3);
        let q = c.closest_point(Vec3::new(0.0, 0.0, 0.5));
        assert!((q.normal.norm() - 1.0).abs() < 1e-12);
        assert!(q.normal.dot(Vec3::Z).abs() < 1e-12);
        assert!((q.signed_distance + 0.3).abs() < 1e-15);
    }
}
