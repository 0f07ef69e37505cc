use std::ops::Mul;

use rand::Rng;

use super::Vec3;

/// Unit quaternion `(w, x, y, z)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Default for Rotation {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Rotation {
    pub const IDENTITY: Rotation = Rotation { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    /// Rotation by `angle` radians about `axis` (normalized internally).
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let a = axis.normalize_or_zero();
        let (s, c) = (0.5 * angle).sin_cos();
        Rotation { w: c, x: a.x * s, y: a.y * s, z: a.z * s }
    }

    /// Shortest-arc rotation taking unit vector `from` onto unit vector `to`.
    pub fn between(from: Vec3, to: Vec3) -> Self {
        let f = from.normalize_or_zero();
        let t = to.normalize_or_zero();
        let d = f.dot(t);
        if d < -1.0 + 1e-12 {
            return Rotation::from_axis_angle(f.any_orthogonal(), std::f64::consts::PI);
        }
        let c = f.cross(t);
        Rotation { w: 1.0 + d, x: c.x, y: c.y, z: c.z }.normalized()
    }

    /// Uniformly distributed rotation (Shoemake's subgroup algorithm).
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        use std::f64::consts::TAU;
        let u1: f64 = rng.gen();
        let u2: f64 = rng.gen();
        let u3: f64 = rng.gen();
        let a = (1.0 - u1).sqrt();
        let b = u1.sqrt();
        Rotation {
            w: b * (TAU * u3).cos(),
            x: a * (TAU * u2).sin(),
            y: a * (TAU * u2).cos(),
            z: b * (TAU * u3).sin(),
        }
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalized(self) -> Self {
        let n = self.norm();
        Rotation { w: self.w / n, x: self.x / n, y: self.y / n, z: self.z / n }
    }

    pub fn conjugate(self) -> Self {
        Rotation { w: self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    pub fn rotate(&self, v: Vec3) -> Vec3 {
        // v' = v + 2w(q×v) + 2 q×(q×v)
        let q = Vec3::new(self.x, self.y, self.z);
        let t = q.cross(v) * 2.0;
        v + t * self.w + q.cross(t)
    }

    /// Columns of the equivalent rotation matrix.
    pub fn to_matrix_columns(&self) -> [Vec3; 3] {
        [self.rotate(Vec3::X), self.rotate(Vec3::Y), self.rotate(Vec3::Z)]
    }
}

impl Mul for Rotation {
    type Output = Rotation;

    /// Hamilton product: `(a * b).rotate(v) == a.rotate(b.rotate(v))`.
    fn mul(self, b: Rotation) -> Rotation {
        let a = self;
        Rotation {
            w: a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            x: a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            y: a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            z: a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: Vec3, b: Vec3, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn axis_angle_quarter_turn() {
        let r = Rotation::from_axis_angle(Vec3::Z, std::f64::consts::FRAC_PI_2);
        assert!(close(r.rotate(Vec3::X), Vec3::Y, 1e-12));
    }

    #[test]
    fn composition_is_associative_and_unit() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let a = Rotation::random(&mut rng);
            let b = Rotation::random(&mut rng);
            let c = Rotation::random(&mut rng);
            assert!((a.norm() - 1.0).abs() < 1e-9);
            let v = Vec3::new(0.3, -1.2, 2.0);
            let l = ((a * b) * c).rotate(v);
            let r = (a * (b * c)).rotate(v);
            assert!(close(l, r, 1e-12));
            assert!(close((a * b).rotate(v), a.rotate(b.rotate(v)), 1e-12));
            assert!(((a * b).norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn between_maps_vectors() {
        let f = Vec3::new(1.0, 2.0, -0.5).normalize_or_zero();
        let t = Vec3::new(-0.3, 0.1, 0.9).normalize_or_zero();
        assert!(close(Rotation::between(f, t).rotate(f), t, 1e-12));
        assert!(close(Rotation::between(f, -f).rotate(f), -f, 1e-12));
    }
}
