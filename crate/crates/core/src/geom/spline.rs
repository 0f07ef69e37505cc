//! Centripetal Catmull-Rom splines with an arc-length lookup table.

use super::Vec3;
use crate::error::GeomError;

const SAMPLES_PER_SEGMENT: usize = 32;
const ALPHA: f64 = 0.5;

/// Interpolating centripetal Catmull-Rom curve through `control_points`.
///
/// End tangents come from reflected phantom points, so a two-point spline is
/// the straight segment between them.
#[derive(Clone, Debug)]
pub struct Spline {
    control_points: Vec<Vec3>,
    /// Knot values per segment: `[t0, t1, t2, t3]`.
    knots: Vec<[f64; 4]>,
    /// Cumulative arc length at each table sample; `SAMPLES_PER_SEGMENT + 1` entries per segment
    /// sharing endpoints, flattened.
    arc_table: Vec<f64>,
    /// Cumulative arc length at each control point.
    knot_lengths: Vec<f64>,
}

impl Spline {
    pub fn new(control_points: Vec<Vec3>) -> Result<Self, GeomError> {
        if control_points.len() < 2 {
            return Err(GeomError::TooFewControlPoints(control_points.len()));
        }
        if control_points.iter().any(|p| !p.is_finite()) {
            return Err(GeomError::NonFinite("spline control point"));
        }
        let n = control_points.len();
        let mut ext = Vec::with_capacity(n + 2);
        ext.push(control_points[0] * 2.0 - control_points[1]);
        ext.extend_from_slice(&control_points);
        ext.push(control_points[n - 1] * 2.0 - control_points[n - 2]);

        let knots = (0..n - 1)
            .map(|i| {
                let mut t = [0.0; 4];
                for k in 1..4 {
                    let d = ext[i + k].distance(ext[i + k - 1]).powf(ALPHA);
                    t[k] = t[k - 1] + d.max(1e-12);
                }
                t
            })
            .collect();

        let mut spline = Spline { control_points, knots, arc_table: Vec::new(), knot_lengths: Vec::new() };
        spline.build_table(&ext);
        Ok(spline)
    }

    fn build_table(&mut self, ext: &[Vec3]) {
        let segments = self.segment_count();
        let mut table = Vec::with_capacity(segments * (SAMPLES_PER_SEGMENT + 1));
        let mut knot_lengths = Vec::with_capacity(segments + 1);
        let mut acc = 0.0;
        knot_lengths.push(0.0);
        for s in 0..segments {
            let mut prev = self.eval_segment_ext(ext, s, 0.0);
            table.push(acc);
            for k in 1..=SAMPLES_PER_SEGMENT {
                let u = k as f64 / SAMPLES_PER_SEGMENT as f64;
                let p = self.eval_segment_ext(ext, s, u);
                acc += p.distance(prev);
                prev = p;
                table.push(acc);
            }
            knot_lengths.push(acc);
        }
        self.arc_table = table;
        self.knot_lengths = knot_lengths;
    }

    fn ext_point(&self, i: usize) -> Vec3 {
        let n = self.control_points.len();
        match i {
            0 => self.control_points[0] * 2.0 - self.control_points[1],
            i if i == n + 1 => self.control_points[n - 1] * 2.0 - self.control_points[n - 2],
            i => self.control_points[i - 1],
        }
    }

    fn eval_segment_ext(&self, ext: &[Vec3], seg: usize, u: f64) -> Vec3 {
        barry_goldman(&self.knots[seg], [ext[seg], ext[seg + 1], ext[seg + 2], ext[seg + 3]], u)
    }

    pub fn control_points(&self) -> &[Vec3] {
        &self.control_points
    }

    pub fn segment_count(&self) -> usize {
        self.control_points.len() - 1
    }

    /// Point on segment `seg` (between control points `seg` and `seg + 1`) at local parameter `u`.
    pub fn segment_point(&self, seg: usize, u: f64) -> Vec3 {
        let pts = [self.ext_point(seg), self.ext_point(seg + 1), self.ext_point(seg + 2), self.ext_point(seg + 3)];
        barry_goldman(&self.knots[seg], pts, u.clamp(0.0, 1.0))
    }

    pub fn length(&self) -> f64 {
        *self.knot_lengths.last().unwrap_or(&0.0)
    }

    /// Arc length at which control point `k` is reached.
    pub fn control_point_arc_length(&self, k: usize) -> f64 {
        self.knot_lengths[k]
    }

    /// Point at normalized arc-length fraction `u` in `[0, 1]`.
    pub fn point_at(&self, u: f64) -> Vec3 {
        if u <= 0.0 {
            return self.control_points[0];
        }
        if u >= 1.0 {
            return *self.control_points.last().unwrap();
        }
        self.point_at_arc_length(u * self.length())
    }

    /// Point at arc length `s`, clamped to `[0, length]`.
    pub fn point_at_arc_length(&self, s: f64) -> Vec3 {
        let total = self.length();
        if s <= 0.0 || total <= 0.0 {
            return self.control_points[0];
        }
        if s >= total {
            return *self.control_points.last().unwrap();
        }
        let seg = match self.knot_lengths.binary_search_by(|v| v.total_cmp(&s)) {
            Ok(k) => return self.control_points[k],
            Err(k) => k - 1,
        };
        let stride = SAMPLES_PER_SEGMENT + 1;
        let rows = &self.arc_table[seg * stride..(seg + 1) * stride];
        let j = rows.partition_point(|&v| v <= s).clamp(1, SAMPLES_PER_SEGMENT);
        let (s0, s1) = (rows[j - 1], rows[j]);
        let frac = if s1 > s0 { (s - s0) / (s1 - s0) } else { 0.0 };
        let u = ((j - 1) as f64 + frac) / SAMPLES_PER_SEGMENT as f64;
        self.segment_point(seg, u)
    }

    /// Arc length of the point on the curve closest to `p`, measured on the table polyline.
    pub fn closest_arc_length(&self, p: Vec3) -> f64 {
        let stride = SAMPLES_PER_SEGMENT + 1;
        let mut best = (f64::INFINITY, 0.0);
        for seg in 0..self.segment_count() {
            let rows = &self.arc_table[seg * stride..(seg + 1) * stride];
            let mut prev = self.segment_point(seg, 0.0);
            for k in 1..=SAMPLES_PER_SEGMENT {
                let cur = self.segment_point(seg, k as f64 / SAMPLES_PER_SEGMENT as f64);
                let d = cur - prev;
                let len2 = d.norm_squared();
                let t = if len2 > 0.0 { ((p - prev).dot(d) / len2).clamp(0.0, 1.0) } else { 0.0 };
                let dist2 = p.distance_squared(prev + d * t);
                if dist2 < best.0 {
                    best = (dist2, rows[k - 1] + t * (rows[k] - rows[k - 1]));
                }
                prev = cur;
            }
        }
        best.1
    }
}

fn barry_goldman(t: &[f64; 4], p: [Vec3; 4], u: f64) -> Vec3 {
    let [t0, t1, t2, t3] = *t;
    let s = t1 + u * (t2 - t1);
    let a1 = p[0] * ((t1 - s) / (t1 - t0)) + p[1] * ((s - t0) / (t1 - t0));
    let a2 = p[1] * ((t2 - s) / (t2 - t1)) + p[2] * ((s - t1) / (t2 - t1));
    let a3 = p[2] * ((t3 - s) / (t3 - t2)) + p[3] * ((s - t2) / (t3 - t2));
    let b1 = a1 * ((t2 - s) / (t2 - t0)) + a2 * ((s - t0) / (t2 - t0));
    let b2 = a2 * ((t3 - s) / (t3 - t1)) + a3 * ((s - t1) / (t3 - t1));
    b1 * ((t2 - s) / (t2 - t1)) + b2 * ((s - t1) / (t2 - t1))
}

/// Spline through the centroids of vertex loops, evaluated on the given positions.
pub fn spline_from_centroids(loops: &[Vec<usize>], positions: &[Vec3]) -> Result<Spline, GeomError> {
    let mut centroids = Vec::with_capacity(loops.len());
    for (k, lp) in loops.iter().enumerate() {
        if lp.is_empty() {
            return Err(GeomError::EmptyLoop(k));
        }
        let mut sum = Vec3::ZERO;
        for &i in lp {
            let p = positions.get(i).ok_or(GeomError::LoopIndexOutOfRange { index: i, len: positions.len() })?;
            sum += *p;
        }
        centroids.push(sum / lp.len() as f64);
    }
    Spline::new(centroids)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wavy() -> Spline {
        Spline::new(vec![
            Vec3::ZERO,
            Vec3::new(0.3, 0.2, 0.0),
            Vec3::new(0.6, -0.1, 0.1),
            Vec3::new(0.61, -0.1, 0.1),
            Vec3::new(1.0, 0.4, -0.2),
        ])
        .unwrap()
    }

    #[test]
    fn interpolates_control_points() {
        let s = wavy();
        for (k, &p) in s.control_points().iter().enumerate() {
            assert!(s.point_at_arc_length(s.control_point_arc_length(k)).distance(p) < 1e-6);
            if k < s.segment_count() {
                assert!(s.segment_point(k, 0.0).distance(p) < 1e-12);
            }
        }
        assert!(s.point_at(0.0).distance(Vec3::ZERO) < 1e-6);
        assert!(s.point_at(1.0).distance(Vec3::new(1.0, 0.4, -0.2)) < 1e-6);
    }

    #[test]
    fn two_points_give_straight_segment() {
        let a = Vec3::new(0.1, 0.2, 0.3);
        let b = Vec3::new(1.1, -0.2, 0.5);
        let s = Spline::new(vec![a, b]).unwrap();
        assert!((s.length() - a.distance(b)).abs() < 1e-9);
        for k in 0..=10 {
            let u = k as f64 / 10.0;
            assert!(s.point_at(u).distance(a.lerp(b, u)) < 1e-9);
        }
    }

    #[test]
    fn arc_length_roundtrip_through_projection() {
        let s = wavy();
        for k in 1..20 {
            let len = s.length() * k as f64 / 20.0;
            let p = s.point_at_arc_length(len);
            assert!((s.closest_arc_length(p) - len).abs() < 1e-3);
        }
    }

    #[test]
    fn centroid_errors() {
        let pos = vec![Vec3::ZERO; 4];
        assert!(matches!(spline_from_centroids(&[vec![0, 1], vec![]], &pos), Err(GeomError::EmptyLoop(1))));
        assert!(matches!(
            spline_from_centroids(&[vec![0, 9], vec![1]], &pos),
            Err(GeomError::LoopIndexOutOfRange { index: 9, .. })
        ));
    }

    #[test]
    fn square_loop_centroid() {
        let pos = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.5, 0.5, 2.0),
        ];
        let s = spline_from_centroids(&[vec![0, 1, 2, 3], vec![4]], &pos).unwrap();
        assert!(s.control_points()[0].distance(Vec3::new(0.5, 0.5, 0.0)) < 1e-15);
        // Moving every vertex shifts the centroid by the mean displacement.
        let shift = Vec3::new(0.1, -0.3, 0.2);
        let moved: Vec<Vec3> = pos.iter().map(|&p| p + shift).collect();
        let s2 = spline_from_centroids(&[vec![0, 1, 2, 3], vec![4]], &moved).unwrap();
        assert!(s2.control_points()[0].distance(Vec3::new(0.5, 0.5, 0.0) + shift) < 1e-15);
    }
}
