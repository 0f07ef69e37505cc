use std::collections::{BTreeMap, HashMap};

use crate::error::ClothError;
use crate::geom::Vec3;

/// Distance constraint between two vertices.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistanceConstraint {
    pub i: usize,
    pub j: usize,
    pub rest: f64,
    pub stiffness: f64,
}

/// Mass and stiffness assigned by mesh generators.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClothMaterial {
    pub vertex_mass: f64,
    pub stretch_stiffness: f64,
    pub bend_stiffness: f64,
}

impl Default for ClothMaterial {
    fn default() -> Self {
        Self { vertex_mass: 1e-3, stretch_stiffness: 0.9, bend_stiffness: 0.1 }
    }
}

/// Triangle cloth with PBD constraints.
#[derive(Clone, Debug, PartialEq)]
pub struct ClothMesh {
    pub positions: Vec<Vec3>,
    pub prev_positions: Vec<Vec3>,
    pub velocities: Vec<Vec3>,
    /// Zero for pinned vertices.
    pub inv_mass: Vec<f64>,
    pub triangles: Vec<[usize; 3]>,
    pub stretch: Vec<DistanceConstraint>,
    pub bend: Vec<DistanceConstraint>,
    /// Named vertex loops (e.g. garment openings), each an ordered cycle.
    pub loops: BTreeMap<String, Vec<usize>>,
}

impl ClothMesh {
    /// Builds a mesh at rest: stretch constraints on every edge, bend constraints between
    /// the opposite vertices of every pair of triangles sharing an edge.
    pub fn from_triangles(positions: Vec<Vec3>, triangles: Vec<[usize; 3]>, material: &ClothMaterial) -> Result<Self, ClothError> {
        let n = positions.len();
        if n == 0 || triangles.is_empty() {
            return Err(ClothError::InvalidMesh("mesh needs vertices and triangles".into()));
        }
        if !(material.vertex_mass > 0.0) {
            return Err(ClothError::InvalidMesh("vertex mass must be positive".into()));
        }
        for k in [material.stretch_stiffness, material.bend_stiffness] {
            if !(k > 0.0 && k <= 1.0) {
                return Err(ClothError::InvalidMesh(format!("stiffness {k} outside (0, 1]")));
            }
        }
        let mut opposite: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        let mut edges: Vec<(usize, usize)> = Vec::new();
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= n) || tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(ClothError::InvalidMesh(format!("triangle {t} is degenerate or out of range")));
            }
            for k in 0..3 {
                let (a, b, c) = (tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]);
                let e = (a.min(b), a.max(b));
                let entry = opposite.entry(e).or_default();
                if entry.is_empty() {
                    edges.push(e);
                }
                entry.push(c);
            }
        }
        let dist = |i: usize, j: usize| positions[i].distance(positions[j]);
        let mut stretch = Vec::with_capacity(edges.len());
        let mut bend = Vec::new();
        for &(i, j) in &edges {
            let rest = dist(i, j);
            if !(rest > 0.0) {
                return Err(ClothError::InvalidMesh(format!("zero-length edge {i}-{j}")));
            }
            stretch.push(DistanceConstraint { i, j, rest, stiffness: material.stretch_stiffness });
            let opp = &opposite[&(i, j)];
            if opp.len() > 2 {
                return Err(ClothError::InvalidMesh(format!("edge {i}-{j} is non-manifold")));
            }
            if opp.len() == 2 && opp[0] != opp[1] {
                let (a, b) = (opp[0].min(opp[1]), opp[0].max(opp[1]));
                let rest = dist(a, b);
                if rest > 0.0 {
                    bend.push(DistanceConstraint { i: a, j: b, rest, stiffness: material.bend_stiffness });
                }
            }
        }
        Ok(Self {
            prev_positions: positions.clone(),
            velocities: vec![Vec3::ZERO; n],
            inv_mass: vec![1.0 / material.vertex_mass; n],
            positions,
            triangles,
            stretch,
            bend,
            loops: BTreeMap::new(),
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.positions.len()
    }

    pub fn num_edges(&self) -> usize {
        self.stretch.len()
    }

    /// `V - E + F`.
    pub fn euler_characteristic(&self) -> i64 {
        self.num_vertices() as i64 - self.num_edges() as i64 + self.triangles.len() as i64
    }

    pub fn pin(&mut self, i: usize) {
        self.inv_mass[i] = 0.0;
        self.velocities[i] = Vec3::ZERO;
    }

    pub fn pin_loop(&mut self, name: &str) -> Result<(), ClothError> {
        let verts = self.loops.get(name).cloned().ok_or_else(|| ClothError::InvalidMesh(format!("no loop named {name}")))?;
        for v in verts {
            self.pin(v);
        }
        Ok(())
    }

    pub fn is_pinned(&self, i: usize) -> bool {
        self.inv_mass[i] == 0.0
    }

    pub fn pinned(&self) -> Vec<usize> {
        (0..self.num_vertices()).filter(|&i| self.is_pinned(i)).collect()
    }

    pub fn mass(&self, i: usize) -> f64 {
        if self.inv_mass[i] > 0.0 {
            1.0 / self.inv_mass[i]
        } else {
            0.0
        }
    }

    pub fn total_mass(&self) -> f64 {
        (0..self.num_vertices()).map(|i| self.mass(i)).sum()
    }

    pub fn centroid(&self) -> Vec3 {
        self.positions.iter().copied().sum::<Vec3>() / self.num_vertices() as f64
    }

    /// `sum (|p_i - p_j| - rest)^2` over stretch constraints.
    pub fn stretch_energy(&self) -> f64 {
        self.stretch
            .iter()
            .map(|c| {
                let d = self.positions[c.i].distance(self.positions[c.j]) - c.rest;
                d * d
            })
            .sum()
    }

    /// Largest relative elongation `(|p_i - p_j| - rest) / rest` over stretch constraints.
    pub fn max_strain(&self) -> f64 {
        self.stretch
            .iter()
            .map(|c| (self.positions[c.i].distance(self.positions[c.j]) - c.rest) / c.rest)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest `|strain|` (compression or elongation).
    pub fn max_abs_strain(&self) -> f64 {
        self.stretch
            .iter()
            .map(|c| ((self.positions[c.i].distance(self.positions[c.j]) - c.rest) / c.rest).abs())
            .fold(0.0, f64::max)
    }

    /// Rigidly transforms positions (and velocities) by `rotate` then `offset`.
    pub fn transform(&mut self, rotate: impl Fn(Vec3) -> Vec3, offset: Vec3) {
        for p in self.positions.iter_mut() {
            *p = rotate(*p) + offset;
        }
        for v in self.velocities.iter_mut() {
            *v = rotate(*v);
        }
        self.prev_positions = self.positions.clone();
    }

    /// Centroid of a named loop.
    pub fn loop_centroid(&self, name: &str) -> Option<Vec3> {
        let l = self.loops.get(name)?;
        Some(l.iter().map(|&i| self.positions[i]).sum::<Vec3>() / l.len() as f64)
    }

    /// Checks that a loop is a closed cycle of mesh edges.
    pub fn is_closed_edge_cycle(&self, lp: &[usize]) -> bool {
        if lp.len() < 3 {
            return false;
        }
        let edges: std::collections::HashSet<(usize, usize)> =
            self.stretch.iter().map(|c| (c.i.min(c.j), c.i.max(c.j))).collect();
        (0..lp.len()).all(|k| {
            let (a, b) = (lp[k], lp[(k + 1) % lp.len()]);
            edges.contains(&(a.min(b), a.max(b)))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad() -> ClothMesh {
        let p = vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(1.0, 1.0, 0.0), Vec3::new(0.0, 1.0, 0.0)];
        ClothMesh::from_triangles(p, vec![[0, 1, 2], [0, 2, 3]], &ClothMaterial::default()).unwrap()
    }

    #[test]
    fn quad_constraints() {
        let m = quad();
        assert_eq!(m.num_edges(), 5);
        assert_eq!(m.bend.len(), 1);
        assert_eq!((m.bend[0].i, m.bend[0].j), (1, 3));
        assert_eq!(m.euler_characteristic(), 1);
        assert_eq!(m.stretch_energy(), 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        let p = vec![Vec3::ZERO, Vec3::X, Vec3::Y];
        assert!(ClothMesh::from_triangles(p.clone(), vec![[0, 1, 1]], &ClothMaterial::default()).is_err());
        assert!(ClothMesh::from_triangles(p.clone(), vec![[0, 1, 5]], &ClothMaterial::default()).is_err());
        let soft = ClothMaterial { stretch_stiffness: 0.0, ..Default::default() };
        assert!(ClothMesh::from_triangles(p, vec![[0, 1, 2]], &soft).is_err());
    }

    #[test]
    fn pinning() {
        let mut m = quad();
        m.pin(2);
        assert!(m.is_pinned(2));
        assert_eq!(m.pinned(), vec![2]);
        assert!((m.total_mass() - 3e-3).abs() < 1e-15);
    }
}
