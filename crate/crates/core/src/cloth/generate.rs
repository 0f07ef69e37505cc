use std::f64::consts::TAU;

use super::mesh::{ClothMaterial, ClothMesh};
use crate::error::ClothError;
use crate::geom::Vec3;

/// Square `n x n` grid of side `size` in the xy-plane, centered at the origin.
/// The boundary is stored as loop `"border"`.
pub fn generate_patch(size: f64, n: usize, material: &ClothMaterial) -> Result<ClothMesh, ClothError> {
    if n < 2 || !(size > 0.0) {
        return Err(ClothError::InvalidMesh(format!("patch needs n >= 2 and positive size (n={n}, size={size})")));
    }
    let step = size / (n - 1) as f64;
    let idx = |r: usize, c: usize| r * n + c;
    let mut pos = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in 0..n {
            pos.push(Vec3::new(c as f64 * step - size / 2.0, r as f64 * step - size / 2.0, 0.0));
        }
    }
    let mut tris = Vec::new();
    for r in 0..n - 1 {
        for c in 0..n - 1 {
            // Alternate the diagonal to keep the grid symmetric.
            if (r + c) % 2 == 0 {
                tris.push([idx(r, c), idx(r, c + 1), idx(r + 1, c + 1)]);
                tris.push([idx(r, c), idx(r + 1, c + 1), idx(r + 1, c)]);
            } else {
                tris.push([idx(r, c), idx(r, c + 1), idx(r + 1, c)]);
                tris.push([idx(r, c + 1), idx(r + 1, c + 1), idx(r + 1, c)]);
            }
        }
    }
    let mut mesh = ClothMesh::from_triangles(pos, tris, material)?;
    let mut border: Vec<usize> = (0..n).map(|c| idx(0, c)).collect();
    border.extend((1..n).map(|r| idx(r, n - 1)));
    border.extend((0..n - 1).rev().map(|c| idx(n - 1, c)));
    border.extend((1..n - 1).rev().map(|r| idx(r, 0)));
    mesh.loops.insert("border".into(), border);
    Ok(mesh)
}

/// Rings of vertices along +z; ring `k` has radius `radii[k]` at height `heights[k]`.
fn ring_mesh(radii: &[f64], heights: &[f64], cols: usize, material: &ClothMaterial) -> Result<ClothMesh, ClothError> {
    let rows = radii.len();
    let mut pos = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let a = TAU * c as f64 / cols as f64;
            pos.push(Vec3::new(radii[r] * a.cos(), radii[r] * a.sin(), heights[r]));
        }
    }
    let idx = |r: usize, c: usize| r * cols + c % cols;
    let mut tris = Vec::with_capacity(2 * (rows - 1) * cols);
    for r in 0..rows - 1 {
        for c in 0..cols {
            tris.push([idx(r, c), idx(r, c + 1), idx(r + 1, c + 1)]);
            tris.push([idx(r, c), idx(r + 1, c + 1), idx(r + 1, c)]);
        }
    }
    ClothMesh::from_triangles(pos, tris, material)
}

fn ring(r: usize, cols: usize) -> Vec<usize> {
    (0..cols).map(|c| r * cols + c).collect()
}

/// Open cylinder of `rows` rings by `cols` vertices along local +z from `z = 0` to `length`.
/// Loops `"entry"` (z = 0) and `"exit"` (z = length); `pinned_end_ring` pins the entry ring.
pub fn generate_tube(
    length: f64,
    radius: f64,
    rows: usize,
    cols: usize,
    pinned_end_ring: bool,
    material: &ClothMaterial,
) -> Result<ClothMesh, ClothError> {
    if rows < 3 || cols < 3 {
        return Err(ClothError::InvalidMesh(format!("tube needs rows, cols >= 3 (got {rows}x{cols})")));
    }
    if !(length > 0.0 && radius > 0.0) {
        return Err(ClothError::InvalidMesh("tube length and radius must be positive".into()));
    }
    let heights: Vec<f64> = (0..rows).map(|r| length * r as f64 / (rows - 1) as f64).collect();
    let mut mesh = ring_mesh(&vec![radius; rows], &heights, cols, material)?;
    mesh.loops.insert("entry".into(), ring(0, cols));
    mesh.loops.insert("exit".into(), ring(rows - 1, cols));
    if pinned_end_ring {
        mesh.pin_loop("entry")?;
    }
    Ok(mesh)
}

/// Dimensions of the simplified single-sleeve garment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SleeveSpec {
    pub body_radius: f64,
    pub sleeve_radius: f64,
    pub body_length: f64,
    pub sleeve_length: f64,
    /// Ring counts (each at least 2) and vertices per ring (at least 3).
    pub body_rows: usize,
    pub sleeve_rows: usize,
    pub cols: usize,
}

/// A wide body tube joined at its far ring (`"junction"`) to a narrower coaxial sleeve.
///
/// Loops: `"entry"` (collar, z = 0), `"junction"`, `"cuff"`. The ring after the junction
/// narrows to the sleeve radius, so the join is a short cone. `pinned_loop` names the
/// loop to pin.
pub fn generate_sleeve_garment(spec: &SleeveSpec, pinned_loop: Option<&str>, material: &ClothMaterial) -> Result<ClothMesh, ClothError> {
    let s = spec;
    if s.body_rows < 2 || s.sleeve_rows < 2 || s.cols < 3 {
        return Err(ClothError::InvalidMesh(format!(
            "sleeve garment needs body/sleeve rows >= 2 and cols >= 3 (got {}, {}, {})",
            s.body_rows, s.sleeve_rows, s.cols
        )));
    }
    if !(s.body_radius > 0.0 && s.sleeve_radius > 0.0 && s.body_length > 0.0 && s.sleeve_length > 0.0) {
        return Err(ClothError::InvalidMesh("sleeve garment dimensions must be positive".into()));
    }
    if s.sleeve_radius > s.body_radius {
        return Err(ClothError::InvalidMesh("sleeve radius exceeds body radius".into()));
    }
    let mut radii = Vec::new();
    let mut heights = Vec::new();
    for r in 0..s.body_rows {
        radii.push(s.body_radius);
        heights.push(s.body_length * r as f64 / (s.body_rows - 1) as f64);
    }
    for r in 1..s.sleeve_rows {
        radii.push(s.sleeve_radius);
        heights.push(s.body_length + s.sleeve_length * r as f64 / (s.sleeve_rows - 1) as f64);
    }
    let rows = radii.len();
    let mut mesh = ring_mesh(&radii, &heights, s.cols, material)?;
    mesh.loops.insert("entry".into(), ring(0, s.cols));
    mesh.loops.insert("junction".into(), ring(s.body_rows - 1, s.cols));
    mesh.loops.insert("cuff".into(), ring(rows - 1, s.cols));
    if let Some(name) = pinned_loop {
        mesh.pin_loop(name)?;
    }
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloth::solver::{step_cloth, ClothParams};

    #[test]
    fn tube_counts_and_topology() {
        let m = generate_tube(1.0, 0.1, 3, 3, false, &ClothMaterial::default()).unwrap();
        assert_eq!(m.num_vertices(), 9);
        assert!(m.pinned().is_empty());
        assert_eq!(m.euler_characteristic(), 0);
        let big = generate_tube(1.0, 0.1, 12, 17, true, &ClothMaterial::default()).unwrap();
        assert_eq!(big.euler_characteristic(), 0);
        assert_eq!(big.pinned(), (0..17).collect::<Vec<_>>());
        assert!(big.is_closed_edge_cycle(&big.loops["entry"]));
        assert!(big.is_closed_edge_cycle(&big.loops["exit"]));
    }

    #[test]
    fn rest_lengths_match_geometry() {
        let m = generate_tube(0.8, 0.15, 5, 11, false, &ClothMaterial::default()).unwrap();
        for c in m.stretch.iter().chain(&m.bend) {
            assert_eq!(c.rest, m.positions[c.i].distance(m.positions[c.j]));
        }
    }

    #[test]
    fn degenerate_dims_rejected() {
        let mat = ClothMaterial::default();
        assert!(generate_tube(1.0, 0.1, 2, 8, false, &mat).is_err());
        assert!(generate_tube(1.0, 0.1, 8, 2, false, &mat).is_err());
        assert!(generate_tube(0.0, 0.1, 8, 8, false, &mat).is_err());
        assert!(generate_patch(1.0, 1, &mat).is_err());
    }

    fn sleeve() -> SleeveSpec {
        SleeveSpec {
            body_radius: 0.2,
            sleeve_radius: 0.1,
            body_length: 0.3,
            sleeve_length: 0.5,
            body_rows: 4,
            sleeve_rows: 7,
            cols: 16,
        }
    }

    #[test]
    fn equal_radii_sleeve_is_a_tube() {
        let s = SleeveSpec { sleeve_radius: 0.2, body_length: 0.3, sleeve_length: 0.6, body_rows: 4, sleeve_rows: 7, ..sleeve() };
        let g = generate_sleeve_garment(&s, None, &ClothMaterial::default()).unwrap();
        let t = generate_tube(0.9, 0.2, 10, 16, false, &ClothMaterial::default()).unwrap();
        assert_eq!(g.num_vertices(), t.num_vertices());
        assert_eq!(g.triangles, t.triangles);
        for (a, b) in g.positions.iter().zip(&t.positions) {
            assert!(a.distance(*b) < 1e-12);
        }
    }

    #[test]
    fn sleeve_loops_are_cycles_and_collar_pinned() {
        let g = generate_sleeve_garment(&sleeve(), Some("entry"), &ClothMaterial::default()).unwrap();
        for name in ["entry", "junction", "cuff"] {
            assert!(g.is_closed_edge_cycle(&g.loops[name]), "{name}");
        }
        assert_eq!(g.pinned(), g.loops["entry"]);
        assert_eq!(g.euler_characteristic(), 0);
        assert!(generate_sleeve_garment(&SleeveSpec { cols: 2, ..sleeve() }, None, &ClothMaterial::default()).is_err());
        assert!(generate_sleeve_garment(&sleeve(), Some("nope"), &ClothMaterial::default()).is_err());
    }

    #[test]
    fn sleeve_drape_stays_bounded() {
        let mut g = generate_sleeve_garment(&sleeve(), Some("entry"), &ClothMaterial::default()).unwrap();
        // Hang horizontally from the collar.
        g.transform(|v| Vec3::new(v.z, v.y, -v.x), Vec3::ZERO);
        let p = ClothParams::default();
        for _ in 0..100 {
            step_cloth(&mut g, &p, &[]).unwrap();
        }
        assert!(g.positions.iter().all(|p| p.is_finite()));
        let s = g.max_strain();
        assert!(s < 0.1, "strain {s}");
    }
}
