//! Wavefront OBJ export/import plus a plain-text sidecar:
//!
//! ```text
//! pinned 0 1 2 ...
//! loop entry 0 1 2 ...
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::mesh::{ClothMaterial, ClothMesh};
use crate::error::ClothError;
use crate::geom::Vec3;

pub fn to_obj(mesh: &ClothMesh) -> String {
    let mut s = String::new();
    for p in &mesh.positions {
        let _ = writeln!(s, "v {} {} {}", p.x, p.y, p.z);
    }
    for t in &mesh.triangles {
        let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    s
}

pub fn to_sidecar(mesh: &ClothMesh) -> String {
    let join = |v: &[usize]| v.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ");
    let mut s = format!("pinned {}\n", join(&mesh.pinned())).replace("pinned \n", "pinned\n");
    for (name, lp) in &mesh.loops {
        let _ = writeln!(s, "loop {name} {}", join(lp));
    }
    s
}

/// Sidecar path next to an OBJ file (`mesh.obj` -> `mesh.loops`).
pub fn sidecar_path(obj: &Path) -> PathBuf {
    obj.with_extension("loops")
}

pub fn write_mesh(mesh: &ClothMesh, obj: &Path) -> Result<(), ClothError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| ClothError::Io { path, source }
    };
    fs::write(obj, to_obj(mesh)).map_err(io(obj))?;
    let side = sidecar_path(obj);
    fs::write(&side, to_sidecar(mesh)).map_err(io(&side))
}

fn fmt_err(path: &Path, line: usize, detail: impl Into<String>) -> ClothError {
    ClothError::Format { path: path.to_path_buf(), detail: format!("line {line}: {}", detail.into()) }
}

/// Parses OBJ text (`v` and triangular `f` records; other records ignored).
pub fn parse_obj(text: &str, path: &Path, material: &ClothMaterial) -> Result<ClothMesh, ClothError> {
    let mut pos = Vec::new();
    let mut tris = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let c: Result<Vec<f64>, _> = it.take(3).map(str::parse).collect();
                match c {
                    Ok(c) if c.len() == 3 => pos.push(Vec3::new(c[0], c[1], c[2])),
                    _ => return Err(fmt_err(path, ln + 1, "bad vertex")),
                }
            }
            Some("f") => {
                let idx: Result<Vec<usize>, _> =
                    it.map(|tok| tok.split('/').next().unwrap_or("").parse::<usize>()).collect();
                match idx {
                    Ok(i) if i.len() == 3 && i.iter().all(|&k| k >= 1) => tris.push([i[0] - 1, i[1] - 1, i[2] - 1]),
                    _ => return Err(fmt_err(path, ln + 1, "expected a triangle with 1-based indices")),
                }
            }
            _ => {}
        }
    }
    ClothMesh::from_triangles(pos, tris, material)
}

/// Applies sidecar pins and loops to `mesh`.
pub fn apply_sidecar(mesh: &mut ClothMesh, text: &str, path: &Path) -> Result<(), ClothError> {
    let n = mesh.num_vertices();
    for (ln, line) in text.lines().enumerate() {
        let mut it = line.split_whitespace();
        let kind = match it.next() {
            Some(k) => k,
            None => continue,
        };
        let (name, rest): (Option<String>, Vec<&str>) = match kind {
            "pinned" => (None, it.collect()),
            "loop" => (it.next().map(str::to_string), it.collect()),
            k if k.starts_with('#') => continue,
            k => return Err(fmt_err(path, ln + 1, format!("unknown record {k}"))),
        };
        let idx: Vec<usize> = rest
            .iter()
            .map(|s| s.parse::<usize>().ok().filter(|&i| i < n))
            .collect::<Option<_>>()
            .ok_or_else(|| fmt_err(path, ln + 1, "vertex index invalid or out of range"))?;
        match name {
            None if kind == "pinned" => idx.iter().for_each(|&i| mesh.pin(i)),
            Some(name) => {
                mesh.loops.insert(name, idx);
            }
            None => return Err(fmt_err(path, ln + 1, "loop needs a name")),
        }
    }
    Ok(())
}

pub fn read_mesh(obj: &Path, material: &ClothMaterial) -> Result<ClothMesh, ClothError> {
    let text = fs::read_to_string(obj).map_err(|source| ClothError::Io { path: obj.to_path_buf(), source })?;
    let mut mesh = parse_obj(&text, obj, material)?;
    let side = sidecar_path(obj);
    if side.exists() {
        let s = fs::read_to_string(&side).map_err(|source| ClothError::Io { path: side.clone(), source })?;
        apply_sidecar(&mut mesh, &s, &side)?;
    }
    Ok(mesh)
}
