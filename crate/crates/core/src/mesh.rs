//! Triangle meshes, rigid placement and the OBJ reader.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{triangle_area, Aabb, Vec3};

/// Faces with area at or below this are rejected as degenerate (m²).
pub const DEGENERATE_AREA: f64 = 1e-12;

/// Uniform scale followed by translation: `v' = scale * v + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transform {
    pub scale: f64,
    pub translation: Vec3,
}

impl Default for Transform {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Transform {
    pub const IDENTITY: Transform = Transform {
        scale: 1.0,
        translation: Vec3::new(0.0, 0.0, 0.0),
    };

    pub fn new(scale: f64, translation: Vec3) -> Self {
        Self { scale, translation }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self {
            scale: 1.0,
            translation,
        }
    }

    #[inline]
    pub fn apply(&self, v: &Vec3) -> Vec3 {
        v * self.scale + self.translation
    }

    /// Same scale, translation removed.
    pub fn scale_only(&self) -> Transform {
        Transform {
            scale: self.scale,
            translation: Vec3::zeros(),
        }
    }

    pub fn translated_by(&self, delta: &Vec3) -> Transform {
        Transform {
            scale: self.scale,
            translation: self.translation + delta,
        }
    }
}

/// Indexed triangle mesh. Construction validates indices, finiteness and
/// face area; watertightness is checked separately because rendering does
/// not need it.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[u32; 3]>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> Result<Self> {
        if vertices.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::NonFinite("mesh vertices"));
        }
        let n = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            if let Some(&bad) = f.iter().find(|&&i| i as usize >= n) {
                return Err(Error::InvalidMesh(format!(
                    "face {fi} references vertex {bad} but the mesh has {n} vertices"
                )));
            }
            let [a, b, c] = f.map(|i| vertices[i as usize]);
            if triangle_area(&a, &b, &c) <= DEGENERATE_AREA {
                return Err(Error::InvalidMesh(format!("face {fi} is degenerate")));
            }
        }
        Ok(Self { vertices, faces })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn triangle(&self, face: usize) -> [Vec3; 3] {
        self.faces[face].map(|i| self.vertices[i as usize])
    }

    /// Vertices after applying `transform`, in mesh order.
    pub fn transformed(&self, transform: &Transform) -> Vec<Vec3> {
        self.vertices.iter().map(|v| transform.apply(v)).collect()
    }

    pub fn aabb(&self, transform: &Transform) -> Result<Aabb> {
        compute_aabb(self, transform)
    }

    fn edge_counts(&self) -> HashMap<(u32, u32), u32> {
        let mut counts = HashMap::with_capacity(self.faces.len() * 3 / 2);
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                *counts.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        counts
    }

    /// Number of undirected edges not shared by exactly two faces.
    pub fn open_edge_count(&self) -> usize {
        self.edge_counts().values().filter(|&&c| c != 2).count()
    }

    /// True iff every undirected edge is incident to exactly two faces.
    /// Several closed components in one mesh are fine.
    pub fn is_watertight(&self) -> bool {
        self.open_edge_count() == 0
    }

    pub fn require_watertight(&self) -> Result<()> {
        match self.open_edge_count() {
            0 => Ok(()),
            open_edges => Err(Error::NotWatertight { open_edges }),
        }
    }

    /// V - E + F.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edge_counts().len() as i64 + self.faces.len() as i64
    }

    pub fn load_obj(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_obj(BufReader::new(file)).map_err(|e| match e {
            Error::Io { source, .. } => Error::io(path, source),
            other => other,
        })
    }

    /// Parses `v` and `f` records; polygons are fan-triangulated, other
    /// records are skipped with a warning.
    pub fn read_obj(reader: impl BufRead) -> Result<Self> {
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        let mut face_lines = Vec::new();
        let mut warned: Vec<String> = Vec::new();

        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|e| Error::io("<obj>", e))?;
            let line = line.split('#').next().unwrap_or("").trim();
            let mut tokens = line.split_whitespace();
            let Some(tag) = tokens.next() else {
                continue;
            };
            let obj_err = |message: String| Error::Obj {
                line: line_no,
                message,
            };
            match tag {
                "v" => {
                    let coords: Vec<&str> = tokens.collect();
                    if coords.len() < 3 {
                        return Err(obj_err(format!(
                            "vertex needs 3 coordinates, found {}",
                            coords.len()
                        )));
                    }
                    let mut v = [0.0; 3];
                    for (k, tok) in coords[..3].iter().enumerate() {
                        let c: f64 = tok
                            .parse()
                            .map_err(|_| obj_err(format!("bad coordinate {tok:?}")))?;
                        if !c.is_finite() {
                            return Err(obj_err(format!("non-finite coordinate {tok:?}")));
                        }
                        v[k] = c;
                    }
                    vertices.push(Vec3::new(v[0], v[1], v[2]));
                }
                "f" => {
                    let mut idx = Vec::new();
                    for tok in tokens {
                        let head = tok.split('/').next().unwrap_or("");
                        let raw: i64 = head
                            .parse()
                            .map_err(|_| obj_err(format!("bad face index {tok:?}")))?;
                        let resolved = match raw {
                            0 => {
                                return Err(obj_err(
                                    "face index 0 (OBJ indices are 1-based)".into(),
                                ))
                            }
                            r if r > 0 => r - 1,
                            r => vertices.len() as i64 + r,
                        };
                        if resolved < 0 || resolved >= vertices.len() as i64 {
                            return Err(obj_err(format!(
                                "face index {raw} out of range ({} vertices so far)",
                                vertices.len()
                            )));
                        }
                        idx.push(resolved as u32);
                    }
                    if idx.len() < 3 {
                        return Err(obj_err(format!(
                            "face needs 3 indices, found {}",
                            idx.len()
                        )));
                    }
                    for k in 1..idx.len() - 1 {
                        faces.push([idx[0], idx[k], idx[k + 1]]);
                        face_lines.push(line_no);
                    }
                }
                other => {
                    if !warned.iter().any(|w| w == other) {
                        log::warn!("OBJ line {line_no}: ignoring {other:?} records");
                        warned.push(other.to_string());
                    }
                }
            }
        }

        TriMesh::new(vertices, faces.clone()).map_err(|e| match e {
            Error::InvalidMesh(msg) => {
                // Point the degenerate-face message at its source line.
                let line = msg
                    .strip_prefix("face ")
                    .and_then(|rest| rest.split_whitespace().next())
                    .and_then(|n| n.parse::<usize>().ok())
                    .and_then(|fi| face_lines.get(fi).copied())
                    .unwrap_or(0);
                Error::Obj { line, message: msg }
            }
            other => other,
        })
    }

    /// Writes `v`/`f` records with round-trip float formatting.
    pub fn write_obj(&self, mut out: impl Write) -> std::io::Result<()> {
        for v in &self.vertices {
            writeln!(out, "v {:?} {:?} {:?}", v.x, v.y, v.z)?;
        }
        for f in &self.faces {
            writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
        }
        Ok(())
    }

    pub fn save_obj(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_obj(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }
}

/// Tight bounds of the transformed vertices.
pub fn compute_aabb(mesh: &TriMesh, transform: &Transform) -> Result<Aabb> {
    let pts = mesh.transformed(transform);
    Aabb::from_points(&pts).ok_or_else(|| Error::InvalidMesh("mesh has no vertices".into()))
}
