//! Camera, placed bodies and the scene JSON format.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::mesh::{Transform, TriMesh};

/// Pinhole camera: `u = f x / z + cx`, `v = f y / z + cy`, depth is `z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Camera {
    pub f: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Camera {
    pub fn new(f: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let cam = Self {
            f,
            cx,
            cy,
            width,
            height,
        };
        cam.validate()?;
        Ok(cam)
    }

    /// Camera with the principal point at the image center.
    pub fn centered(f: f64, width: usize, height: usize) -> Result<Self> {
        Self::new(f, width as f64 / 2.0, height as f64 / 2.0, width, height)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScene(m));
        if !(self.f > 0.0 && self.f.is_finite()) {
            return bad(format!("focal length {} must be positive", self.f));
        }
        if self.width == 0 || self.height == 0 {
            return bad("image dimensions must be nonzero".into());
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64) {
            return bad(format!("cx {} outside [0, {})", self.cx, self.width));
        }
        if !(self.cy >= 0.0 && self.cy < self.height as f64) {
            return bad(format!("cy {} outside [0, {})", self.cy, self.height));
        }
        Ok(())
    }

    /// Pixel coordinates of a camera-frame point (`z > 0` assumed).
    #[inline]
    pub fn project(&self, p: &Vec3) -> (f64, f64) {
        (self.f * p.x / p.z + self.cx, self.f * p.y / p.z + self.cy)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }
}

/// One person in the scene: a mesh placed by uniform scale and translation.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyInstance {
    /// Person index, >= 1; 0 means background in instance maps.
    pub id: u32,
    pub mesh: Arc<TriMesh>,
    /// Mesh path as written in the scene file, relative to it.
    pub mesh_path: PathBuf,
    pub translation: Vec3,
    pub scale: f64,
}

impl BodyInstance {
    pub fn new(id: u32, mesh: Arc<TriMesh>, translation: Vec3) -> Self {
        Self {
            id,
            mesh,
            mesh_path: PathBuf::from(format!("body_{id}.obj")),
            translation,
            scale: 1.0,
        }
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn with_mesh_path(mut self, path: impl Into<PathBuf>) -> Self {
        self.mesh_path = path.into();
        self
    }

    pub fn transform(&self) -> Transform {
        Transform::new(self.scale, self.translation)
    }

    pub fn world_vertices(&self) -> Vec<Vec3> {
        self.mesh.transformed(&self.transform())
    }

    /// Mean of the placed vertices.
    pub fn centroid(&self) -> Vec3 {
        let verts = self.world_vertices();
        let sum = verts.iter().fold(Vec3::zeros(), |acc, v| acc + v);
        sum / verts.len().max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub camera: Camera,
    /// Sorted by ascending id.
    bodies: Vec<BodyInstance>,
}

impl Scene {
    pub fn new(camera: Camera, mut bodies: Vec<BodyInstance>) -> Result<Self> {
        camera.validate()?;
        let mut seen = BTreeSet::new();
        for b in &bodies {
            if b.id == 0 {
                return Err(Error::InvalidScene(
                    "body id 0 is reserved for background".into(),
                ));
            }
            if !seen.insert(b.id) {
                return Err(Error::DuplicateId(b.id));
            }
            if !(b.scale > 0.0 && b.scale.is_finite()) {
                return Err(Error::InvalidScene(format!(
                    "body {} has non-positive scale {}",
                    b.id, b.scale
                )));
            }
            if !b.translation.iter().all(|c| c.is_finite()) {
                return Err(Error::NonFinite("body translation"));
            }
        }
        bodies.sort_by_key(|b| b.id);
        Ok(Self { camera, bodies })
    }

    pub fn bodies(&self) -> &[BodyInstance] {
        &self.bodies
    }

    pub fn len(&self) -> usize {
        self.bodies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bodies.is_empty()
    }

    pub fn ids(&self) -> Vec<u32> {
        self.bodies.iter().map(|b| b.id).collect()
    }

    pub fn body(&self, id: u32) -> Option<&BodyInstance> {
        self.bodies
            .binary_search_by_key(&id, |b| b.id)
            .ok()
            .map(|i| &self.bodies[i])
    }

    pub fn translations(&self) -> Vec<Vec3> {
        self.bodies.iter().map(|b| b.translation).collect()
    }

    /// Copy with new translations, given in body order.
    pub fn with_translations(&self, translations: &[Vec3]) -> Result<Scene> {
        assert_eq!(translations.len(), self.bodies.len());
        if translations
            .iter()
            .any(|t| !t.iter().all(|c| c.is_finite()))
        {
            return Err(Error::NonFinite("body translation"));
        }
        let mut out = self.clone();
        for (b, t) in out.bodies.iter_mut().zip(translations) {
            b.translation = *t;
        }
        Ok(out)
    }

    /// Parses scene JSON, resolving mesh paths against `base_dir`.
    pub fn from_json_str(json: &str, base_dir: &Path) -> Result<Scene> {
        let file: SceneFile =
            serde_json::from_str(json).map_err(|e| Error::InvalidScene(e.to_string()))?;
        let mut cache: HashMap<PathBuf, Arc<TriMesh>> = HashMap::new();
        let mut bodies = Vec::with_capacity(file.bodies.len());
        for b in file.bodies {
            let resolved = base_dir.join(&b.mesh);
            let mesh = match cache.get(&resolved) {
                Some(m) => m.clone(),
                None => {
                    if !resolved.is_file() {
                        return Err(Error::MissingMesh(resolved));
                    }
                    let m = Arc::new(TriMesh::load_obj(&resolved)?);
                    cache.insert(resolved, m.clone());
                    m
                }
            };
            bodies.push(BodyInstance {
                id: b.id,
                mesh,
                mesh_path: b.mesh,
                translation: Vec3::from(b.translation),
                scale: b.scale,
            });
        }
        Scene::new(file.camera, bodies)
    }

    pub fn to_json_string(&self) -> String {
        let file = SceneFile {
            camera: self.camera,
            bodies: self
                .bodies
                .iter()
                .map(|b| BodyRecord {
                    id: b.id,
                    mesh: b.mesh_path.clone(),
                    translation: b.translation.into(),
                    scale: b.scale,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("scene serializes")
    }
}

/// Loads a scene file; mesh paths are relative to the file's directory.
pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    Scene::from_json_str(&text, base)
}

/// Writes the scene JSON. Mesh files are not written.
pub fn save_scene(scene: &Scene, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, scene.to_json_string() + "\n").map_err(|e| Error::io(path, e))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    camera: Camera,
    bodies: Vec<BodyRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BodyRecord {
    id: u32,
    mesh: PathBuf,
    translation: [f64; 3],
    #[serde(default = "unit_scale")]
    scale: f64,
}

fn unit_scale() -> f64 {
    1.0
}
