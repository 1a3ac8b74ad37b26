//! Pairwise interpenetration penalties and the robustified scene loss.
//!
//! For an ordered pair `(i, j)` the penalty `P_ij` sums body `i`'s clamped
//! distance field over body `j`'s placed vertices. The scene loss applies a
//! Geman-McClure kernel to each body's total penalty `sum_i P_ij` and sums
//! over bodies.
//!
//! Fields are built in each body's own frame (scale applied, translation
//! not), so a translation only changes where the other bodies' vertices land
//! in the field. That makes the derivative with respect to a field owner's
//! translation the negated derivative with respect to the sample points.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Vec3};
use crate::mesh::{Transform, TriMesh};
use crate::parallel;
use crate::scene::Scene;
use crate::sdf::{self, DistanceField};

/// Scale of the Geman-McClure kernel, in units of summed penetration depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustifierConfig {
    pub sigma: f64,
}

/// Geman-McClure scale used when none is configured.
pub const DEFAULT_SIGMA: f64 = 0.5;

impl Default for RobustifierConfig {
    fn default() -> Self {
        Self {
            sigma: DEFAULT_SIGMA,
        }
    }
}

impl RobustifierConfig {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "sigma {sigma} must be positive"
            )));
        }
        Ok(Self { sigma })
    }

    pub fn rho(&self, x: f64) -> f64 {
        geman_mcclure(x, self.sigma)
    }

    pub fn rho_prime(&self, x: f64) -> f64 {
        geman_mcclure_derivative(x, self.sigma)
    }
}

/// `sigma^2 x^2 / (x^2 + sigma^2)`: quadratic near zero, saturating at `sigma^2`.
pub fn geman_mcclure(x: f64, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    let x2 = x * x;
    if x2.is_infinite() {
        return s2;
    }
    s2 * x2 / (x2 + s2)
}

/// `2 sigma^4 x / (x^2 + sigma^2)^2`.
pub fn geman_mcclure_derivative(x: f64, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    let denom = x * x + s2;
    if denom.is_infinite() {
        return 0.0;
    }
    2.0 * s2 * s2 * x / (denom * denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenetrationConfig {
    pub resolution: usize,
    pub padding: f64,
    pub robustifier: RobustifierConfig,
}

impl Default for PenetrationConfig {
    fn default() -> Self {
        Self {
            resolution: sdf::DEFAULT_RESOLUTION,
            padding: sdf::DEFAULT_PADDING,
            robustifier: RobustifierConfig::default(),
        }
    }
}

/// `P_ij` and its per-vertex gradient for body `j`'s mesh placed by
/// `transform_j` inside `field_i`. The field itself is held constant.
pub fn pair_penalty(
    field_i: &DistanceField,
    mesh_j: &TriMesh,
    transform_j: &Transform,
) -> Result<(f64, Vec<Vec3>)> {
    let mut total = 0.0;
    let mut grads = Vec::with_capacity(mesh_j.vertices().len());
    for v in mesh_j.vertices() {
        let (phi, g) = field_i.sample_with_grad(&transform_j.apply(v))?;
        total += phi;
        grads.push(g);
    }
    Ok((total, grads))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenetrationReport {
    /// `(i, j) -> P_ij`: body `j`'s vertices inside body `i`'s field.
    /// Ordered pairs rejected by the broad phase are omitted (their penalty is 0).
    pub pair_penalties: BTreeMap<(u32, u32), f64>,
    /// Robustified scene loss.
    pub loss: f64,
    /// Unordered pairs `(lo, hi)` with `P_lo,hi > 0` or `P_hi,lo > 0`.
    pub colliding_pairs: BTreeSet<(u32, u32)>,
    /// d loss / d translation per body id.
    pub per_body_gradients: BTreeMap<u32, Vec3>,
    /// Number of distance fields voxelized.
    pub fields_built: usize,
}

impl PenetrationReport {
    pub fn penalty(&self, i: u32, j: u32) -> f64 {
        self.pair_penalties.get(&(i, j)).copied().unwrap_or(0.0)
    }

    pub fn collision_count(&self) -> usize {
        self.colliding_pairs.len()
    }

    pub fn gradient(&self, id: u32) -> Vec3 {
        self.per_body_gradients
            .get(&id)
            .copied()
            .unwrap_or_else(Vec3::zeros)
    }
}

/// Distance fields for the bodies of a scene that can collide, built once
/// and evaluable at arbitrary translations.
///
/// [`scene_penetration`] builds a fresh model on every call; keeping one
/// around freezes the fields and the broad-phase pair list, which is what a
/// finite-difference check of the gradient needs.
pub struct PenetrationModel {
    ids: Vec<u32>,
    meshes: Vec<Arc<TriMesh>>,
    scales: Vec<f64>,
    /// Field in the owner's frame, `None` when no pair needs it.
    fields: Vec<Option<Arc<DistanceField>>>,
    /// Ordered `(field owner, vertex owner)` body indices, ascending.
    pairs: Vec<(usize, usize)>,
    robustifier: RobustifierConfig,
}

/// Body-frame fields kept across evaluations of the same bodies.
///
/// A field depends only on the mesh, the scale and the grid settings, never
/// on the translation, so a cached field is bit-identical to a rebuilt one.
#[derive(Default)]
pub struct FieldCache {
    entries: BTreeMap<u32, CachedField>,
}

struct CachedField {
    mesh: Arc<TriMesh>,
    scale: f64,
    resolution: usize,
    padding: f64,
    field: Arc<DistanceField>,
}

impl FieldCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn get(
        &self,
        body: &crate::scene::BodyInstance,
        config: &PenetrationConfig,
    ) -> Option<Arc<DistanceField>> {
        let e = self.entries.get(&body.id)?;
        let same = Arc::ptr_eq(&e.mesh, &body.mesh)
            && e.scale.to_bits() == body.scale.to_bits()
            && e.resolution == config.resolution
            && e.padding.to_bits() == config.padding.to_bits();
        same.then(|| e.field.clone())
    }
}

impl PenetrationModel {
    pub fn build(scene: &Scene, config: &PenetrationConfig) -> Result<Self> {
        Self::build_cached(scene, config, &mut FieldCache::new())
    }

    /// Like [`build`](Self::build), reusing and filling `cache`.
    pub fn build_cached(
        scene: &Scene,
        config: &PenetrationConfig,
        cache: &mut FieldCache,
    ) -> Result<Self> {
        let bodies = scene.bodies();
        let n = bodies.len();
        let tight: Vec<Aabb> = bodies
            .iter()
            .map(|b| b.mesh.aabb(&b.transform()))
            .collect::<Result<_>>()?;
        let padded: Vec<Aabb> = bodies
            .iter()
            .map(|b| sdf::padded_bounds(&b.mesh, &b.transform(), config.resolution, config.padding))
            .collect::<Result<_>>()?;

        let mut pairs = Vec::new();
        for (i, field_box) in padded.iter().enumerate() {
            for (j, body_box) in tight.iter().enumerate() {
                if i != j && field_box.overlaps(body_box) {
                    pairs.push((i, j));
                }
            }
        }

        let mut needs_field = vec![false; n];
        let mut participates = vec![false; n];
        for &(i, j) in &pairs {
            needs_field[i] = true;
            participates[i] = true;
            participates[j] = true;
        }
        for (b, _) in bodies.iter().zip(&participates).filter(|(_, &p)| p) {
            b.mesh.require_watertight()?;
        }

        let mut fields: Vec<Option<Arc<DistanceField>>> = vec![None; n];
        let mut to_build = Vec::new();
        for i in (0..n).filter(|&i| needs_field[i]) {
            match cache.get(&bodies[i], config) {
                Some(f) => fields[i] = Some(f),
                None => to_build.push(i),
            }
        }
        let built = parallel::map_slice(&to_build, |&i| {
            let b = &bodies[i];
            sdf::voxelize_phi(
                &b.mesh,
                &b.transform().scale_only(),
                config.resolution,
                config.padding,
            )
        });
        for (i, f) in to_build.into_iter().zip(built) {
            let field = Arc::new(f?);
            let b = &bodies[i];
            cache.entries.insert(
                b.id,
                CachedField {
                    mesh: b.mesh.clone(),
                    scale: b.scale,
                    resolution: config.resolution,
                    padding: config.padding,
                    field: field.clone(),
                },
            );
            fields[i] = Some(field);
        }

        Ok(Self {
            ids: bodies.iter().map(|b| b.id).collect(),
            meshes: bodies.iter().map(|b| b.mesh.clone()).collect(),
            scales: bodies.iter().map(|b| b.scale).collect(),
            fields,
            pairs,
            robustifier: config.robustifier,
        })
    }

    pub fn fields_built(&self) -> usize {
        self.fields.iter().filter(|f| f.is_some()).count()
    }

    /// Ordered candidate pairs as body ids.
    pub fn candidate_pairs(&self) -> Vec<(u32, u32)> {
        self.pairs
            .iter()
            .map(|&(i, j)| (self.ids[i], self.ids[j]))
            .collect()
    }

    /// Field of body `id` in its own frame, if one was built.
    pub fn local_field(&self, id: u32) -> Option<&DistanceField> {
        let i = self.ids.iter().position(|&x| x == id)?;
        self.fields[i].as_deref()
    }

    /// Loss, penalties and gradients with the bodies at `translations`
    /// (body order) and the fields and pair list held fixed.
    pub fn evaluate(&self, translations: &[Vec3]) -> Result<PenetrationReport> {
        let n = self.ids.len();
        assert_eq!(translations.len(), n, "one translation per body");

        let per_pair = parallel::map_slice(&self.pairs, |&(i, j)| {
            let field = self.fields[i].as_ref().expect("field built for pair owner");
            let relative = Transform::new(self.scales[j], translations[j] - translations[i]);
            let (penalty, grads) = pair_penalty(field, &self.meshes[j], &relative)?;
            let summed = grads.iter().fold(Vec3::zeros(), |acc, g| acc + g);
            Ok::<_, Error>((penalty, summed))
        });
        let per_pair: Vec<(f64, Vec3)> = per_pair.into_iter().collect::<Result<_>>()?;

        let mut totals = vec![0.0; n];
        for (&(_, j), (penalty, _)) in self.pairs.iter().zip(&per_pair) {
            totals[j] += penalty;
        }
        let loss = totals.iter().map(|&s| self.robustifier.rho(s)).sum();
        let weights: Vec<f64> = totals
            .iter()
            .map(|&s| self.robustifier.rho_prime(s))
            .collect();

        let mut grads = vec![Vec3::zeros(); n];
        let mut report = PenetrationReport {
            pair_penalties: BTreeMap::new(),
            loss,
            colliding_pairs: BTreeSet::new(),
            per_body_gradients: BTreeMap::new(),
            fields_built: self.fields_built(),
        };
        for (&(i, j), (penalty, summed)) in self.pairs.iter().zip(&per_pair) {
            let (id_i, id_j) = (self.ids[i], self.ids[j]);
            report.pair_penalties.insert((id_i, id_j), *penalty);
            if *penalty > 0.0 {
                report
                    .colliding_pairs
                    .insert((id_i.min(id_j), id_i.max(id_j)));
            }
            let g = summed * weights[j];
            grads[j] += g;
            grads[i] -= g;
        }
        report.per_body_gradients = self.ids.iter().copied().zip(grads).collect();
        Ok(report)
    }
}

/// Robustified interpenetration loss of a scene with gradients for every
/// body's translation. Only bodies whose padded field box overlaps another
/// body get voxelized.
pub fn scene_penetration(scene: &Scene, config: &PenetrationConfig) -> Result<PenetrationReport> {
    PenetrationModel::build(scene, config)?.evaluate(&scene.translations())
}

/// [`scene_penetration`] with fields taken from, and added to, `cache`.
pub fn scene_penetration_cached(
    scene: &Scene,
    config: &PenetrationConfig,
    cache: &mut FieldCache,
) -> Result<PenetrationReport> {
    PenetrationModel::build_cached(scene, config, cache)?.evaluate(&scene.translations())
}
