//! Deterministic pinhole rasterizer and the ordinal depth loss.
//!
//! Each body is rendered on its own into a depth map (no occlusion between
//! bodies), and the scene instance map is the per-pixel argmin over those
//! maps with ties going to the lower id. Coverage is decided at pixel
//! centers with a top-left fill rule, depth is interpolated perspective-
//! correctly, and both triangle orientations are drawn.
//!
//! Work is split into fixed bands of rows. Faces are binned into bands once
//! and every band owns its slice of the depth buffer, so the cost is
//! `O(F + wh)` per body and the output does not depend on the worker count.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::image::{DepthMap, InstanceMap};
use crate::parallel;
use crate::scene::{BodyInstance, Camera, Scene};

/// Vertices must lie strictly beyond this depth (m).
pub const Z_NEAR: f64 = 1e-4;

/// Rows per raster band.
const BAND_ROWS: usize = 16;

/// Reference depths closer than this (m) make a pair incomparable.
pub const DEPTH_TIE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct RenderOutput {
    /// Rendered person index per pixel.
    pub instance: InstanceMap,
    /// Independent, occlusion-free depth map of every body.
    pub depths: BTreeMap<u32, DepthMap>,
    /// Nearest depth over all bodies.
    pub scene_depth: DepthMap,
}

pub fn render(scene: &Scene) -> Result<RenderOutput> {
    let cam = &scene.camera;
    cam.validate()?;
    let (w, h) = cam.dims();

    let mut depths = BTreeMap::new();
    for body in scene.bodies() {
        depths.insert(body.id, render_body(cam, body)?);
    }

    let maps: Vec<(u32, &DepthMap)> = depths.iter().map(|(&id, d)| (id, d)).collect();
    let mut instance = InstanceMap::new(w, h);
    let mut scene_depth = vec![f64::INFINITY; w * h];
    {
        let ids = instance.data_mut();
        let mut rows: Vec<(&mut [u32], &mut [f64])> = ids
            .chunks_mut(w * BAND_ROWS)
            .zip(scene_depth.chunks_mut(w * BAND_ROWS))
            .collect();
        let compose = |band: usize, (ids, zs): &mut (&mut [u32], &mut [f64])| {
            let offset = band * w * BAND_ROWS;
            for (k, (id_out, z_out)) in ids.iter_mut().zip(zs.iter_mut()).enumerate() {
                // ascending id, strict comparison: lower id wins ties
                for &(id, map) in &maps {
                    let d = map.raw()[offset + k];
                    if d < *z_out {
                        *z_out = d;
                        *id_out = id;
                    }
                }
            }
        };
        parallel::for_each_chunk_mut(&mut rows, 1, |band, chunk| compose(band, &mut chunk[0]));
    }

    Ok(RenderOutput {
        instance,
        depths,
        scene_depth: DepthMap::from_raw(w, h, scene_depth),
    })
}

struct ScreenVertex {
    x: f64,
    y: f64,
    inv_z: f64,
}

/// Renders one body's depth map, ignoring all other bodies.
pub fn render_body(camera: &Camera, body: &BodyInstance) -> Result<DepthMap> {
    let (w, h) = camera.dims();
    let world = body.world_vertices();
    if let Some(v) = world.iter().find(|v| v.z.is_nan() || v.z <= Z_NEAR) {
        return Err(Error::BehindCamera {
            body: body.id,
            z: v.z,
        });
    }
    let screen: Vec<ScreenVertex> = world
        .iter()
        .map(|p: &Vec3| {
            let (x, y) = camera.project(p);
            ScreenVertex {
                x,
                y,
                inv_z: 1.0 / p.z,
            }
        })
        .collect();

    let faces = body.mesh.faces();
    let bands = h.div_ceil(BAND_ROWS);

    // Pixel-center bounding rectangle per face; faces covering no center are dropped.
    let rects: Vec<Option<[usize; 4]>> = faces
        .iter()
        .map(|f| {
            let [a, b, c] = f.map(|i| &screen[i as usize]);
            let x0 = (a.x.min(b.x).min(c.x) - 0.5).ceil().max(0.0);
            let x1 = (a.x.max(b.x).max(c.x) - 0.5).floor().min((w - 1) as f64);
            let y0 = (a.y.min(b.y).min(c.y) - 0.5).ceil().max(0.0);
            let y1 = (a.y.max(b.y).max(c.y) - 0.5).floor().min((h - 1) as f64);
            (x0 <= x1 && y0 <= y1).then_some([x0 as usize, x1 as usize, y0 as usize, y1 as usize])
        })
        .collect();

    let mut offsets = vec![0u32; bands + 1];
    for r in rects.iter().flatten() {
        for band in r[2] / BAND_ROWS..=r[3] / BAND_ROWS {
            offsets[band + 1] += 1;
        }
    }
    for b in 0..bands {
        offsets[b + 1] += offsets[b];
    }
    let mut fill = offsets.clone();
    let mut binned = vec![0u32; offsets[bands] as usize];
    for (fi, r) in rects.iter().enumerate() {
        if let Some(r) = r {
            for band in r[2] / BAND_ROWS..=r[3] / BAND_ROWS {
                binned[fill[band] as usize] = fi as u32;
                fill[band] += 1;
            }
        }
    }

    let mut depth = vec![f64::INFINITY; w * h];
    parallel::for_each_chunk_mut(&mut depth, w * BAND_ROWS, |band, buf| {
        let row0 = band * BAND_ROWS;
        let row1 = (row0 + BAND_ROWS).min(h) - 1;
        for &fi in &binned[offsets[band] as usize..offsets[band + 1] as usize] {
            let fi = fi as usize;
            let r = rects[fi].expect("binned faces have rectangles");
            let [a, b, c] = faces[fi].map(|i| &screen[i as usize]);
            rasterize(
                a,
                b,
                c,
                [r[0], r[1], r[2].max(row0), r[3].min(row1)],
                row0,
                w,
                buf,
            );
        }
    });
    Ok(DepthMap::from_raw(w, h, depth))
}

#[inline]
fn edge(ax: f64, ay: f64, bx: f64, by: f64, px: f64, py: f64) -> f64 {
    (bx - ax) * (py - ay) - (by - ay) * (px - ax)
}

/// Edge function evaluated from the lexicographically smaller endpoint, so
/// the two triangles sharing an edge get exactly opposite values.
#[inline]
fn shared_edge(a: &ScreenVertex, b: &ScreenVertex, px: f64, py: f64) -> f64 {
    if (a.x, a.y) <= (b.x, b.y) {
        edge(a.x, a.y, b.x, b.y, px, py)
    } else {
        -edge(b.x, b.y, a.x, a.y, px, py)
    }
}

/// Whether pixels exactly on edge `a -> b` belong to the triangle: top edges
/// (horizontal, interior below) and left edges (pointing up on screen).
#[inline]
fn owns_edge(ax: f64, ay: f64, bx: f64, by: f64) -> bool {
    let dy = by - ay;
    dy < 0.0 || (dy == 0.0 && bx - ax > 0.0)
}

#[inline]
fn inside(e: f64, owned: bool) -> bool {
    e > 0.0 || (e == 0.0 && owned)
}

fn rasterize(
    a: &ScreenVertex,
    b: &ScreenVertex,
    c: &ScreenVertex,
    [x0, x1, y0, y1]: [usize; 4],
    row0: usize,
    width: usize,
    buf: &mut [f64],
) {
    let area = edge(a.x, a.y, b.x, b.y, c.x, c.y);
    if area == 0.0 || !area.is_finite() {
        return;
    }
    // Draw both orientations by flipping to positive area.
    let (b, c) = if area > 0.0 { (b, c) } else { (c, b) };
    let area = area.abs();
    let own_ab = owns_edge(a.x, a.y, b.x, b.y);
    let own_bc = owns_edge(b.x, b.y, c.x, c.y);
    let own_ca = owns_edge(c.x, c.y, a.x, a.y);
    let (dz1, dz2) = (b.inv_z - a.inv_z, c.inv_z - a.inv_z);

    for y in y0..=y1 {
        let py = y as f64 + 0.5;
        let row = &mut buf[(y - row0) * width..(y - row0 + 1) * width];
        for (x, slot) in row.iter_mut().enumerate().take(x1 + 1).skip(x0) {
            let px = x as f64 + 0.5;
            let e_bc = shared_edge(b, c, px, py);
            if !inside(e_bc, own_bc) {
                continue;
            }
            let e_ca = shared_edge(c, a, px, py);
            if !inside(e_ca, own_ca) {
                continue;
            }
            let e_ab = shared_edge(a, b, px, py);
            if !inside(e_ab, own_ab) {
                continue;
            }
            // Barycentric weights of b and c; 1/z is affine in screen space.
            let (l1, l2) = (e_ca / area, e_ab / area);
            let z = 1.0 / (a.inv_z + l1 * dz1 + l2 * dz2);
            if z < *slot {
                *slot = z;
            }
        }
    }
}

/// One pixel of the disagreement set: both maps foreground, different ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Disagreement {
    /// Row-major pixel index.
    pub pixel: usize,
    /// Annotated id `y(p)`.
    pub truth: u32,
    /// Rendered id `y_hat(p)`.
    pub rendered: u32,
}

/// Disagreement pixels in row-major order. Pixels whose annotated body does
/// not cover them in its own depth map are split off as skipped.
pub fn disagreements(
    render: &RenderOutput,
    ground_truth: &InstanceMap,
) -> Result<(Vec<Disagreement>, usize)> {
    if render.instance.dims() != ground_truth.dims() {
        return Err(Error::DimensionMismatch {
            expected: render.instance.dims(),
            found: ground_truth.dims(),
        });
    }
    let mut set = Vec::new();
    let mut skipped = 0;
    for (pixel, (&truth, &rendered)) in ground_truth
        .data()
        .iter()
        .zip(render.instance.data())
        .enumerate()
    {
        if truth == 0 || rendered == 0 || truth == rendered {
            continue;
        }
        let covered = render
            .depths
            .get(&truth)
            .is_some_and(|d| d.depth_at(pixel).is_some());
        if covered {
            set.push(Disagreement {
                pixel,
                truth,
                rendered,
            });
        } else {
            skipped += 1;
        }
    }
    Ok((set, skipped))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrdinalDepthReport {
    pub loss: f64,
    pub disagreement_pixels: usize,
    pub skipped_pixels: usize,
    /// d loss / d (z translation) per body id, under fixed coverage.
    pub per_body_depth_gradients: BTreeMap<u32, f64>,
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Sum over disagreement pixels of `softplus(D_truth(p) - D_rendered(p))`.
///
/// A rigid z-translation shifts a body's depths one-for-one, so each pixel
/// adds `logistic(gap)` to the annotated body's z-gradient and subtracts it
/// from the rendered body's.
pub fn ordinal_depth_loss(
    render: &RenderOutput,
    ground_truth: &InstanceMap,
) -> Result<OrdinalDepthReport> {
    let (set, skipped) = disagreements(render, ground_truth)?;
    let mut grads: BTreeMap<u32, f64> = render.depths.keys().map(|&id| (id, 0.0)).collect();
    let mut loss = 0.0;
    for d in &set {
        let front = render.depths[&d.truth].depth_at(d.pixel).expect("covered");
        let shown = render.depths[&d.rendered]
            .depth_at(d.pixel)
            .expect("rendered");
        let gap = front - shown;
        loss += softplus(gap);
        let s = logistic(gap);
        *grads.get_mut(&d.truth).expect("body rendered") += s;
        *grads.get_mut(&d.rendered).expect("body rendered") -= s;
    }
    Ok(OrdinalDepthReport {
        loss,
        disagreement_pixels: set.len(),
        skipped_pixels: skipped,
        per_body_depth_gradients: grads,
    })
}

/// Reference ordering for [`depth_order_accuracy`].
#[derive(Debug, Clone)]
pub enum DepthReference<'a> {
    /// Representative depths taken from another placement of the same bodies.
    Scene(&'a Scene),
    /// Body ids from nearest to farthest.
    Ordering(Vec<u32>),
    /// Explicit `(nearer, farther)` relations; only these pairs are scored.
    Pairs(Vec<(u32, u32)>),
}

/// Correct and comparable pair counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OrderingScore {
    pub correct: usize,
    pub comparable: usize,
}

impl OrderingScore {
    /// Fraction of comparable pairs ordered correctly; 1 when none are comparable.
    pub fn fraction(&self) -> f64 {
        if self.comparable == 0 {
            1.0
        } else {
            self.correct as f64 / self.comparable as f64
        }
    }
}

/// Scores the pairwise near/far relations of `scene`, using each body's
/// centroid depth, against `reference`.
pub fn depth_order_accuracy(
    scene: &Scene,
    reference: &DepthReference<'_>,
) -> Result<OrderingScore> {
    let depth: BTreeMap<u32, f64> = scene
        .bodies()
        .iter()
        .map(|b| (b.id, b.centroid().z))
        .collect();
    let lookup = |id: u32| depth.get(&id).copied().ok_or(Error::UnknownId(id));

    let relations: Vec<(u32, u32)> = match reference {
        DepthReference::Scene(other) => {
            if other.ids() != scene.ids() {
                return Err(Error::InvalidConfig(format!(
                    "body ids differ: {:?} vs {:?}",
                    scene.ids(),
                    other.ids()
                )));
            }
            let bodies = other.bodies();
            let zs: Vec<f64> = bodies.iter().map(|b| b.centroid().z).collect();
            let mut rel = Vec::new();
            for a in 0..bodies.len() {
                for b in a + 1..bodies.len() {
                    let diff = zs[a] - zs[b];
                    if diff.abs() < DEPTH_TIE_TOLERANCE {
                        continue;
                    }
                    rel.push(if diff < 0.0 {
                        (bodies[a].id, bodies[b].id)
                    } else {
                        (bodies[b].id, bodies[a].id)
                    });
                }
            }
            rel
        }
        DepthReference::Ordering(order) => {
            let mut sorted = order.clone();
            sorted.sort_unstable();
            if sorted != scene.ids() {
                return Err(Error::InvalidConfig(format!(
                    "ordering {order:?} is not a permutation of the scene ids {:?}",
                    scene.ids()
                )));
            }
            let mut rel = Vec::new();
            for a in 0..order.len() {
                for b in a + 1..order.len() {
                    rel.push((order[a], order[b]));
                }
            }
            rel
        }
        DepthReference::Pairs(pairs) => pairs.clone(),
    };

    let mut score = OrderingScore::default();
    for (near, far) in relations {
        let (zn, zf) = (lookup(near)?, lookup(far)?);
        score.comparable += 1;
        if zn < zf {
            score.correct += 1;
        }
    }
    Ok(score)
}
