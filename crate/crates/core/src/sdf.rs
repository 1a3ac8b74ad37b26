//! Clamped signed distance fields on dense grids.
//!
//! A [`DistanceField`] stores `phi = max(0, -sdf)` at the nodes of an
//! `N x N x N` lattice spanning a padded bounding box of one body: the depth
//! below the surface inside the body, zero everywhere else. Sampling is
//! trilinear between nodes and zero outside the lattice.
//!
//! Node values are exact distances evaluated at the node positions, with the
//! inside/outside decision taken by ray parity along the three grid axes
//! (majority vote).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::bvh::TriangleBvh;
use crate::error::{Error, Result};
use crate::geometry::{Aabb, Vec3};
use crate::mesh::{compute_aabb, Transform, TriMesh};
use crate::parallel;

pub const DEFAULT_RESOLUTION: usize = 32;
pub const DEFAULT_PADDING: f64 = 0.1;
/// Minimum padding per axis (m), so flat boxes still get a zero shell.
pub const MIN_AXIS_PADDING: f64 = 1e-4;

/// Lattice coordinates closer than this (in cells) to a node snap onto it.
const NODE_SNAP: f64 = 1e-9;

const PHIF_MAGIC: &[u8; 4] = b"PHIF";
const PHIF_VERSION: u32 = 1;
pub const PHIF_HEADER_LEN: usize = 4 + 4 + 4 + 24 + 24;

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    origin: Vec3,
    spacing: Vec3,
    resolution: usize,
    /// x fastest, then y, then z.
    values: Vec<f64>,
}

impl DistanceField {
    pub fn from_parts(
        origin: Vec3,
        spacing: Vec3,
        resolution: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        if resolution < 2 {
            return Err(Error::InvalidConfig(format!("resolution {resolution} < 2")));
        }
        if values.len() != resolution.pow(3) {
            return Err(Error::InvalidConfig(format!(
                "{} values for a {resolution}^3 grid",
                values.len()
            )));
        }
        if !origin.iter().chain(spacing.iter()).all(|c| c.is_finite()) {
            return Err(Error::NonFinite("field origin/spacing"));
        }
        if spacing.iter().any(|&s| s <= 0.0) {
            return Err(Error::InvalidConfig(
                "field spacing must be positive".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field values"));
        }
        if values.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidConfig(
                "field values must be non-negative".into(),
            ));
        }
        Ok(Self {
            origin,
            spacing,
            resolution,
            values,
        })
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn spacing(&self) -> Vec3 {
        self.spacing
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.resolution + j) * self.resolution + i
    }

    #[inline]
    pub fn value(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.index(i, j, k)]
    }

    pub fn node_position(&self, i: usize, j: usize, k: usize) -> Vec3 {
        node_position(&self.origin, &self.spacing, i, j, k)
    }

    /// Box spanned by the lattice nodes.
    pub fn bounds(&self) -> Aabb {
        let last = (self.resolution - 1) as f64;
        Aabb::new(self.origin, self.origin + self.spacing * last)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Same values with the origin shifted by `delta`.
    pub fn translated(&self, delta: &Vec3) -> Self {
        Self {
            origin: self.origin + delta,
            ..self.clone()
        }
    }

    /// Cell index and in-cell fractions per axis; `None` outside the lattice.
    #[inline]
    fn locate(&self, p: &Vec3) -> Option<([usize; 3], [f64; 3])> {
        let last = (self.resolution - 1) as f64;
        let mut cell = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            let mut u = (p[a] - self.origin[a]) / self.spacing[a];
            if !(u >= 0.0 && u <= last) {
                return None;
            }
            let r = u.round();
            if (u - r).abs() <= NODE_SNAP {
                u = r;
            }
            // Half-open cells [x_k, x_k+1); the last node belongs to the last cell.
            let k = (u.floor() as usize).min(self.resolution - 2);
            cell[a] = k;
            frac[a] = u - k as f64;
        }
        Some((cell, frac))
    }

    #[inline]
    fn corners(&self, [i, j, k]: [usize; 3]) -> [f64; 8] {
        let n = self.resolution;
        let base = self.index(i, j, k);
        let (dy, dz) = (n, n * n);
        let v = &self.values;
        [
            v[base],
            v[base + 1],
            v[base + dy],
            v[base + dy + 1],
            v[base + dz],
            v[base + dz + 1],
            v[base + dz + dy],
            v[base + dz + dy + 1],
        ]
    }

    /// Trilinear value at `p`; zero outside the lattice.
    pub fn sample(&self, p: &Vec3) -> Result<f64> {
        Ok(self.sample_with_grad(p)?.0)
    }

    /// Gradient of the trilinear interpolant at `p` (zero outside).
    pub fn sample_grad(&self, p: &Vec3) -> Result<Vec3> {
        Ok(self.sample_with_grad(p)?.1)
    }

    pub fn sample_with_grad(&self, p: &Vec3) -> Result<(f64, Vec3)> {
        if !p.iter().all(|c| c.is_finite()) {
            return Err(Error::NonFinite("sample point"));
        }
        let Some((cell, [fx, fy, fz])) = self.locate(p) else {
            return Ok((0.0, Vec3::zeros()));
        };
        let [v000, v100, v010, v110, v001, v101, v011, v111] = self.corners(cell);

        let c00 = lerp(v000, v100, fx);
        let c10 = lerp(v010, v110, fx);
        let c01 = lerp(v001, v101, fx);
        let c11 = lerp(v011, v111, fx);
        let c0 = lerp(c00, c10, fy);
        let c1 = lerp(c01, c11, fy);
        let value = lerp(c0, c1, fz);

        let dx = lerp(
            lerp(v100 - v000, v110 - v010, fy),
            lerp(v101 - v001, v111 - v011, fy),
            fz,
        );
        let dy = lerp(c10 - c00, c11 - c01, fz);
        let dz = c1 - c0;
        let grad = Vec3::new(
            dx / self.spacing.x,
            dy / self.spacing.y,
            dz / self.spacing.z,
        );
        Ok((value, grad))
    }

    pub fn write_phif(&self, mut out: impl Write) -> std::io::Result<()> {
        out.write_all(PHIF_MAGIC)?;
        out.write_all(&PHIF_VERSION.to_le_bytes())?;
        out.write_all(&(self.resolution as u32).to_le_bytes())?;
        for c in self.origin.iter().chain(self.spacing.iter()) {
            out.write_all(&c.to_le_bytes())?;
        }
        for &v in &self.values {
            out.write_all(&(v as f32).to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_phif(mut input: impl Read) -> Result<Self> {
        let bad = |m: &str| Error::MalformedField(m.to_string());
        let mut header = [0u8; PHIF_HEADER_LEN];
        input
            .read_exact(&mut header)
            .map_err(|_| bad("truncated header"))?;
        if &header[0..4] != PHIF_MAGIC {
            return Err(bad("bad magic"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(header[o..o + 8].try_into().unwrap());
        if u32_at(4) != PHIF_VERSION {
            return Err(bad("unsupported version"));
        }
        let n = u32_at(8) as usize;
        let origin = Vec3::new(f64_at(12), f64_at(20), f64_at(28));
        let spacing = Vec3::new(f64_at(36), f64_at(44), f64_at(52));
        let count = n
            .checked_pow(3)
            .ok_or_else(|| bad("resolution overflows"))?;
        let mut raw = vec![0u8; count * 4];
        input
            .read_exact(&mut raw)
            .map_err(|_| bad("truncated values"))?;
        let values = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
            .collect();
        Self::from_parts(origin, spacing, n, values)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_phif(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_phif(BufReader::new(file))
    }
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + t * (b - a)
}

#[inline]
fn node_position(origin: &Vec3, spacing: &Vec3, i: usize, j: usize, k: usize) -> Vec3 {
    Vec3::new(
        origin.x + i as f64 * spacing.x,
        origin.y + j as f64 * spacing.y,
        origin.z + k as f64 * spacing.z,
    )
}

/// Trilinear sample of `field` at `point`.
pub fn sample_phi(field: &DistanceField, point: &Vec3) -> Result<f64> {
    field.sample(point)
}

/// Gradient of the trilinear interpolant of `field` at `point`.
pub fn sample_phi_grad(field: &DistanceField, point: &Vec3) -> Result<Vec3> {
    field.sample_grad(point)
}

/// Lattice geometry over the padded bounds of `aabb`.
pub fn padded_grid(aabb: &Aabb, resolution: usize, padding_fraction: f64) -> (Vec3, Vec3) {
    let pad = padding_fraction * aabb.diagonal();
    let mut origin = Vec3::zeros();
    let mut spacing = Vec3::zeros();
    for a in 0..3 {
        let p = pad.max(MIN_AXIS_PADDING);
        let lo = aabb.min[a] - p;
        let hi = aabb.max[a] + p;
        origin[a] = lo;
        spacing[a] = (hi - lo) / (resolution - 1) as f64;
    }
    (origin, spacing)
}

/// Padded box the field of `mesh` under `transform` would span, without
/// voxelizing.
pub fn padded_bounds(
    mesh: &TriMesh,
    transform: &Transform,
    resolution: usize,
    padding_fraction: f64,
) -> Result<Aabb> {
    let local = compute_aabb(mesh, &transform.scale_only())?;
    let (origin, spacing) = padded_grid(&local, resolution, padding_fraction);
    let last = (resolution - 1) as f64;
    Ok(Aabb::new(origin, origin + spacing * last).translated(&transform.translation))
}

/// Builds the clamped distance field of a watertight mesh placed by
/// `transform`.
///
/// The lattice is computed in the scaled, untranslated frame and then moved
/// by the translation, so translating a body moves its field without
/// changing a single value.
pub fn voxelize_phi(
    mesh: &TriMesh,
    transform: &Transform,
    resolution: usize,
    padding_fraction: f64,
) -> Result<DistanceField> {
    if resolution < 2 {
        return Err(Error::InvalidConfig(format!("resolution {resolution} < 2")));
    }
    if !(padding_fraction >= 0.0 && padding_fraction.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "padding fraction {padding_fraction} must be finite and non-negative"
        )));
    }
    if !(transform.scale > 0.0 && transform.scale.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "scale {} must be positive",
            transform.scale
        )));
    }
    if mesh.is_empty() {
        return Err(Error::InvalidMesh("mesh has no vertices".into()));
    }
    mesh.require_watertight()?;

    let verts = mesh.transformed(&transform.scale_only());
    let aabb = Aabb::from_points(&verts).expect("nonempty");
    let (origin, spacing) = padded_grid(&aabb, resolution, padding_fraction);
    let grid = Lattice {
        origin,
        spacing,
        n: resolution,
    };

    let caster = RowCaster::new(&verts, mesh.faces(), &grid, aabb.diagonal());
    let rows: [Vec<Vec<f64>>; 3] = [0, 1, 2].map(|axis| caster.crossings(axis));

    let tris: Vec<[Vec3; 3]> = mesh
        .faces()
        .iter()
        .map(|f| f.map(|i| verts[i as usize]))
        .collect();
    let bvh = TriangleBvh::build(tris);

    let n = resolution;
    let mut values = vec![0.0; n * n * n];
    parallel::for_each_chunk_mut(&mut values, n * n, |k, slab| {
        for j in 0..n {
            let mut prev: Option<f64> = None;
            for i in 0..n {
                let p = node_position(&origin, &spacing, i, j, k);
                let votes = parity(&rows[0][k * n + j], p.x)
                    + parity(&rows[1][i * n + k], p.y)
                    + parity(&rows[2][j * n + i], p.z);
                if votes < 2 {
                    prev = None;
                    continue;
                }
                // Distance is 1-Lipschitz, so the previous node bounds the search.
                let d2 = match prev {
                    Some(d) => {
                        let bound = ((d + spacing.x) * (1.0 + 1e-9) + 1e-12).powi(2);
                        let got = bvh.nearest_distance_sq(&p, bound);
                        if got < bound {
                            got
                        } else {
                            bvh.nearest_distance_sq(&p, f64::INFINITY)
                        }
                    }
                    None => bvh.nearest_distance_sq(&p, f64::INFINITY),
                };
                let d = d2.sqrt();
                slab[j * n + i] = d;
                prev = Some(d);
            }
        }
    });

    DistanceField::from_parts(origin + transform.translation, spacing, n, values)
}

#[inline]
fn parity(crossings: &[f64], coord: f64) -> u8 {
    (crossings.partition_point(|&c| c < coord) % 2) as u8
}

struct Lattice {
    origin: Vec3,
    spacing: Vec3,
    n: usize,
}

/// Axis-aligned ray casting through every lattice row.
struct RowCaster<'a> {
    verts: &'a [Vec3],
    faces: &'a [[u32; 3]],
    grid: &'a Lattice,
    jitter: f64,
}

/// Outcome of intersecting one row ray with one triangle.
enum Hit {
    Miss,
    At(f64),
    /// The ray grazes an edge or vertex of the projected triangle.
    Degenerate,
}

impl<'a> RowCaster<'a> {
    const MAX_JITTER_ATTEMPTS: u32 = 8;

    fn new(verts: &'a [Vec3], faces: &'a [[u32; 3]], grid: &'a Lattice, diagonal: f64) -> Self {
        Self {
            verts,
            faces,
            grid,
            jitter: 1e-9 * diagonal,
        }
    }

    /// Sorted crossing coordinates along `axis` for every row, rows indexed
    /// `jc * n + jb` with `(b, c)` the two other axes in cyclic order.
    fn crossings(&self, axis: usize) -> Vec<Vec<f64>> {
        let n = self.grid.n;
        let (b, c) = ((axis + 1) % 3, (axis + 2) % 3);
        let tol = self.jitter * 10.0;

        // CSR binning of faces into the rows their projection may touch.
        let range = |lo: f64, hi: f64, ax: usize| -> Option<(usize, usize)> {
            let o = self.grid.origin[ax];
            let s = self.grid.spacing[ax];
            let first = ((lo - tol - o) / s).ceil().max(0.0);
            let last = ((hi + tol - o) / s).floor().min((n - 1) as f64);
            (first <= last).then_some((first as usize, last as usize))
        };
        let spans: Vec<Option<[(usize, usize); 2]>> = self
            .faces
            .iter()
            .map(|f| {
                let p = f.map(|i| self.verts[i as usize]);
                let (bl, bh) = min_max(p[0][b], p[1][b], p[2][b]);
                let (cl, ch) = min_max(p[0][c], p[1][c], p[2][c]);
                Some([range(bl, bh, b)?, range(cl, ch, c)?])
            })
            .collect();
        let mut offsets = vec![0u32; n * n + 1];
        for [(b0, b1), (c0, c1)] in spans.iter().flatten() {
            for jc in *c0..=*c1 {
                for jb in *b0..=*b1 {
                    offsets[jc * n + jb + 1] += 1;
                }
            }
        }
        for r in 0..n * n {
            offsets[r + 1] += offsets[r];
        }
        let mut fill = offsets.clone();
        let mut bins = vec![0u32; offsets[n * n] as usize];
        for (fi, span) in spans.iter().enumerate() {
            if let Some([(b0, b1), (c0, c1)]) = span {
                for jc in *c0..=*c1 {
                    for jb in *b0..=*b1 {
                        let r = jc * n + jb;
                        bins[fill[r] as usize] = fi as u32;
                        fill[r] += 1;
                    }
                }
            }
        }

        parallel::map_range(n * n, |row| {
            let (jb, jc) = (row % n, row / n);
            let candidates = &bins[offsets[row] as usize..offsets[row + 1] as usize];
            let pb = self.grid.origin[b] + jb as f64 * self.grid.spacing[b];
            let pc = self.grid.origin[c] + jc as f64 * self.grid.spacing[c];
            self.cast_row(axis, candidates, pb, pc)
        })
    }

    fn cast_row(&self, axis: usize, candidates: &[u32], pb: f64, pc: f64) -> Vec<f64> {
        let mut out = Vec::new();
        for attempt in 0..=Self::MAX_JITTER_ATTEMPTS {
            let k = attempt as f64;
            let q = (
                pb + k * self.jitter * 0.754_877_666_2,
                pc + k * self.jitter * 0.569_840_291_0,
            );
            out.clear();
            let mut degenerate = false;
            for &fi in candidates {
                match self.intersect(axis, self.faces[fi as usize], q) {
                    Hit::Miss => {}
                    Hit::At(x) => out.push(x),
                    Hit::Degenerate => {
                        degenerate = true;
                        break;
                    }
                }
            }
            if !degenerate {
                break;
            }
            if attempt == Self::MAX_JITTER_ATTEMPTS {
                log::debug!("row ray still grazes the surface after {attempt} jitters");
            }
        }
        out.sort_by(f64::total_cmp);
        out
    }

    /// Watertight 2D containment: each edge's orientation value is computed
    /// from its lower-indexed endpoint, so the two faces sharing an edge see
    /// exactly opposite values and a ray cannot slip between them.
    fn intersect(&self, axis: usize, face: [u32; 3], q: (f64, f64)) -> Hit {
        let (b, c) = ((axis + 1) % 3, (axis + 2) % 3);
        let edge = |s: u32, t: u32| -> f64 {
            let (lo, hi, sign) = if s < t { (s, t, 1.0) } else { (t, s, -1.0) };
            let (l, h) = (&self.verts[lo as usize], &self.verts[hi as usize]);
            sign * ((h[b] - l[b]) * (q.1 - l[c]) - (h[c] - l[c]) * (q.0 - l[b]))
        };
        let [i0, i1, i2] = face;
        let e = [edge(i1, i2), edge(i2, i0), edge(i0, i1)];
        let pos = e.iter().filter(|&&x| x > 0.0).count();
        let neg = e.iter().filter(|&&x| x < 0.0).count();
        if pos == 3 || neg == 3 {
            let sum = e[0] + e[1] + e[2];
            let x = (e[0] * self.verts[i0 as usize][axis]
                + e[1] * self.verts[i1 as usize][axis]
                + e[2] * self.verts[i2 as usize][axis])
                / sum;
            Hit::At(x)
        } else if pos == 0 || neg == 0 {
            Hit::Degenerate
        } else {
            Hit::Miss
        }
    }
}

fn min_max(a: f64, b: f64, c: f64) -> (f64, f64) {
    (a.min(b).min(c), a.max(b).max(c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn field_from_fn(n: usize, f: impl Fn(f64, f64, f64) -> f64) -> DistanceField {
        let origin = Vec3::new(-1.0, 0.5, 2.0);
        let spacing = Vec3::new(0.25, 0.5, 0.125);
        let mut values = Vec::with_capacity(n * n * n);
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    let p = node_position(&origin, &spacing, i, j, k);
                    values.push(f(p.x, p.y, p.z));
                }
            }
        }
        DistanceField::from_parts(origin, spacing, n, values).unwrap()
    }

    #[test]
    fn cube_centroid_depth() {
        let field = voxelize_phi(&fixtures::cube(1.0), &Transform::IDENTITY, 9, 0.1).unwrap();
        // Node 4 of 9 sits on the centroid.
        let c = field.node_position(4, 4, 4);
        assert!(c.norm() < 1e-12);
        let half_diag = field.spacing().norm() * 0.5;
        assert!((field.value(4, 4, 4) - 0.5).abs() <= half_diag);
        assert!((field.value(4, 4, 4) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn outside_nodes_are_zero_and_boundary_shell_is_zero() {
        let mesh = fixtures::icosphere(1.0, 2);
        let field = voxelize_phi(&mesh, &Transform::IDENTITY, 16, 0.1).unwrap();
        let n = field.resolution();
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    let on_shell = [i, j, k].iter().any(|&x| x == 0 || x == n - 1);
                    let p = field.node_position(i, j, k);
                    // the icosphere is inscribed in the unit sphere
                    if on_shell || p.norm() > 1.0 {
                        assert_eq!(field.value(i, j, k), 0.0, "{i} {j} {k}");
                    }
                }
            }
        }
        assert!(field.values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn non_watertight_is_rejected() {
        let cube = fixtures::cube(1.0);
        let open = TriMesh::new(cube.vertices().to_vec(), cube.faces()[2..].to_vec()).unwrap();
        assert!(matches!(
            voxelize_phi(&open, &Transform::IDENTITY, 8, 0.1),
            Err(Error::NotWatertight { .. })
        ));
        assert!(voxelize_phi(&cube, &Transform::IDENTITY, 1, 0.1).is_err());
        assert!(voxelize_phi(&cube, &Transform::IDENTITY, 8, -0.1).is_err());
    }

    #[test]
    fn zero_padding_still_leaves_a_shell() {
        let field = voxelize_phi(&fixtures::cube(1.0), &Transform::IDENTITY, 8, 0.0).unwrap();
        assert!((field.origin().x + 0.5 + MIN_AXIS_PADDING).abs() < 1e-15);
        assert_eq!(field.value(0, 3, 3), 0.0);
        assert!(field.value(3, 3, 3) > 0.0);
    }

    #[test]
    fn translation_moves_origin_only() {
        let mesh = fixtures::capsule(0.3, 0.2, 10, 6);
        let t = Vec3::new(0.3, -1.7, 4.25);
        let a = voxelize_phi(&mesh, &Transform::new(1.5, Vec3::zeros()), 12, 0.1).unwrap();
        let b = voxelize_phi(&mesh, &Transform::new(1.5, t), 12, 0.1).unwrap();
        assert_eq!(a.values(), b.values());
        assert_eq!(b.origin(), a.origin() + t);
        assert_eq!(a.spacing(), b.spacing());
    }

    #[test]
    fn sampling_nodes_is_exact() {
        let field = field_from_fn(5, |x, y, z| (x * 3.1 + y * y - z).abs());
        for k in 0..5 {
            for j in 0..5 {
                for i in 0..5 {
                    let p = field.node_position(i, j, k);
                    assert_eq!(field.sample(&p).unwrap(), field.value(i, j, k));
                }
            }
        }
    }

    #[test]
    fn outside_is_zero() {
        let field = field_from_fn(4, |_, _, _| 1.0);
        let far = field.bounds().max + Vec3::new(10.0, 0.0, 0.0);
        assert_eq!(field.sample(&far).unwrap(), 0.0);
        assert_eq!(field.sample_grad(&far).unwrap(), Vec3::zeros());
        assert!(field.sample(&Vec3::new(f64::NAN, 0.0, 0.0)).is_err());
        assert!(field
            .sample_grad(&Vec3::new(0.0, f64::INFINITY, 0.0))
            .is_err());
    }

    #[test]
    fn midpoint_and_linear_gradient() {
        let field = field_from_fn(3, |x, _, _| 0.2 + 0.8 * (x + 1.0));
        // adjacent x nodes hold 0.2 and 0.4
        let a = field.node_position(0, 1, 1);
        let b = field.node_position(1, 1, 1);
        assert!((field.value(1, 1, 1) - 0.4).abs() < 1e-15);
        let mid = (a + b) * 0.5;
        assert!((field.sample(&mid).unwrap() - 0.3).abs() < 1e-15);

        let slope2 = field_from_fn(4, |x, _, _| 2.0 * x + 3.0);
        let p = slope2.node_position(1, 1, 1) + Vec3::new(0.1, 0.2, 0.05);
        let g = slope2.sample_grad(&p).unwrap();
        assert!((g - Vec3::new(2.0, 0.0, 0.0)).norm() < 1e-12, "{g:?}");

        let flat = field_from_fn(4, |_, _, _| 0.7);
        assert_eq!(flat.sample_grad(&p).unwrap(), Vec3::zeros());
    }

    #[test]
    fn phif_round_trip_and_size() {
        let field = voxelize_phi(&fixtures::cube(1.0), &Transform::IDENTITY, 8, 0.1).unwrap();
        let mut buf = Vec::new();
        field.write_phif(&mut buf).unwrap();
        assert_eq!(buf.len(), PHIF_HEADER_LEN + 512 * 4);
        assert_eq!(&buf[..4], b"PHIF");
        let back = DistanceField::read_phif(&buf[..]).unwrap();
        assert_eq!(back.origin(), field.origin());
        assert_eq!(back.spacing(), field.spacing());
        for (a, b) in back.values().iter().zip(field.values()) {
            assert_eq!(*a, *b as f32 as f64);
        }
        assert!(DistanceField::read_phif(&buf[..100]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(DistanceField::read_phif(&bad[..]).is_err());
    }
}
