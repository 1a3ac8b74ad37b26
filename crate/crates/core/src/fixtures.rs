//! Procedural watertight meshes used by tests, benchmarks and examples.
//!
//! Every closed mesh here has outward-facing counter-clockwise winding.

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::geometry::Vec3;
use crate::mesh::{Transform, TriMesh};

fn build(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> TriMesh {
    TriMesh::new(vertices, faces).expect("procedural fixture is valid")
}

/// Axis-aligned box between two corners.
pub fn cuboid(min: Vec3, max: Vec3) -> TriMesh {
    let v = |x: bool, y: bool, z: bool| {
        Vec3::new(
            if x { max.x } else { min.x },
            if y { max.y } else { min.y },
            if z { max.z } else { min.z },
        )
    };
    let vertices = vec![
        v(false, false, false),
        v(true, false, false),
        v(true, true, false),
        v(false, true, false),
        v(false, false, true),
        v(true, false, true),
        v(true, true, true),
        v(false, true, true),
    ];
    let faces = vec![
        [0, 3, 2],
        [0, 2, 1], // -z
        [4, 5, 6],
        [4, 6, 7], // +z
        [0, 1, 5],
        [0, 5, 4], // -y
        [3, 7, 6],
        [3, 6, 2], // +y
        [0, 4, 7],
        [0, 7, 3], // -x
        [1, 2, 6],
        [1, 6, 5], // +x
    ];
    build(vertices, faces)
}

/// Cube of edge length `size` centered at the origin.
pub fn cube(size: f64) -> TriMesh {
    let h = size * 0.5;
    cuboid(Vec3::new(-h, -h, -h), Vec3::new(h, h, h))
}

/// Subdivided icosahedron projected onto a sphere of `radius`.
///
/// Level 0 has 12 vertices and 20 faces; each level quadruples the faces.
pub fn icosphere(radius: f64, subdivisions: u32) -> TriMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];

    for _ in 0..subdivisions {
        let mut cache: HashMap<(u32, u32), u32> = HashMap::new();
        let mut midpoint = |a: u32, b: u32, verts: &mut Vec<Vec3>| -> u32 {
            *cache.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let m = ((verts[a as usize] + verts[b as usize]) * 0.5).normalize();
                verts.push(m);
                (verts.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }

    build(vertices.into_iter().map(|v| v * radius).collect(), faces)
}

/// Closed surface of revolution about the y axis.
///
/// `profile` lists `(radius, y)` rings from the top pole downwards, poles
/// excluded; `top` and `bottom` are the pole heights.
fn revolve(profile: &[(f64, f64)], top: f64, bottom: f64, slices: u32) -> TriMesh {
    assert!(slices >= 3 && !profile.is_empty());
    let rings = profile.len() as u32;
    let mut vertices = Vec::with_capacity((rings * slices + 2) as usize);
    vertices.push(Vec3::new(0.0, top, 0.0));
    for &(r, y) in profile {
        for s in 0..slices {
            let phi = 2.0 * PI * s as f64 / slices as f64;
            vertices.push(Vec3::new(r * phi.cos(), y, -r * phi.sin()));
        }
    }
    vertices.push(Vec3::new(0.0, bottom, 0.0));
    let bottom_idx = (vertices.len() - 1) as u32;
    let ring = |k: u32, s: u32| 1 + k * slices + s % slices;

    let mut faces = Vec::with_capacity((2 * slices * rings) as usize);
    for s in 0..slices {
        faces.push([0, ring(0, s), ring(0, s + 1)]);
    }
    for k in 0..rings - 1 {
        for s in 0..slices {
            let (a, b) = (ring(k, s), ring(k, s + 1));
            let (c, d) = (ring(k + 1, s), ring(k + 1, s + 1));
            faces.push([a, c, d]);
            faces.push([a, d, b]);
        }
    }
    for s in 0..slices {
        faces.push([bottom_idx, ring(rings - 1, s + 1), ring(rings - 1, s)]);
    }
    build(vertices, faces)
}

/// Latitude/longitude sphere with `inner_rings` rings between the poles.
pub fn uv_sphere(radius: f64, slices: u32, inner_rings: u32) -> TriMesh {
    capsule(radius, 0.0, slices, inner_rings)
}

/// Capsule along the y axis: a cylinder of half-height `half_length` capped
/// by hemispheres. Vertex count is `slices * inner_rings + 2`.
///
/// `inner_rings` should be even so no ring falls on the equator.
pub fn capsule(radius: f64, half_length: f64, slices: u32, inner_rings: u32) -> TriMesh {
    let profile: Vec<(f64, f64)> = (1..=inner_rings)
        .map(|k| {
            let theta = PI * k as f64 / (inner_rings + 1) as f64;
            let c = theta.cos();
            let shift = if c >= 0.0 { half_length } else { -half_length };
            (radius * theta.sin(), radius * c + shift)
        })
        .collect();
    revolve(
        &profile,
        radius + half_length,
        -radius - half_length,
        slices,
    )
}

/// Human-sized capsule with the vertex and face counts of an SMPL body
/// (6890 vertices, 13776 faces).
pub fn body_sized_capsule() -> TriMesh {
    capsule(0.25, 0.6, 84, 82)
}

/// Single flat quad at depth `z` spanning `[x0, x1] x [y0, y1]`, facing -z.
/// Not closed; rendering only.
pub fn quad(x0: f64, x1: f64, y0: f64, y1: f64, z: f64) -> TriMesh {
    build(
        vec![
            Vec3::new(x0, y0, z),
            Vec3::new(x1, y0, z),
            Vec3::new(x1, y1, z),
            Vec3::new(x0, y1, z),
        ],
        vec![[0, 2, 1], [0, 3, 2]],
    )
}

/// Concatenates placed meshes into one.
pub fn merge(parts: &[(&TriMesh, Transform)]) -> TriMesh {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (mesh, xf) in parts {
        let base = vertices.len() as u32;
        vertices.extend(mesh.vertices().iter().map(|v| xf.apply(v)));
        faces.extend(mesh.faces().iter().map(|f| f.map(|i| i + base)));
    }
    build(vertices, faces)
}

/// Signed enclosed volume via the divergence theorem; positive for
/// outward winding.
pub fn signed_volume(mesh: &TriMesh) -> f64 {
    (0..mesh.faces().len())
        .map(|f| {
            let [a, b, c] = mesh.triangle(f);
            a.dot(&b.cross(&c)) / 6.0
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_fixtures_are_watertight_and_outward() {
        for (name, m) in [
            ("cube", cube(1.0)),
            ("ico0", icosphere(1.0, 0)),
            ("ico2", icosphere(0.5, 2)),
            ("capsule", capsule(0.3, 0.5, 16, 10)),
            ("uv", uv_sphere(1.0, 12, 8)),
        ] {
            assert!(m.is_watertight(), "{name}");
            assert_eq!(m.euler_characteristic(), 2, "{name}");
            assert!(signed_volume(&m) > 0.0, "{name}");
        }
        assert!((signed_volume(&cube(2.0)) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn body_sized_counts() {
        let m = body_sized_capsule();
        assert_eq!(m.vertices().len(), 6890);
        assert_eq!(m.faces().len(), 13776);
        assert!(m.is_watertight());
    }

    #[test]
    fn icosphere_counts() {
        for (level, v, f) in [(0, 12, 20), (1, 42, 80), (2, 162, 320), (3, 642, 1280)] {
            let m = icosphere(1.0, level);
            assert_eq!((m.vertices().len(), m.faces().len()), (v, f));
        }
    }
}
