//! Slow reference implementations used to check the library.

use coherent::{TriMesh, Vec3};

/// Distance from `p` to segment `ab`.
fn segment_distance(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Distance from `p` to triangle `abc`: the plane distance when the
/// projection lands inside, else the nearest edge.
pub fn triangle_distance(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    let n = (b - a).cross(&(c - a));
    let n2 = n.norm_squared();
    let q = p - n * ((p - a).dot(&n) / n2);
    // barycentric signs via sub-triangle normals
    let inside = [(a, b), (b, c), (c, a)]
        .iter()
        .all(|(u, v)| (*v - *u).cross(&(q - *u)).dot(&n) >= 0.0);
    if inside {
        return (p - q).norm();
    }
    segment_distance(p, a, b)
        .min(segment_distance(p, b, c))
        .min(segment_distance(p, c, a))
}

pub fn mesh_distance(mesh: &TriMesh, vertices: &[Vec3], p: &Vec3) -> f64 {
    mesh.faces()
        .iter()
        .map(|f| {
            triangle_distance(
                p,
                &vertices[f[0] as usize],
                &vertices[f[1] as usize],
                &vertices[f[2] as usize],
            )
        })
        .fold(f64::INFINITY, f64::min)
}

/// Generalized winding number: signed solid angle over 4 pi.
pub fn winding_number(mesh: &TriMesh, vertices: &[Vec3], p: &Vec3) -> f64 {
    let mut total = 0.0;
    for f in mesh.faces() {
        let a = vertices[f[0] as usize] - p;
        let b = vertices[f[1] as usize] - p;
        let c = vertices[f[2] as usize] - p;
        let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
        let num = a.dot(&b.cross(&c));
        let den = la * lb * lc + a.dot(&b) * lc + b.dot(&c) * la + c.dot(&a) * lb;
        total += 2.0 * num.atan2(den);
    }
    total / (4.0 * std::f64::consts::PI)
}

pub fn inside(mesh: &TriMesh, vertices: &[Vec3], p: &Vec3) -> bool {
    winding_number(mesh, vertices, p).abs() > 0.5
}

/// Clamped interior distance: the exact value a node should hold.
pub fn phi(mesh: &TriMesh, vertices: &[Vec3], p: &Vec3) -> f64 {
    if inside(mesh, vertices, p) {
        mesh_distance(mesh, vertices, p)
    } else {
        0.0
    }
}

/// Trilinear interpolation written out corner by corner.
pub fn trilinear(corners: [[[f64; 2]; 2]; 2], t: Vec3) -> f64 {
    let mut v = 0.0;
    for (i, plane) in corners.iter().enumerate() {
        for (j, row) in plane.iter().enumerate() {
            for (k, &c) in row.iter().enumerate() {
                let wx = if i == 1 { t.x } else { 1.0 - t.x };
                let wy = if j == 1 { t.y } else { 1.0 - t.y };
                let wz = if k == 1 { t.z } else { 1.0 - t.z };
                v += wx * wy * wz * c;
            }
        }
    }
    v
}
