#![allow(dead_code)]

use std::sync::Arc;

use coherent::fixtures;
use coherent::raster;
use coherent::{BodyInstance, Camera, InstanceMap, Scene, TriMesh, Vec3};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub mod checks;
pub mod oracle;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn camera() -> Camera {
    Camera::centered(60.0, 160, 120).unwrap()
}

pub fn scene(bodies: Vec<(u32, &TriMesh, Vec3)>) -> Scene {
    let bodies = bodies
        .into_iter()
        .map(|(id, m, t)| BodyInstance::new(id, Arc::new(m.clone()), t))
        .collect();
    Scene::new(camera(), bodies).unwrap()
}

/// Concentric spheres, radius 0.2 inside radius 1.0.
pub fn nested_spheres() -> Scene {
    let outer = fixtures::icosphere(1.0, 3);
    let inner = fixtures::icosphere(0.2, 2);
    scene(vec![
        (1, &outer, Vec3::new(0.0, 0.0, 5.0)),
        (2, &inner, Vec3::new(0.0, 0.0, 5.0)),
    ])
}

/// The nested pair with the inner sphere moved off center, so the gradient
/// is not zero by symmetry.
pub fn off_center_nested_spheres() -> Scene {
    let outer = fixtures::icosphere(1.0, 3);
    let inner = fixtures::icosphere(0.2, 2);
    scene(vec![
        (1, &outer, Vec3::new(0.0, 0.0, 5.0)),
        (2, &inner, Vec3::new(0.31, -0.22, 5.17)),
    ])
}

/// Two radius-0.5 spheres whose centers are 0.8 apart.
pub fn partial_overlap_spheres() -> Scene {
    let s = fixtures::icosphere(0.5, 2);
    scene(vec![
        (1, &s, Vec3::new(-0.4, 0.1, 5.0)),
        (2, &s, Vec3::new(0.4, -0.05, 5.2)),
    ])
}

/// Two unit spheres with centers 1.0 apart.
pub fn unit_spheres_one_apart() -> Scene {
    let s = fixtures::icosphere(1.0, 2);
    scene(vec![
        (1, &s, Vec3::new(-0.5, 0.0, 6.0)),
        (2, &s, Vec3::new(0.5, 0.0, 6.0)),
    ])
}

/// Depths of the front and back body in the two-body order fixtures.
pub const NEAR_FAR: (f64, f64) = (20.0, 20.25);

/// Two wide panels overlapping on a band two pixels wide around x = 0.
/// `closed` gives thin boxes instead of open quads. Far from the camera,
/// small depth changes move no silhouette edge across a pixel center.
pub fn overlapping_panels(closed: bool) -> (TriMesh, TriMesh) {
    let (a, big) = (0.4, 40.0);
    if closed {
        (
            fixtures::cuboid(Vec3::new(-big, -big, -0.01), Vec3::new(a, big, 0.01)),
            fixtures::cuboid(Vec3::new(-a, -big, -0.01), Vec3::new(big, big, 0.01)),
        )
    } else {
        (
            fixtures::quad(-big, a, -big, big, 0.0),
            fixtures::quad(-a, big, -big, big, 0.0),
        )
    }
}

/// Panel 1 is in front in the mask and behind in the returned scene.
pub fn inverted_panels(closed: bool) -> (Scene, InstanceMap) {
    let (left, right) = overlapping_panels(closed);
    let (near, far) = NEAR_FAR;
    let place = |z1: f64, z2: f64| {
        scene(vec![
            (1, &left, Vec3::new(0.0, 0.0, z1)),
            (2, &right, Vec3::new(0.0, 0.0, z2)),
        ])
    };
    let mask = raster::render(&place(near, far)).unwrap().instance;
    (place(far, near), mask)
}

/// Fraction of mask foreground pixels whose label the render reproduces.
pub fn foreground_match(rendered: &InstanceMap, mask: &InstanceMap) -> f64 {
    let fg: Vec<usize> = (0..mask.data().len())
        .filter(|&p| mask.data()[p] != 0)
        .collect();
    let same = fg
        .iter()
        .filter(|&&p| rendered.data()[p] == mask.data()[p])
        .count();
    same as f64 / fg.len().max(1) as f64
}

/// A chain of two to four spheres, each overlapping its predecessor by a
/// fifth to two fifths of their combined radii.
pub fn collision_scene(seed: u64) -> Scene {
    let mut r = rng(seed);
    let n = r.random_range(2..=4);
    let mut bodies = Vec::new();
    let radii: Vec<f64> = (0..n).map(|_| r.random_range(0.3..0.6)).collect();
    let meshes: Vec<TriMesh> = radii
        .iter()
        .map(|&rad| fixtures::icosphere(rad, 2))
        .collect();
    let mut pos = Vec3::new(
        r.random_range(-0.5..0.5),
        r.random_range(-0.5..0.5),
        r.random_range(5.0..7.0),
    );
    for (k, m) in meshes.iter().enumerate() {
        bodies.push(((k + 1) as u32, m, pos));
        if k + 1 < n {
            let dir = Vec3::new(
                r.random_range(-1.0..1.0),
                r.random_range(-1.0..1.0),
                r.random_range(-1.0..1.0),
            )
            .normalize();
            pos += dir * (radii[k] + radii[k + 1]) * r.random_range(0.6..0.8);
        }
    }
    scene(bodies)
}

/// Fronto-parallel cards that all overlap the image center, plus the mask
/// of their true arrangement. The returned scene assigns the true depths to
/// the cards in a shuffled order that differs from the truth.
pub fn shuffled_cards(seed: u64) -> (Scene, InstanceMap, Scene) {
    let mut r = rng(seed);
    let n = r.random_range(2..=4);
    let cards: Vec<TriMesh> = (0..n)
        .map(|_| {
            let (hw, hh) = (r.random_range(0.3..0.6), r.random_range(0.3..0.6));
            fixtures::cuboid(Vec3::new(-hw, -hh, -0.01), Vec3::new(hw, hh, 0.01))
        })
        .collect();
    let xy: Vec<(f64, f64)> = (0..n)
        .map(|_| (r.random_range(-0.25..0.25), r.random_range(-0.2..0.2)))
        .collect();
    let depths: Vec<f64> = (0..n)
        .map(|k| 3.0 + 0.5 * k as f64 + r.random_range(0.0..0.2))
        .collect();
    let mut truth_order: Vec<usize> = (0..n).collect();
    shuffle(&mut truth_order, &mut r);
    let build = |order: &[usize]| {
        scene(
            (0..n)
                .map(|k| {
                    let z = depths[order[k]];
                    ((k + 1) as u32, &cards[k], Vec3::new(xy[k].0, xy[k].1, z))
                })
                .collect(),
        )
    };
    let truth = build(&truth_order);
    let mask = raster::render(&truth).unwrap().instance;
    // keep shuffling until the mask visibly contradicts the placement
    let mut wrong_order = truth_order.clone();
    loop {
        shuffle(&mut wrong_order, &mut r);
        let wrong = build(&wrong_order);
        let render = raster::render(&wrong).unwrap();
        if coherent::metrics::mask_depth_order(&wrong, &render, &mask)
            .unwrap()
            .fraction()
            < 1.0
        {
            return (wrong, mask, truth);
        }
    }
}

fn shuffle(v: &mut [usize], r: &mut ChaCha8Rng) {
    for i in (1..v.len()).rev() {
        let j = r.random_range(0..=i);
        v.swap(i, j);
    }
}

/// Two to six mixed bodies in view; some are exact copies of an earlier
/// body under a new id, so their depths tie everywhere.
pub fn random_render_scene(seed: u64) -> Scene {
    let mut r = rng(seed);
    let n = r.random_range(2..=6);
    let mut placed: Vec<(TriMesh, Vec3, f64)> = Vec::new();
    for _ in 0..n {
        if !placed.is_empty() && r.random_bool(0.25) {
            let k = r.random_range(0..placed.len());
            placed.push(placed[k].clone());
            continue;
        }
        let size = r.random_range(0.2..0.8);
        let mesh = match r.random_range(0..3) {
            0 => fixtures::icosphere(size, r.random_range(0..3)),
            1 => fixtures::cuboid(
                Vec3::new(-size, -size * 0.5, -size * 0.3),
                Vec3::new(size * 0.7, size, size * 0.3),
            ),
            _ => fixtures::capsule(size * 0.4, size, 12, 4),
        };
        let t = Vec3::new(
            r.random_range(-1.0..1.0),
            r.random_range(-0.8..0.8),
            r.random_range(3.0..8.0),
        );
        placed.push((mesh, t, r.random_range(0.5..1.5)));
    }
    let bodies = placed
        .into_iter()
        .enumerate()
        .map(|(k, (m, t, s))| BodyInstance::new((k + 1) as u32, Arc::new(m), t).with_scale(s))
        .collect();
    Scene::new(camera(), bodies).unwrap()
}

/// One-pixel image where body 1 is shown but the mask names body 2.
pub fn single_pixel(depth_truth: f64, depth_shown: f64) -> (Scene, InstanceMap) {
    let cam = Camera::new(1.0, 0.5, 0.5, 1, 1).unwrap();
    let q = fixtures::quad(-1.0, 1.0, -1.0, 1.0, 0.0);
    let scene = Scene::new(
        cam,
        vec![
            BodyInstance::new(1, Arc::new(q.clone()), Vec3::new(0.0, 0.0, depth_shown)),
            BodyInstance::new(2, Arc::new(q), Vec3::new(0.0, 0.0, depth_truth)),
        ],
    )
    .unwrap();
    let mask = InstanceMap::from_vec(1, 1, vec![2]).unwrap();
    (scene, mask)
}
