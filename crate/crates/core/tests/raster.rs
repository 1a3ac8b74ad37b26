mod common;

use std::collections::VecDeque;

use coherent::fixtures;
use coherent::parallel::with_threads;
use coherent::raster::{self, disagreements, ordinal_depth_loss, render, RenderOutput};
use coherent::{Error, InstanceMap, Scene, Vec3};
use common::checks;
use proptest::prelude::*;

fn assert_consistent(out: &RenderOutput) {
    if let Some(p) = checks::argmin_mismatch(out) {
        panic!("pixel {p} disagrees with the per-body depth argmin");
    }
}

#[test]
fn empty_scene_renders_nothing() {
    let scene = Scene::new(common::camera(), vec![]).unwrap();
    let out = render(&scene).unwrap();
    assert_eq!(out.instance.foreground_pixels(), 0);
    assert!(out.depths.is_empty());
    assert_eq!(out.scene_depth.coverage_count(), 0);
    let mask = InstanceMap::new(160, 120);
    let l = ordinal_depth_loss(&out, &mask).unwrap();
    assert_eq!(l.loss, 0.0);
}

#[test]
fn exact_copies_resolve_to_the_lower_id() {
    let s = fixtures::icosphere(0.5, 2);
    let scene = common::scene(vec![
        (4, &s, Vec3::new(0.0, 0.0, 4.0)),
        (2, &s, Vec3::new(0.0, 0.0, 4.0)),
    ]);
    let out = render(&scene).unwrap();
    let counts = out.instance.counts();
    assert_eq!(counts.keys().copied().collect::<Vec<_>>(), vec![2]);
    assert_consistent(&out);
}

#[test]
fn convex_silhouette_is_one_four_connected_region() {
    let s = fixtures::icosphere(0.6, 3);
    let scene = common::scene(vec![(1, &s, Vec3::new(0.1, -0.05, 3.0))]);
    let inst = render(&scene).unwrap().instance;
    let (w, h) = inst.dims();
    let start = inst.data().iter().position(|&v| v != 0).unwrap();
    let mut seen = vec![false; w * h];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    let mut reached = 0;
    while let Some(p) = queue.pop_front() {
        reached += 1;
        let (x, y) = (p % w, p / w);
        let mut push = |q: usize| {
            if !seen[q] && inst.data()[q] != 0 {
                seen[q] = true;
                queue.push_back(q);
            }
        };
        if x > 0 {
            push(p - 1);
        }
        if x + 1 < w {
            push(p + 1);
        }
        if y > 0 {
            push(p - w);
        }
        if y + 1 < h {
            push(p + w);
        }
    }
    assert_eq!(reached, inst.foreground_pixels());
    // no holes either: every background pixel reaches the border
    let mut outside = vec![false; w * h];
    let mut queue: VecDeque<usize> = (0..w * h)
        .filter(|&p| {
            let (x, y) = (p % w, p / w);
            (x == 0 || y == 0 || x == w - 1 || y == h - 1) && inst.data()[p] == 0
        })
        .collect();
    for &p in &queue {
        outside[p] = true;
    }
    while let Some(p) = queue.pop_front() {
        let (x, y) = (p % w, p / w);
        for q in [
            (x > 0).then(|| p - 1),
            (x + 1 < w).then(|| p + 1),
            (y > 0).then(|| p - w),
            (y + 1 < h).then(|| p + w),
        ]
        .into_iter()
        .flatten()
        {
            if !outside[q] && inst.data()[q] == 0 {
                outside[q] = true;
                queue.push_back(q);
            }
        }
    }
    assert_eq!(
        outside.iter().filter(|&&o| o).count(),
        w * h - inst.foreground_pixels()
    );
}

#[test]
fn geometry_behind_the_camera_is_rejected() {
    let s = fixtures::icosphere(0.5, 1);
    let scene = common::scene(vec![(1, &s, Vec3::new(0.0, 0.0, 0.2))]);
    assert!(matches!(
        render(&scene),
        Err(Error::BehindCamera { body: 1, .. })
    ));
}

#[test]
fn mask_must_fit_the_scene() {
    let s = fixtures::icosphere(0.5, 1);
    let scene = common::scene(vec![
        (1, &s, Vec3::new(0.0, 0.0, 4.0)),
        (2, &s, Vec3::new(0.5, 0.0, 5.0)),
    ]);
    let mut mask = InstanceMap::new(160, 120);
    mask.set(3, 3, 7);
    assert!(matches!(
        mask.check_against(&scene),
        Err(Error::UnknownId(7))
    ));
    let small = InstanceMap::new(10, 10);
    assert!(matches!(
        small.check_against(&scene),
        Err(Error::DimensionMismatch { .. })
    ));
    let out = render(&scene).unwrap();
    assert!(ordinal_depth_loss(&out, &small).is_err());
    assert!(InstanceMap::new(160, 120).check_against(&scene).is_ok());
}

#[test]
fn single_pixel_losses() {
    let (scene, mask) = common::single_pixel(3.0, 3.0);
    let out = render(&scene).unwrap();
    assert_eq!(out.instance.data(), &[1]);
    let l = ordinal_depth_loss(&out, &mask).unwrap();
    assert!((l.loss - std::f64::consts::LN_2).abs() <= 1e-12);
    assert_eq!(l.per_body_depth_gradients[&2], 0.5);
    assert_eq!(l.per_body_depth_gradients[&1], -0.5);

    let (scene, mask) = common::single_pixel(4.0, 2.0);
    let l = ordinal_depth_loss(&render(&scene).unwrap(), &mask).unwrap();
    assert!((l.loss - (1.0 + 2f64.exp()).ln()).abs() <= 1e-12);
    assert_eq!(l.disagreement_pixels, 1);
}

#[test]
fn uncovered_truth_pixels_are_skipped() {
    let (scene, _) = common::inverted_panels(false);
    let out = render(&scene).unwrap();
    // claim the far right of the image, where panel 1 is absent, for body 1
    let mut mask = out.instance.clone();
    let (w, h) = mask.dims();
    for y in 0..h {
        mask.set(w - 1, y, 1);
    }
    let l = ordinal_depth_loss(&out, &mask).unwrap();
    assert_eq!(l.skipped_pixels, h);
    assert_eq!(l.disagreement_pixels, 0);
    assert_eq!(l.loss, 0.0);
}

#[test]
fn gradient_signs_follow_each_disagreement() {
    let (scene, mask) = common::inverted_panels(false);
    let out = render(&scene).unwrap();
    let (set, _) = disagreements(&out, &mask).unwrap();
    assert!(!set.is_empty());
    for d in &set {
        let gap = out.depths[&d.truth].depth_at(d.pixel).unwrap()
            - out.depths[&d.rendered].depth_at(d.pixel).unwrap();
        // d softplus(gap) / d t_truth = logistic(gap) > 0, and the negation for the shown body
        assert!(raster::logistic(gap) > 0.0);
    }
    let l = ordinal_depth_loss(&out, &mask).unwrap();
    assert!(l.per_body_depth_gradients[&1] > 0.0);
    assert!(l.per_body_depth_gradients[&2] < 0.0);
}

/// Loss over a fixed pixel set, with depths read from a fresh render.
#[test]
fn depth_gradient_matches_frozen_coverage_differences() {
    let (scene, mask) = common::inverted_panels(false);
    let err = checks::ordinal_gradient_error(&scene, &mask, 1e-5);
    assert!(err <= 1e-5, "{err}");
}

#[test]
fn normalized_depth_steps_restore_the_mask() {
    let (mut scene, mask) = common::inverted_panels(false);
    let mut flipped_at = None;
    for it in 0..60 {
        let out = render(&scene).unwrap();
        if out.instance == mask {
            flipped_at = Some(it);
            break;
        }
        let g = ordinal_depth_loss(&out, &mask)
            .unwrap()
            .per_body_depth_gradients;
        let scale = g.values().fold(0.0f64, |m, v| m.max(v.abs()));
        let t: Vec<Vec3> = scene
            .bodies()
            .iter()
            .map(|b| b.translation - Vec3::new(0.0, 0.0, 0.05 * g[&b.id] / scale))
            .collect();
        scene = scene.with_translations(&t).unwrap();
    }
    assert!(flipped_at.is_some());
}

#[test]
fn renders_are_identical_for_any_worker_count() {
    for seed in 0..10 {
        let scene = common::random_render_scene(seed);
        let one = with_threads(1, || render(&scene).unwrap());
        for threads in [2, 4, 16] {
            let many = with_threads(threads, || render(&scene).unwrap());
            assert_eq!(one.instance, many.instance);
            for (id, map) in &one.depths {
                let other = &many.depths[id];
                assert!(map
                    .raw()
                    .iter()
                    .zip(other.raw())
                    .all(|(a, b)| a.to_bits() == b.to_bits()));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn instance_map_is_the_depth_argmin(seed in 0u64..100_000) {
        let out = render(&common::random_render_scene(seed)).unwrap();
        assert_consistent(&out);
    }

    #[test]
    fn ordinal_loss_is_zero_exactly_without_disagreement(seed in 0u64..100_000, other in 0u64..100_000) {
        let scene = common::random_render_scene(seed);
        let out = render(&scene).unwrap();
        let agree = ordinal_depth_loss(&out, &out.instance).unwrap();
        prop_assert_eq!(agree.loss, 0.0);
        prop_assert_eq!(agree.disagreement_pixels, 0);
        // a mask from another placement of the same bodies
        let moved = common::random_render_scene(other);
        if moved.ids() == scene.ids() {
            let mask = render(&scene.with_translations(&moved.translations()).unwrap()).unwrap().instance;
            let l = ordinal_depth_loss(&out, &mask).unwrap();
            prop_assert!(l.loss >= 0.0);
            prop_assert_eq!(l.loss == 0.0, l.disagreement_pixels == 0);
        }
    }
}
