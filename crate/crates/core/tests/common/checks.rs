//! Property checks shared by the module suites and the acceptance target.

use coherent::penetration::{PenetrationConfig, PenetrationModel};
use coherent::raster::{
    disagreements, ordinal_depth_loss, render, softplus, Disagreement, RenderOutput,
};
use coherent::{InstanceMap, Scene, Vec3};

/// First pixel where the instance or scene depth map differs from the
/// argmin of the covering per-body depths, ties going to the lower id.
pub fn argmin_mismatch(out: &RenderOutput) -> Option<usize> {
    let (w, h) = out.instance.dims();
    (0..w * h).find(|&p| {
        let mut best: Option<(u32, f64)> = None;
        for (&id, map) in &out.depths {
            if let Some(d) = map.depth_at(p) {
                // ascending ids: a later body must be strictly nearer to win
                if best.is_none_or(|(_, z)| d < z) {
                    best = Some((id, d));
                }
            }
        }
        let expected = (best.map_or(0, |(id, _)| id), best.map(|(_, z)| z));
        (out.instance.data()[p], out.scene_depth.depth_at(p)) != expected
    })
}

/// Largest per-body relative error between the analytic gradient and
/// central differences of the frozen-field loss.
pub fn penetration_gradient_error(scene: &Scene, cfg: &PenetrationConfig, h: f64) -> f64 {
    let model = PenetrationModel::build(scene, cfg).unwrap();
    let t0 = scene.translations();
    let report = model.evaluate(&t0).unwrap();
    let mut worst: f64 = 0.0;
    for (b, body) in scene.bodies().iter().enumerate() {
        let mut fd = Vec3::zeros();
        for a in 0..3 {
            let mut plus = t0.clone();
            let mut minus = t0.clone();
            plus[b][a] += h;
            minus[b][a] -= h;
            fd[a] = (model.evaluate(&plus).unwrap().loss - model.evaluate(&minus).unwrap().loss)
                / (2.0 * h);
        }
        let an = report.gradient(body.id);
        assert!(an.norm() > 0.0, "body {} has no gradient", body.id);
        worst = worst.max((fd - an).norm() / an.norm());
    }
    worst
}

fn frozen_loss(scene: &Scene, set: &[Disagreement]) -> f64 {
    let out = render(scene).unwrap();
    set.iter()
        .map(|d| {
            softplus(
                out.depths[&d.truth].depth_at(d.pixel).unwrap()
                    - out.depths[&d.rendered].depth_at(d.pixel).unwrap(),
            )
        })
        .sum()
}

pub fn ordinal_gradient_error(scene: &Scene, mask: &InstanceMap, h: f64) -> f64 {
    let out = render(scene).unwrap();
    let (set, _) = disagreements(&out, mask).unwrap();
    let report = ordinal_depth_loss(&out, mask).unwrap();
    let mut worst: f64 = 0.0;
    for (k, body) in scene.bodies().iter().enumerate() {
        let shifted = |dz: f64| {
            let mut t = scene.translations();
            t[k].z += dz;
            scene.with_translations(&t).unwrap()
        };
        let fd = (frozen_loss(&shifted(h), &set) - frozen_loss(&shifted(-h), &set)) / (2.0 * h);
        let an = report.per_body_depth_gradients[&body.id];
        worst = worst.max((fd - an).abs() / an.abs());
    }
    worst
}
