//! Scene-level coherency metrics: collision count and depth-order accuracy.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::image::InstanceMap;
use crate::penetration::{scene_penetration, PenetrationConfig, PenetrationReport};
pub use crate::raster::OrderingScore;
use crate::raster::{self, DepthReference, OrdinalDepthReport, RenderOutput};
use crate::scene::Scene;

/// `(nearer, farther)` relations implied by an instance mask.
///
/// A pair is comparable when the two bodies' rendered silhouettes overlap;
/// the body the mask assigns most of that overlap to is the nearer one.
/// Overlaps with no votes, or a tied vote, yield no relation.
pub fn mask_implied_pairs(render: &RenderOutput, mask: &InstanceMap) -> Vec<(u32, u32)> {
    let maps: Vec<(u32, &[f64])> = render.depths.iter().map(|(&id, d)| (id, d.raw())).collect();
    let mut votes: BTreeMap<(u32, u32), (usize, usize)> = BTreeMap::new();
    let mut covering = Vec::with_capacity(maps.len());
    for (pixel, &label) in mask.data().iter().enumerate() {
        if label == 0 {
            continue;
        }
        covering.clear();
        covering.extend(
            maps.iter()
                .filter(|(_, d)| d[pixel].is_finite())
                .map(|(id, _)| *id),
        );
        if covering.len() < 2 || !covering.contains(&label) {
            continue;
        }
        for &other in covering.iter().filter(|&&id| id != label) {
            let key = (label.min(other), label.max(other));
            let entry = votes.entry(key).or_default();
            if label == key.0 {
                entry.0 += 1;
            } else {
                entry.1 += 1;
            }
        }
    }
    votes
        .into_iter()
        .filter_map(|((a, b), (va, vb))| match va.cmp(&vb) {
            std::cmp::Ordering::Greater => Some((a, b)),
            std::cmp::Ordering::Less => Some((b, a)),
            std::cmp::Ordering::Equal => None,
        })
        .collect()
}

/// Depth-order accuracy of `scene` against the ordering its mask implies.
pub fn mask_depth_order(
    scene: &Scene,
    render: &RenderOutput,
    mask: &InstanceMap,
) -> Result<OrderingScore> {
    let pairs = mask_implied_pairs(render, mask);
    raster::depth_order_accuracy(scene, &DepthReference::Pairs(pairs))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairRow {
    /// Field owner.
    pub i: u32,
    /// Vertex owner.
    pub j: u32,
    pub penalty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub collision_count: usize,
    #[serde(rename = "L_P")]
    pub loss_p: f64,
    #[serde(rename = "L_D")]
    pub loss_d: Option<f64>,
    pub depth_order_accuracy: Option<f64>,
    pub ordering: Option<OrderingScore>,
    pub disagreement_pixels: Option<usize>,
    pub skipped_pixels: Option<usize>,
    pub pairs: Vec<PairRow>,
    pub per_body_gradients: BTreeMap<u32, [f64; 3]>,
    pub per_body_depth_gradients: Option<BTreeMap<u32, f64>>,
}

/// Everything [`evaluate_scene`] computed, including the full sub-reports.
pub struct SceneEvaluation {
    pub metrics: MetricsReport,
    pub penetration: PenetrationReport,
    pub ordinal: Option<OrdinalDepthReport>,
    pub render: Option<RenderOutput>,
}

/// Penetration loss and collisions always; ordinal loss and mask-implied
/// depth-order accuracy when a mask is given.
pub fn evaluate_scene(
    scene: &Scene,
    mask: Option<&InstanceMap>,
    config: &PenetrationConfig,
) -> Result<SceneEvaluation> {
    let penetration = scene_penetration(scene, config)?;
    let (ordinal, ordering, render) = match mask {
        Some(mask) => {
            mask.check_against(scene)?;
            let render = raster::render(scene)?;
            let ordinal = raster::ordinal_depth_loss(&render, mask)?;
            let ordering = mask_depth_order(scene, &render, mask)?;
            (Some(ordinal), Some(ordering), Some(render))
        }
        None => (None, None, None),
    };
    let metrics = MetricsReport {
        collision_count: penetration.collision_count(),
        loss_p: penetration.loss,
        loss_d: ordinal.as_ref().map(|o| o.loss),
        depth_order_accuracy: ordering.map(|o| o.fraction()),
        ordering,
        disagreement_pixels: ordinal.as_ref().map(|o| o.disagreement_pixels),
        skipped_pixels: ordinal.as_ref().map(|o| o.skipped_pixels),
        pairs: penetration
            .pair_penalties
            .iter()
            .map(|(&(i, j), &penalty)| PairRow { i, j, penalty })
            .collect(),
        per_body_gradients: penetration
            .per_body_gradients
            .iter()
            .map(|(&id, g)| (id, [g.x, g.y, g.z]))
            .collect(),
        per_body_depth_gradients: ordinal.as_ref().map(|o| o.per_body_depth_gradients.clone()),
    };
    Ok(SceneEvaluation {
        metrics,
        penetration,
        ordinal,
        render,
    })
}
