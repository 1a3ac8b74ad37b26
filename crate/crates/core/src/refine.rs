//! Gradient descent over per-body translations.
//!
//! The objective is
//! `lambda_p * L_P + lambda_d * L_D + lambda_anchor * sum_j |t_j - t_j0|^2`,
//! re-linearized every iteration: the broad phase, the render and the
//! disagreement set are recomputed for the current placement. Distance
//! fields live in body frames and do not depend on translation, so each is
//! voxelized once per run. Steps that do not lower
//! the objective are halved; accepted steps let the step size double again,
//! up to [`MAX_STEP_GROWTH`] times the configured size.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::image::InstanceMap;
use crate::metrics;
use std::cell::RefCell;

use crate::penetration::{
    scene_penetration_cached, FieldCache, PenetrationConfig, RobustifierConfig,
};
use crate::raster;
use crate::scene::Scene;
use crate::sdf;

/// Halvings tried per iteration before giving up on finding a descent step.
pub const MAX_HALVINGS: u32 = 40;
/// Upper bound on step growth relative to `step_size`.
pub const MAX_STEP_GROWTH: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefineConfig {
    pub lambda_p: f64,
    pub lambda_d: f64,
    pub lambda_anchor: f64,
    /// Meters per unit gradient.
    pub step_size: f64,
    pub max_iters: usize,
    /// Stop once an accepted step lowers the objective by less than this.
    pub convergence_tol: f64,
    pub voxel_resolution: usize,
    pub padding: f64,
    pub robustifier: RobustifierConfig,
    /// Whether the penetration gradient moves bodies in x and y as well as z.
    pub optimize_xy: bool,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            lambda_p: 1.0,
            lambda_d: 0.1,
            lambda_anchor: 0.01,
            step_size: 0.02,
            max_iters: 200,
            convergence_tol: 1e-8,
            voxel_resolution: sdf::DEFAULT_RESOLUTION,
            padding: sdf::DEFAULT_PADDING,
            robustifier: RobustifierConfig::default(),
            optimize_xy: true,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        for (name, w) in [
            ("lambda_p", self.lambda_p),
            ("lambda_d", self.lambda_d),
            ("lambda_anchor", self.lambda_anchor),
        ] {
            if !(w >= 0.0 && w.is_finite()) {
                return bad(format!("{name} = {w} must be finite and non-negative"));
            }
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return bad(format!("step size {} must be positive", self.step_size));
        }
        if self.max_iters == 0 {
            return bad("max_iters must be positive".into());
        }
        if self.convergence_tol.is_nan() || self.convergence_tol < 0.0 {
            return bad("convergence_tol must be non-negative".into());
        }
        if self.voxel_resolution < 2 {
            return bad("voxel_resolution must be at least 2".into());
        }
        RobustifierConfig::new(self.robustifier.sigma)?;
        Ok(())
    }

    fn penetration(&self) -> PenetrationConfig {
        PenetrationConfig {
            resolution: self.voxel_resolution,
            padding: self.padding,
            robustifier: self.robustifier,
        }
    }
}

/// Objective terms and metrics of one accepted iterate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    #[serde(rename = "L_P")]
    pub loss_p: f64,
    #[serde(rename = "L_D")]
    pub loss_d: f64,
    /// Weighted anchor term.
    pub anchor: f64,
    pub total: f64,
    pub collision_count: usize,
    /// Against the mask-implied ordering; `None` without a mask.
    pub depth_order_accuracy: Option<f64>,
    /// Step size that produced this iterate (0 for the initial one).
    pub step: f64,
    /// Translations in body order.
    pub translations: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineTrace {
    /// Initial state followed by every accepted iterate.
    pub records: Vec<TraceRecord>,
    pub converged: bool,
    pub final_scene: Scene,
}

impl RefineTrace {
    pub fn last(&self) -> &TraceRecord {
        self.records.last().expect("trace holds the initial record")
    }

    /// One JSON object per line.
    pub fn to_json_lines(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
            .collect()
    }
}

struct Evaluation {
    loss_p: f64,
    loss_d: f64,
    anchor: f64,
    total: f64,
    collision_count: usize,
    accuracy: Option<f64>,
    gradients: Vec<Vec3>,
}

struct Objective<'a> {
    anchors: Vec<Vec3>,
    mask: Option<&'a InstanceMap>,
    config: &'a RefineConfig,
    penetration: PenetrationConfig,
    fields: RefCell<FieldCache>,
}

impl Objective<'_> {
    fn evaluate(&self, scene: &Scene) -> Result<Evaluation> {
        let cfg = self.config;
        let n = scene.len();
        let mut gradients = vec![Vec3::zeros(); n];

        let pen =
            scene_penetration_cached(scene, &self.penetration, &mut self.fields.borrow_mut())?;
        if cfg.lambda_p > 0.0 {
            for (g, body) in gradients.iter_mut().zip(scene.bodies()) {
                let mut d = pen.gradient(body.id) * cfg.lambda_p;
                if !cfg.optimize_xy {
                    d.x = 0.0;
                    d.y = 0.0;
                }
                *g += d;
            }
        }

        let (loss_d, accuracy) = match self.mask {
            Some(mask) => {
                let render = raster::render(scene)?;
                let ordinal = raster::ordinal_depth_loss(&render, mask)?;
                if cfg.lambda_d > 0.0 {
                    for (g, body) in gradients.iter_mut().zip(scene.bodies()) {
                        g.z += cfg.lambda_d * ordinal.per_body_depth_gradients[&body.id];
                    }
                }
                let acc = metrics::mask_depth_order(scene, &render, mask)?.fraction();
                (ordinal.loss, Some(acc))
            }
            None => (0.0, None),
        };

        let mut anchor = 0.0;
        for ((g, body), t0) in gradients.iter_mut().zip(scene.bodies()).zip(&self.anchors) {
            let delta = body.translation - t0;
            anchor += delta.norm_squared();
            *g += delta * (2.0 * cfg.lambda_anchor);
        }
        let anchor = cfg.lambda_anchor * anchor;
        let total = cfg.lambda_p * pen.loss + cfg.lambda_d * loss_d + anchor;

        Ok(Evaluation {
            loss_p: pen.loss,
            loss_d,
            anchor,
            total,
            collision_count: pen.collision_count(),
            accuracy,
            gradients,
        })
    }

    /// Like `evaluate`, but placements that push geometry behind the camera
    /// count as infeasible rather than failing the run.
    fn try_evaluate(&self, scene: &Scene) -> Result<Option<Evaluation>> {
        match self.evaluate(scene) {
            Ok(e) => Ok(Some(e)),
            Err(Error::BehindCamera { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn record(&self, iteration: usize, step: f64, scene: &Scene, e: &Evaluation) -> TraceRecord {
        TraceRecord {
            iteration,
            loss_p: e.loss_p,
            loss_d: e.loss_d,
            anchor: e.anchor,
            total: e.total,
            collision_count: e.collision_count,
            depth_order_accuracy: e.accuracy,
            step,
            translations: scene
                .bodies()
                .iter()
                .map(|b| b.translation.into())
                .collect(),
        }
    }
}

/// Refines body translations; returns the final scene and the trace.
///
/// A mask is required when `lambda_d > 0`; with `lambda_d = 0` it is only
/// used for the depth-order accuracy recorded in the trace.
pub fn refine(
    scene: &Scene,
    mask: Option<&InstanceMap>,
    config: &RefineConfig,
) -> Result<(Scene, RefineTrace)> {
    config.validate()?;
    if config.lambda_d > 0.0 && mask.is_none() {
        return Err(Error::InvalidConfig(
            "lambda_d > 0 requires an instance mask".into(),
        ));
    }
    if let Some(m) = mask {
        m.check_against(scene)?;
    }

    let objective = Objective {
        anchors: scene.translations(),
        mask,
        config,
        penetration: config.penetration(),
        fields: RefCell::new(FieldCache::new()),
    };

    let mut current_scene = scene.clone();
    let mut current = objective.evaluate(&current_scene)?;
    let mut records = vec![objective.record(0, 0.0, &current_scene, &current)];
    let mut step = config.step_size;
    let mut converged = false;

    for iteration in 1..=config.max_iters {
        if current.gradients.iter().all(|g| *g == Vec3::zeros()) {
            converged = true;
            break;
        }

        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let proposal: Vec<Vec3> = current_scene
                .bodies()
                .iter()
                .zip(&current.gradients)
                .map(|(b, g)| b.translation - g * step)
                .collect();
            let candidate = current_scene.with_translations(&proposal)?;
            match objective.try_evaluate(&candidate)? {
                Some(e) if e.total < current.total => {
                    accepted = Some((candidate, e));
                    break;
                }
                _ => step *= 0.5,
            }
        }
        let Some((next_scene, next)) = accepted else {
            log::debug!("no descent step after {MAX_HALVINGS} halvings at iteration {iteration}");
            converged = true;
            break;
        };

        let decrease = current.total - next.total;
        records.push(objective.record(iteration, step, &next_scene, &next));
        current_scene = next_scene;
        current = next;
        step = (step * 2.0).min(config.step_size * MAX_STEP_GROWTH);
        if decrease < config.convergence_tol {
            converged = true;
            break;
        }
    }

    let trace = RefineTrace {
        records,
        converged,
        final_scene: current_scene.clone(),
    };
    Ok((current_scene, trace))
}
