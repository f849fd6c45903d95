//! Grasp-set evaluation: coverage rate, earth mover's distance, collision-free
//! rate and the EMD-weighted collision-free rate.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::CostMatrix;
use crate::error::{Error, Result};
use crate::geometry::{GraspSet, PoseVector};
use crate::gripper::{collision_free, GripperModel};
use crate::scene::Scene;
use crate::transport::uniform_transport_cost;

pub const DEFAULT_THRESHOLDS: [f64; 3] = [0.4, 0.3, 0.2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub thresholds: Vec<f64>,
    pub include_width_in_distance: bool,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
            include_width_in_distance: false,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if self.thresholds.is_empty() {
            return Err(Error::Validation("at least one coverage threshold is required".into()));
        }
        if self.thresholds.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(Error::Validation(format!(
                "thresholds must be positive: {:?}",
                self.thresholds
            )));
        }
        if self.thresholds.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Validation(format!(
                "thresholds must be strictly decreasing: {:?}",
                self.thresholds
            )));
        }
        Ok(())
    }
}

/// Report key for a coverage threshold, e.g. `cr@0.4`.
pub fn coverage_key(theta: f64) -> String {
    format!("cr@{theta}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub cr_at: BTreeMap<String, f64>,
    pub emd: f64,
    pub cfr: f64,
    pub ew_cfr: f64,
}

/// Fraction of ground-truth poses with a prediction within `theta`.
pub fn coverage_rate_vectors(preds: &[PoseVector], gts: &[PoseVector], theta: f64, include_width: bool) -> Result<f64> {
    if gts.is_empty() {
        return Err(Error::EmptyGroundTruth);
    }
    let covered = gts
        .iter()
        .filter(|g| preds.iter().any(|p| p.distance(g, include_width) <= theta))
        .count();
    Ok(covered as f64 / gts.len() as f64)
}

pub fn coverage_rate(preds: &GraspSet, gts: &GraspSet, theta: f64) -> Result<f64> {
    if gts.is_empty() {
        return Err(Error::EmptyGroundTruth);
    }
    coverage_rate_vectors(&preds.encode()?, &gts.encode()?, theta, false)
}

/// Nearest-prediction distance for every ground-truth pose; `+inf` when there
/// are no predictions.
fn nearest_distances(preds: &[PoseVector], gts: &[PoseVector], include_width: bool) -> Vec<f64> {
    gts.par_iter()
        .map(|g| {
            preds
                .iter()
                .map(|p| p.distance(g, include_width))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

fn distance_matrix(preds: &[PoseVector], gts: &[PoseVector], include_width: bool) -> CostMatrix {
    let values: Vec<f64> = preds
        .par_iter()
        .flat_map_iter(|p| gts.iter().map(move |g| p.distance(g, include_width)))
        .collect();
    CostMatrix::new(preds.len(), gts.len(), values).expect("distances are finite and nonnegative")
}

/// Exact optimal-transport cost between uniform masses on both sets.
pub fn emd_vectors(preds: &[PoseVector], gts: &[PoseVector], include_width: bool) -> Result<f64> {
    if preds.is_empty() {
        return Err(Error::EmptyPrediction);
    }
    if gts.is_empty() {
        return Err(Error::EmptyGroundTruth);
    }
    Ok(uniform_transport_cost(&distance_matrix(preds, gts, include_width)))
}

pub fn emd(preds: &GraspSet, gts: &GraspSet) -> Result<f64> {
    if preds.is_empty() {
        return Err(Error::EmptyPrediction);
    }
    if gts.is_empty() {
        return Err(Error::EmptyGroundTruth);
    }
    emd_vectors(&preds.encode()?, &gts.encode()?, false)
}

pub fn cfr(preds: &GraspSet, scene: &Scene, model: &GripperModel) -> Result<f64> {
    if preds.is_empty() {
        return Err(Error::EmptyPrediction);
    }
    model.validate()?;
    let free = preds
        .poses()
        .par_iter()
        .filter(|g| collision_free(g, scene, model))
        .count();
    Ok(free as f64 / preds.len() as f64)
}

/// `cfr / (1 + emd)`.
pub fn ew_cfr_from(cfr: f64, emd: f64) -> f64 {
    cfr / (1.0 + emd)
}

pub fn ew_cfr(preds: &GraspSet, gts: &GraspSet, scene: &Scene, model: &GripperModel) -> Result<f64> {
    let rate = cfr(preds, scene, model)?;
    let dist = emd(preds, gts)?;
    Ok(ew_cfr_from(rate, dist))
}

/// Every metric for one scene.
pub fn evaluate(
    preds: &GraspSet,
    gts: &GraspSet,
    scene: &Scene,
    config: &MetricConfig,
    model: &GripperModel,
) -> Result<MetricReport> {
    config.validate()?;
    if preds.is_empty() {
        return Err(Error::EmptyPrediction);
    }
    if gts.is_empty() {
        return Err(Error::EmptyGroundTruth);
    }
    let p = preds.encode()?;
    let g = gts.encode()?;
    let width = config.include_width_in_distance;

    let nearest = nearest_distances(&p, &g, width);
    let cr_at = config
        .thresholds
        .iter()
        .map(|&theta| {
            let covered = nearest.iter().filter(|d| **d <= theta).count();
            (coverage_key(theta), covered as f64 / g.len() as f64)
        })
        .collect();
    let emd = emd_vectors(&p, &g, width)?;
    let cfr = cfr(preds, scene, model)?;
    Ok(MetricReport {
        cr_at,
        emd,
        cfr,
        ew_cfr: ew_cfr_from(cfr, emd),
    })
}
