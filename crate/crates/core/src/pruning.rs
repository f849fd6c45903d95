//! Caps the number of grasp labels per object while keeping them spread out.
//!
//! Selection is greedy farthest-point sampling on the pose encoding, seeded at
//! the medoid (the pose with the smallest summed distance to all others).
//! Every tie goes to the lower original index, so the result depends only on
//! the input order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{GraspSet, PoseVector};
use crate::metrics::coverage_rate_vectors;

pub const DEFAULT_CAP: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeedRule {
    MedoidStart,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PruneConfig {
    pub cap: usize,
    pub seed_rule: SeedRule,
}

impl Default for PruneConfig {
    fn default() -> Self {
        PruneConfig {
            cap: DEFAULT_CAP,
            seed_rule: SeedRule::MedoidStart,
        }
    }
}

impl PruneConfig {
    pub fn with_cap(cap: usize) -> Self {
        PruneConfig {
            cap,
            ..PruneConfig::default()
        }
    }
}

/// Indices of the retained poses, ascending.
pub fn prune_indices(poses: &[PoseVector], config: &PruneConfig) -> Result<Vec<usize>> {
    if config.cap == 0 {
        return Err(Error::Validation("prune cap must be at least 1".into()));
    }
    let n = poses.len();
    if n <= config.cap {
        return Ok((0..n).collect());
    }

    let dist = |i: usize, j: usize| poses[i].distance(&poses[j], false);
    let SeedRule::MedoidStart = config.seed_rule;
    let sums: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| (0..n).map(|j| dist(i, j)).sum())
        .collect();
    let seed = argmin_first(&sums);

    let mut selected = vec![false; n];
    selected[seed] = true;
    let mut order = vec![seed];
    let mut nearest: Vec<f64> = (0..n).map(|j| dist(seed, j)).collect();
    while order.len() < config.cap {
        let mut best = usize::MAX;
        let mut best_d = f64::NEG_INFINITY;
        for (j, &d) in nearest.iter().enumerate() {
            if !selected[j] && d > best_d {
                best = j;
                best_d = d;
            }
        }
        selected[best] = true;
        order.push(best);
        for (j, near) in nearest.iter_mut().enumerate() {
            let d = dist(best, j);
            if d < *near {
                *near = d;
            }
        }
    }
    order.sort_unstable();
    Ok(order)
}

fn argmin_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// Returns at most `config.cap` labels, chosen for diversity, in their
/// original order. Sets already under the cap come back unchanged.
pub fn prune_labels(labels: &GraspSet, config: &PruneConfig) -> Result<GraspSet> {
    if labels.len() <= config.cap {
        if config.cap == 0 {
            return Err(Error::Validation("prune cap must be at least 1".into()));
        }
        return Ok(labels.clone());
    }
    let idx = prune_indices(&labels.encode()?, config)?;
    Ok(labels.select(&idx))
}

/// Fraction of the original labels within `theta` of some retained label.
pub fn pruning_coverage(original: &GraspSet, pruned: &GraspSet, theta: f64) -> Result<f64> {
    if let Some(k) = pruned
        .poses()
        .iter()
        .position(|p| !original.poses().contains(p))
    {
        return Err(Error::Subset(k));
    }
    coverage_rate_vectors(&pruned.encode()?, &original.encode()?, theta, false)
}
