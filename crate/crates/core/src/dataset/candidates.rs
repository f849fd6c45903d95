//! Candidate filtering and selection applied to raw predictions before
//! evaluation.

use serde::{Deserialize, Serialize};

use super::split::SplitMix64;
use crate::error::{Error, Result};
use crate::geometry::{pose_to_vector, GraspSet, PoseVector};

pub const DEFAULT_CANDIDATES: usize = 600;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    Uniform,
    #[default]
    TopConfidence,
}

/// Indices of in-range encodings, ascending.
pub fn valid_indices(poses: &[PoseVector]) -> Vec<usize> {
    poses
        .iter()
        .enumerate()
        .filter(|(_, p)| p.is_in_bounds())
        .map(|(i, _)| i)
        .collect()
}

/// Drops poses whose encoding is out of range or unrepresentable. Returns the
/// kept set and the number dropped.
pub fn filter_valid_poses(preds: &GraspSet) -> (GraspSet, usize) {
    let keep: Vec<usize> = preds
        .poses()
        .iter()
        .enumerate()
        .filter(|(_, g)| pose_to_vector(g).is_ok_and(|v| v.is_in_bounds()))
        .map(|(i, _)| i)
        .collect();
    let dropped = preds.len() - keep.len();
    (preds.select(&keep), dropped)
}

/// Indices of the selected candidates, ascending.
///
/// Uniform mode draws `k` without replacement with a seeded partial
/// Fisher–Yates pass. Top mode keeps the `k` highest confidences, lower index
/// first on ties.
pub fn select_candidate_indices(
    n: usize,
    confidences: Option<&[f64]>,
    k: usize,
    mode: SelectionMode,
    seed: u64,
) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::EmptyPrediction);
    }
    if k == 0 {
        return Err(Error::Validation("candidate count k must be at least 1".into()));
    }
    if mode == SelectionMode::TopConfidence && confidences.is_none() {
        return Err(Error::MissingConfidence);
    }
    if let Some(c) = confidences {
        if c.len() != n {
            return Err(Error::Dimension(format!("{} confidences for {n} poses", c.len())));
        }
    }
    if n <= k {
        return Ok((0..n).collect());
    }
    let mut idx: Vec<usize> = (0..n).collect();
    match mode {
        SelectionMode::Uniform => {
            let mut rng = SplitMix64::new(seed);
            for i in 0..k {
                let j = i + rng.below((n - i) as u64) as usize;
                idx.swap(i, j);
            }
        }
        SelectionMode::TopConfidence => {
            let c = confidences.expect("checked above");
            // stable: equal confidences keep index order
            idx.sort_by(|&a, &b| c[b].total_cmp(&c[a]));
        }
    }
    idx.truncate(k);
    idx.sort_unstable();
    Ok(idx)
}

pub fn select_candidates(preds: &GraspSet, k: usize, mode: SelectionMode, seed: u64) -> Result<GraspSet> {
    let idx = select_candidate_indices(preds.len(), preds.confidences(), k, mode, seed)?;
    Ok(preds.select(&idx))
}
