//! Training loss kernels: matched L1 pose regression, focal confidence loss and
//! masked token cross-entropy, summed into one report.
//!
//! The gradients exist to validate the kernels against finite differences;
//! nothing here backpropagates through a model.

use serde::{Deserialize, Serialize};

use crate::assignment::{hungarian, l1_cost_matrix, Assignment};
use crate::error::{Error, Result};
use crate::geometry::{GraspSet, PoseVector};

pub const DEFAULT_FOCAL_ALPHA: f64 = 0.25;
pub const DEFAULT_FOCAL_GAMMA: f64 = 2.0;

fn check_pairs(preds: &[PoseVector], gts: &[PoseVector], assignment: &Assignment) -> Result<()> {
    if assignment.pairs.is_empty() {
        return Err(Error::EmptyAssignment);
    }
    for &(i, j) in &assignment.pairs {
        if i >= preds.len() || j >= gts.len() {
            return Err(Error::Dimension(format!(
                "pair ({i}, {j}) out of range for {} predictions and {} ground truths",
                preds.len(),
                gts.len()
            )));
        }
    }
    Ok(())
}

/// Mean L1 distance over matched pairs, on encoded poses.
pub fn l1_regression_loss_vectors(
    preds: &[PoseVector],
    gts: &[PoseVector],
    assignment: &Assignment,
) -> Result<f64> {
    check_pairs(preds, gts, assignment)?;
    let total: f64 = assignment
        .pairs
        .iter()
        .map(|&(i, j)| preds[i].l1_distance(&gts[j]))
        .sum();
    Ok(total / assignment.pairs.len() as f64)
}

pub fn l1_regression_loss(preds: &GraspSet, gts: &GraspSet, assignment: &Assignment) -> Result<f64> {
    l1_regression_loss_vectors(&preds.encode()?, &gts.encode()?, assignment)
}

/// Subgradient of [`l1_regression_loss_vectors`] with respect to each
/// prediction's seven components. Unmatched predictions get zeros; a zero
/// difference contributes 0.
pub fn l1_regression_grad(
    preds: &[PoseVector],
    gts: &[PoseVector],
    assignment: &Assignment,
) -> Result<Vec<[f64; 7]>> {
    check_pairs(preds, gts, assignment)?;
    let scale = 1.0 / assignment.pairs.len() as f64;
    let mut grad = vec![[0.0; 7]; preds.len()];
    for &(i, j) in &assignment.pairs {
        let p = preds[i].to_array();
        let g = gts[j].to_array();
        for k in 0..7 {
            let d = p[k] - g[k];
            grad[i][k] = if d > 0.0 {
                scale
            } else if d < 0.0 {
                -scale
            } else {
                0.0
            };
        }
    }
    Ok(grad)
}

fn check_focal_inputs(confidences: &[f64], labels: &[u8], alpha: f64, gamma: f64) -> Result<()> {
    if confidences.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} confidences for {} labels",
            confidences.len(),
            labels.len()
        )));
    }
    if confidences.is_empty() {
        return Err(Error::Domain("focal loss over an empty set".into()));
    }
    if !(0.0..=1.0).contains(&alpha) || !(gamma >= 0.0) {
        return Err(Error::Domain(format!("alpha = {alpha}, gamma = {gamma}")));
    }
    if let Some(p) = confidences.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
        return Err(Error::Domain(format!("confidence {p} must lie strictly inside (0, 1)")));
    }
    if let Some(l) = labels.iter().find(|l| **l > 1) {
        return Err(Error::Domain(format!("label {l} is not binary")));
    }
    Ok(())
}

/// `(p_t, alpha_t, dp_t/dp)` for one element.
fn focal_terms(p: f64, label: u8, alpha: f64) -> (f64, f64, f64) {
    if label == 1 {
        (p, alpha, 1.0)
    } else {
        (1.0 - p, 1.0 - alpha, -1.0)
    }
}

/// Mean of `-alpha_t (1 - p_t)^gamma ln p_t`.
pub fn focal_loss(confidences: &[f64], labels: &[u8], alpha: f64, gamma: f64) -> Result<f64> {
    check_focal_inputs(confidences, labels, alpha, gamma)?;
    let total: f64 = confidences
        .iter()
        .zip(labels)
        .map(|(&p, &l)| {
            let (pt, at, _) = focal_terms(p, l, alpha);
            -at * (1.0 - pt).powf(gamma) * pt.ln()
        })
        .sum();
    Ok(total / confidences.len() as f64)
}

/// Derivative of [`focal_loss`] with respect to each confidence.
pub fn focal_loss_grad(confidences: &[f64], labels: &[u8], alpha: f64, gamma: f64) -> Result<Vec<f64>> {
    check_focal_inputs(confidences, labels, alpha, gamma)?;
    let n = confidences.len() as f64;
    Ok(confidences
        .iter()
        .zip(labels)
        .map(|(&p, &l)| {
            let (pt, at, dpt) = focal_terms(p, l, alpha);
            let q = 1.0 - pt;
            let modulating = if gamma == 0.0 {
                0.0
            } else {
                gamma * q.powf(gamma - 1.0) * pt.ln()
            };
            let d_dpt = -at * (q.powf(gamma) / pt - modulating);
            d_dpt * dpt / n
        })
        .collect())
}

/// Weighted mean of `-ln P(target)`, normalized by the weight sum.
/// Zero-weight positions are skipped entirely.
pub fn masked_token_ce(distributions: &[Vec<f64>], target_ids: &[usize], weights: &[f64]) -> Result<f64> {
    if distributions.len() != target_ids.len() || distributions.len() != weights.len() {
        return Err(Error::Dimension(format!(
            "{} distributions, {} targets, {} weights",
            distributions.len(),
            target_ids.len(),
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
        return Err(Error::Domain(format!("weight {w} must be finite and nonnegative")));
    }
    let norm: f64 = weights.iter().sum();
    if norm == 0.0 {
        return Err(Error::Domain("every position has zero weight".into()));
    }
    let mut total = 0.0;
    for (pos, ((dist, &target), &w)) in distributions.iter().zip(target_ids).zip(weights).enumerate() {
        let sum: f64 = dist.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || dist.iter().any(|p| *p < 0.0) {
            return Err(Error::Domain(format!("position {pos} is not a probability vector (sum {sum})")));
        }
        if target >= dist.len() {
            return Err(Error::Dimension(format!(
                "target id {target} at position {pos} exceeds vocabulary {}",
                dist.len()
            )));
        }
        if w == 0.0 {
            continue;
        }
        let p = dist[target];
        if p <= 0.0 {
            return Err(Error::Domain(format!("target probability is 0 at supervised position {pos}")));
        }
        total -= w * p.ln();
    }
    Ok(total / norm)
}

/// Optional per-term coefficients; the plain sum uses all ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub qa: f64,
    pub reg: f64,
    pub cls: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            qa: 1.0,
            reg: 1.0,
            cls: 1.0,
        }
    }
}

/// The three loss terms and their sum. Terms are stored after weighting, so
/// `total` is always their plain sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub l_qa: f64,
    pub l_reg: f64,
    pub l_cls: f64,
    pub total: f64,
}

pub fn total_loss(l_qa: f64, l_reg: f64, l_cls: f64) -> Result<LossReport> {
    weighted_total_loss(l_qa, l_reg, l_cls, LossWeights::default())
}

pub fn weighted_total_loss(l_qa: f64, l_reg: f64, l_cls: f64, weights: LossWeights) -> Result<LossReport> {
    let terms = [l_qa * weights.qa, l_reg * weights.reg, l_cls * weights.cls];
    if terms.iter().any(|t| !t.is_finite()) {
        return Err(Error::Domain(format!("non-finite loss term in {terms:?}")));
    }
    Ok(LossReport {
        l_qa: terms[0],
        l_reg: terms[1],
        l_cls: terms[2],
        total: terms[0] + terms[1] + terms[2],
    })
}

/// Matching plus both pose losses for one prediction set.
///
/// Predictions are matched to ground truth on the L1 cost; matched predictions
/// are labeled 1 for the focal term and unmatched ones 0.
pub fn set_prediction_losses(preds: &GraspSet, gts: &GraspSet, alpha: f64, gamma: f64) -> Result<(Assignment, f64, f64)> {
    let confidences = preds.confidences().ok_or(Error::MissingConfidence)?;
    if gts.is_empty() {
        return Err(Error::EmptyGroundTruth);
    }
    let p = preds.encode()?;
    let g = gts.encode()?;
    let assignment = hungarian(&l1_cost_matrix(&p, &g));
    let l_reg = l1_regression_loss_vectors(&p, &g, &assignment)?;
    let labels = assignment.match_labels(p.len());
    let l_cls = focal_loss(confidences, &labels, alpha, gamma)?;
    Ok((assignment, l_reg, l_cls))
}
