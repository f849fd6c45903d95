//! Flat row-major buffer entry points for foreign callers.
//!
//! Each function checks buffer shapes, converts into the typed API and
//! delegates, so results match the typed calls exactly.

use nalgebra::Vector3;

use crate::dataset::{select_candidate_indices, SelectionMode};
use crate::error::{Error, Result};
use crate::geometry::{GraspSet, PoseVector};
use crate::gripper::GripperModel;
use crate::metrics::{evaluate, MetricConfig, MetricReport};
use crate::pruning::{prune_indices, PruneConfig};
use crate::scene::Scene;
use crate::view::{scene_to_tokens_with, MeanRgb, TokenOutput, ViewConfig};

/// A borrowed row-major matrix.
#[derive(Debug, Clone, Copy)]
pub struct BufferView<'a> {
    pub data: &'a [f64],
    pub rows: usize,
    pub cols: usize,
}

impl<'a> BufferView<'a> {
    pub fn new(data: &'a [f64], rows: usize, cols: usize) -> Self {
        BufferView { data, rows, cols }
    }

    fn check(&self, what: &str, cols: usize) -> Result<()> {
        if self.cols != cols {
            return Err(Error::Dimension(format!(
                "{what} buffer has {} columns, expected {cols}",
                self.cols
            )));
        }
        if self.data.len() != self.rows * self.cols {
            return Err(Error::Dimension(format!(
                "{what} buffer holds {} values, shape {}x{} needs {}",
                self.data.len(),
                self.rows,
                self.cols,
                self.rows * self.cols
            )));
        }
        Ok(())
    }

    fn rows_iter(&self) -> impl Iterator<Item = &'a [f64]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }
}

pub fn poses_from_buffer(buf: BufferView<'_>) -> Result<Vec<PoseVector>> {
    buf.check("pose", 7)?;
    Ok(buf
        .rows_iter()
        .map(|r| PoseVector::from(<[f64; 7]>::try_from(r).expect("row has 7 values")))
        .collect())
}

fn points_from_buffer(buf: BufferView<'_>, what: &str) -> Result<Vec<Vector3<f64>>> {
    buf.check(what, 3)?;
    Ok(buf.rows_iter().map(|r| Vector3::new(r[0], r[1], r[2])).collect())
}

pub fn evaluate_buffers(
    preds: BufferView<'_>,
    confidences: Option<&[f64]>,
    gts: BufferView<'_>,
    points: BufferView<'_>,
    config: &MetricConfig,
    model: &GripperModel,
) -> Result<MetricReport> {
    let p = poses_from_buffer(preds)?;
    let g = poses_from_buffer(gts)?;
    let scene = Scene::from_points(points_from_buffer(points, "point")?)?;
    let preds = GraspSet::from_vectors(&p, confidences.map(<[f64]>::to_vec))?;
    let gts = GraspSet::from_vectors(&g, None)?;
    evaluate(&preds, &gts, &scene, config, model)
}

pub fn prune_buffer(poses: BufferView<'_>, cap: usize) -> Result<Vec<usize>> {
    let p = poses_from_buffer(poses)?;
    if p.is_empty() {
        return Err(Error::Validation("cannot prune an empty pose buffer".into()));
    }
    prune_indices(&p, &PruneConfig::with_cap(cap))
}

pub fn select_candidates_buffer(
    poses: BufferView<'_>,
    confidences: Option<&[f64]>,
    k: usize,
    mode: SelectionMode,
    seed: u64,
) -> Result<Vec<usize>> {
    let p = poses_from_buffer(poses)?;
    select_candidate_indices(p.len(), confidences, k, mode, seed)
}

/// `colors` may be omitted for a uniform gray cloud.
pub fn scene_to_tokens_buffer(
    points: BufferView<'_>,
    colors: Option<BufferView<'_>>,
    config: &ViewConfig,
) -> Result<TokenOutput> {
    let pts = points_from_buffer(points, "point")?;
    let scene = match colors {
        Some(c) => {
            let rgb = points_from_buffer(c, "color")?;
            Scene::new(pts, rgb.iter().map(|v| [v.x, v.y, v.z]).collect())?
        }
        None => Scene::from_points(pts)?,
    };
    scene_to_tokens_with(&scene, config, &MeanRgb)
}
