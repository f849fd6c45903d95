//! Parametric parallel-jaw gripper made of three boxes.
//!
//! Gripper frame: `+x` is the approach direction, `y` is the closing axis and
//! `z` spans the finger height. The grasp center sits at the origin, midway
//! between the fingers. Each finger is centered on the origin along `x`; the
//! palm sits directly behind the fingers and spans both of them.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::GraspPose;
use crate::scene::Scene;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GripperModel {
    pub finger_length: f64,
    pub finger_thickness: f64,
    pub finger_height: f64,
    pub palm_depth: f64,
    pub base_width_margin: f64,
}

impl Default for GripperModel {
    fn default() -> Self {
        GripperModel {
            finger_length: 0.06,
            finger_thickness: 0.01,
            finger_height: 0.02,
            palm_depth: 0.02,
            base_width_margin: 0.0,
        }
    }
}

impl GripperModel {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.finger_length,
            self.finger_thickness,
            self.finger_height,
            self.palm_depth,
        ];
        if dims.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return Err(Error::Validation(format!("gripper dimensions must be positive: {self:?}")));
        }
        if !(self.base_width_margin >= 0.0) {
            return Err(Error::Validation("base_width_margin must be >= 0".into()));
        }
        Ok(())
    }

    /// Distance between the finger inner faces at a given pose width.
    pub fn opening(&self, width: f64) -> f64 {
        width + self.base_width_margin
    }
}

/// Box with center, unit axes (matrix columns) and half extents along them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBox {
    pub center: Vector3<f64>,
    pub axes: Matrix3<f64>,
    pub half_extents: Vector3<f64>,
}

impl OrientedBox {
    pub fn volume(&self) -> f64 {
        8.0 * self.half_extents.x * self.half_extents.y * self.half_extents.z
    }

    /// True when `p` is strictly inside; points on a face are outside.
    pub fn contains_strict(&self, p: &Vector3<f64>) -> bool {
        let d = p - self.center;
        (0..3).all(|k| d.dot(&self.axes.column(k)).abs() < self.half_extents[k])
    }

    pub fn corners(&self) -> [Vector3<f64>; 8] {
        let mut out = [Vector3::zeros(); 8];
        for (n, corner) in out.iter_mut().enumerate() {
            let mut c = self.center;
            for k in 0..3 {
                let sign = if n >> k & 1 == 1 { 1.0 } else { -1.0 };
                c += self.axes.column(k) * (sign * self.half_extents[k]);
            }
            *corner = c;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GripperBoxes {
    pub left_finger: OrientedBox,
    pub right_finger: OrientedBox,
    pub palm: OrientedBox,
}

impl GripperBoxes {
    pub fn as_array(&self) -> [OrientedBox; 3] {
        [self.left_finger, self.right_finger, self.palm]
    }
}

/// `(center, half_extents)` of the three boxes in the gripper frame.
fn local_boxes(width: f64, model: &GripperModel) -> [(Vector3<f64>, Vector3<f64>); 3] {
    let half_open = model.opening(width) / 2.0;
    let t = model.finger_thickness;
    let half_len = model.finger_length / 2.0;
    let half_h = model.finger_height / 2.0;
    let finger_half = Vector3::new(half_len, t / 2.0, half_h);
    [
        (Vector3::new(0.0, half_open + t / 2.0, 0.0), finger_half),
        (Vector3::new(0.0, -(half_open + t / 2.0), 0.0), finger_half),
        (
            Vector3::new(-(half_len + model.palm_depth / 2.0), 0.0, 0.0),
            Vector3::new(model.palm_depth / 2.0, half_open + t, half_h),
        ),
    ]
}

pub fn gripper_boxes(pose: &GraspPose, model: &GripperModel) -> GripperBoxes {
    let [l, r, p] = local_boxes(pose.width, model).map(|(center, half_extents)| OrientedBox {
        center: pose.transform_point(&center),
        axes: pose.rotation,
        half_extents,
    });
    GripperBoxes {
        left_finger: l,
        right_finger: r,
        palm: p,
    }
}

/// True when no scene point lies strictly inside a finger or the palm. Points
/// between the fingers are the grasped matter and do not count.
pub fn collision_free(pose: &GraspPose, scene: &Scene, model: &GripperModel) -> bool {
    let boxes = local_boxes(pose.width, model);
    let reach = boxes
        .iter()
        .map(|(c, h)| c.abs() + h)
        .fold(Vector3::zeros(), |acc: Vector3<f64>, v| acc.sup(&v))
        .norm();
    let rt = pose.rotation.transpose();
    !scene.points().iter().any(|p| {
        let rel = p - pose.translation;
        if rel.norm_squared() >= reach * reach {
            return false;
        }
        let local = rt * rel;
        boxes.iter().any(|(center, half)| {
            let d = local - center;
            d.x.abs() < half.x && d.y.abs() < half.y && d.z.abs() < half.z
        })
    })
}
