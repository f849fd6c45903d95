//! Grasp pose representation.
//!
//! A grasp is a rigid gripper placement `(R, T)` plus an opening width. Poses are
//! exchanged as a bounded 7-vector `[x, y, z, rx, ry, rz, width]` where the
//! rotation is `Rz(rz) * Ry(ry) * Rx(rx)`, `x, y, z, rx, ry` live in `[-1, 1]` and
//! `rz` lives in `[0, pi]`. All distances between poses are measured on that
//! encoding.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `R^T R - I` and `det R - 1` for a rotation to be accepted.
pub const ORTHONORMAL_TOL: f64 = 1e-9;

/// Maximum Frobenius reconstruction error accepted when decoding a rotation.
pub const DECODE_TOL: f64 = 1e-6;

/// Decoded angles this close outside their range are clamped back in.
const ANGLE_SLACK: f64 = 1e-9;

/// `|ry|` this close to `pi/2` is treated as gimbal lock.
const GIMBAL_TOL: f64 = 1e-6;

pub const TRANSLATION_RANGE: (f64, f64) = (-1.0, 1.0);
pub const TILT_RANGE: (f64, f64) = (-1.0, 1.0);
pub const YAW_RANGE: (f64, f64) = (0.0, PI);

/// Rotation about x by `rx`, then y by `ry`, then z by `rz` (`Rz * Ry * Rx`).
pub fn euler_to_rotation(rx: f64, ry: f64, rz: f64) -> Matrix3<f64> {
    let (sa, ca) = rx.sin_cos();
    let (sb, cb) = ry.sin_cos();
    let (sc, cc) = rz.sin_cos();
    Matrix3::new(
        cc * cb,
        cc * sb * sa - sc * ca,
        cc * sb * ca + sc * sa,
        sc * cb,
        sc * sb * sa + cc * ca,
        sc * sb * ca - cc * sa,
        -sb,
        cb * sa,
        cb * ca,
    )
}

/// The bounded 7-vector encoding of a grasp.
///
/// Serializes as `[x, y, z, rx, ry, rz, width]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 7]", into = "[f64; 7]")]
pub struct PoseVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub rx: f64,
    pub ry: f64,
    pub rz: f64,
    pub width: f64,
}

impl From<[f64; 7]> for PoseVector {
    fn from(a: [f64; 7]) -> Self {
        PoseVector {
            x: a[0],
            y: a[1],
            z: a[2],
            rx: a[3],
            ry: a[4],
            rz: a[5],
            width: a[6],
        }
    }
}

impl From<PoseVector> for [f64; 7] {
    fn from(v: PoseVector) -> Self {
        v.to_array()
    }
}

impl PoseVector {
    pub fn to_array(&self) -> [f64; 7] {
        [self.x, self.y, self.z, self.rx, self.ry, self.rz, self.width]
    }

    /// Checks every component against its bound, reporting the first violation.
    pub fn check_bounds(&self) -> Result<()> {
        let checks = [
            ("x", self.x, TRANSLATION_RANGE),
            ("y", self.y, TRANSLATION_RANGE),
            ("z", self.z, TRANSLATION_RANGE),
            ("rx", self.rx, TILT_RANGE),
            ("ry", self.ry, TILT_RANGE),
            ("rz", self.rz, YAW_RANGE),
            ("width", self.width, (0.0, f64::INFINITY)),
        ];
        for (field, value, (min, max)) in checks {
            // written so that NaN fails
            if !(value >= min && value <= max) {
                return Err(Error::Range {
                    field,
                    value,
                    min,
                    max,
                });
            }
        }
        Ok(())
    }

    pub fn is_in_bounds(&self) -> bool {
        self.check_bounds().is_ok()
    }

    /// Euclidean distance over `(x, y, z, rx, ry, rz)`, optionally with width.
    pub fn distance(&self, other: &PoseVector, include_width: bool) -> f64 {
        let a = self.to_array();
        let b = other.to_array();
        let n = if include_width { 7 } else { 6 };
        a[..n]
            .iter()
            .zip(&b[..n])
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
            .sqrt()
    }

    /// L1 distance over all seven components.
    pub fn l1_distance(&self, other: &PoseVector) -> f64 {
        self.to_array()
            .iter()
            .zip(other.to_array().iter())
            .map(|(p, q)| (p - q).abs())
            .sum()
    }
}

/// One gripper configuration: rotation, translation and opening width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspPose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub width: f64,
}

impl GraspPose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>, width: f64) -> Result<Self> {
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).amax();
        let det = rotation.determinant();
        if ortho > ORTHONORMAL_TOL || (det - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(Error::Validation(format!(
                "rotation is not orthonormal (|R^T R - I| = {ortho:e}, det = {det})"
            )));
        }
        if !(width >= 0.0) {
            return Err(Error::Validation(format!("width must be >= 0, got {width}")));
        }
        if !translation.iter().all(|t| t.is_finite()) {
            return Err(Error::Validation("translation is not finite".into()));
        }
        Ok(GraspPose {
            rotation,
            translation,
            width,
        })
    }

    pub fn identity() -> Self {
        GraspPose {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
            width: 0.0,
        }
    }

    /// Maps a point from the gripper frame into the scene frame.
    pub fn transform_point(&self, local: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * local + self.translation
    }

    /// Maps a scene-frame point into the gripper frame.
    pub fn inverse_transform_point(&self, world: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * (world - self.translation)
    }
}

/// Builds a pose from its bounded encoding. Fails if any component is out of range.
pub fn pose_from_vector(v: &PoseVector) -> Result<GraspPose> {
    v.check_bounds()?;
    Ok(pose_from_vector_unchecked(v))
}

pub(crate) fn pose_from_vector_unchecked(v: &PoseVector) -> GraspPose {
    GraspPose {
        rotation: euler_to_rotation(v.rx, v.ry, v.rz),
        translation: Vector3::new(v.x, v.y, v.z),
        width: v.width,
    }
}

fn clamp_into(value: f64, (min, max): (f64, f64)) -> Option<f64> {
    if value < min - ANGLE_SLACK || value > max + ANGLE_SLACK {
        None
    } else {
        Some(value.clamp(min, max))
    }
}

/// Recovers the bounded encoding of a pose.
///
/// Only the rotation can make this fail: translation and width are copied as-is,
/// so the result may still violate the translation bounds (see
/// [`PoseVector::check_bounds`]).
pub fn pose_to_vector(g: &GraspPose) -> Result<PoseVector> {
    let r = &g.rotation;
    let sin_ry = (-r[(2, 0)]).clamp(-1.0, 1.0);
    let ry = sin_ry.asin();
    if (ry.abs() - PI / 2.0).abs() < GIMBAL_TOL {
        return Err(Error::Encoding(format!("gimbal lock (ry = {ry})")));
    }
    let rx = r[(2, 1)].atan2(r[(2, 2)]);
    let mut rz = r[(1, 0)].atan2(r[(0, 0)]);
    // atan2 returns (-pi, pi]; a yaw of exactly pi may come back as -pi
    if rz < -PI + ANGLE_SLACK {
        rz += 2.0 * PI;
    }

    let rx = clamp_into(rx, TILT_RANGE)
        .ok_or_else(|| Error::Encoding(format!("rx = {rx} outside [-1, 1]")))?;
    let ry = clamp_into(ry, TILT_RANGE)
        .ok_or_else(|| Error::Encoding(format!("ry = {ry} outside [-1, 1]")))?;
    let rz = clamp_into(rz, YAW_RANGE)
        .ok_or_else(|| Error::Encoding(format!("rz = {rz} outside [0, pi]")))?;

    let residual = (euler_to_rotation(rx, ry, rz) - r).norm();
    if residual > DECODE_TOL {
        return Err(Error::Encoding(format!(
            "reconstruction error {residual:e} exceeds {DECODE_TOL:e}"
        )));
    }
    Ok(PoseVector {
        x: g.translation.x,
        y: g.translation.y,
        z: g.translation.z,
        rx,
        ry,
        rz,
        width: g.width,
    })
}

/// Euclidean distance between the encodings of two poses.
pub fn se3_distance(a: &GraspPose, b: &GraspPose, include_width: bool) -> Result<f64> {
    Ok(pose_to_vector(a)?.distance(&pose_to_vector(b)?, include_width))
}

/// An ordered set of grasps, optionally scored.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GraspSet {
    poses: Vec<GraspPose>,
    confidences: Option<Vec<f64>>,
}

impl GraspSet {
    pub fn new(poses: Vec<GraspPose>) -> Self {
        GraspSet {
            poses,
            confidences: None,
        }
    }

    pub fn with_confidences(poses: Vec<GraspPose>, confidences: Vec<f64>) -> Result<Self> {
        if confidences.len() != poses.len() {
            return Err(Error::Dimension(format!(
                "{} confidences for {} poses",
                confidences.len(),
                poses.len()
            )));
        }
        if let Some((i, c)) = confidences
            .iter()
            .enumerate()
            .find(|(_, c)| !(0.0..=1.0).contains(*c))
        {
            return Err(Error::Validation(format!(
                "confidence #{i} = {c} outside [0, 1]"
            )));
        }
        Ok(GraspSet {
            poses,
            confidences: Some(confidences),
        })
    }

    /// Decodes bounded vectors into a set. Every vector must be in range.
    pub fn from_vectors(vectors: &[PoseVector], confidences: Option<Vec<f64>>) -> Result<Self> {
        let poses = vectors
            .iter()
            .map(pose_from_vector)
            .collect::<Result<Vec<_>>>()?;
        match confidences {
            Some(c) => GraspSet::with_confidences(poses, c),
            None => Ok(GraspSet::new(poses)),
        }
    }

    pub fn poses(&self) -> &[GraspPose] {
        &self.poses
    }

    pub fn confidences(&self) -> Option<&[f64]> {
        self.confidences.as_deref()
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    /// Encodes every pose; fails on the first unreachable rotation.
    pub fn encode(&self) -> Result<Vec<PoseVector>> {
        self.poses.iter().map(pose_to_vector).collect()
    }

    /// The subset at `indices`, in the given order, carrying confidences along.
    pub fn select(&self, indices: &[usize]) -> GraspSet {
        GraspSet {
            poses: indices.iter().map(|&i| self.poses[i]).collect(),
            confidences: self
                .confidences
                .as_ref()
                .map(|c| indices.iter().map(|&i| c[i]).collect()),
        }
    }
}
