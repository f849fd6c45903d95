//! Geometry, matching, losses, metrics and data plumbing for
//! language-conditioned 6-DoF grasp detection.
//!
//! A grasp is a rotation, a translation and an opening width. It is encoded
//! as the bounded vector `[x, y, z, rx, ry, rz, width]` with translations in
//! `[-1, 1]`, tilts `rx`, `ry` in `[-1, 1]` rad and yaw `rz` in `[0, pi]`.
//! Rotations compose as `Rz(rz) * Ry(ry) * Rx(rx)`.

pub mod assignment;
pub mod buffers;
pub mod cot;
pub mod dataset;
pub mod error;
pub mod geometry;
pub mod gripper;
pub mod losses;
pub mod metrics;
pub mod pruning;
pub mod scene;
pub mod transport;
pub mod view;

pub use error::{Error, Result};
pub use geometry::{pose_from_vector, pose_to_vector, se3_distance, GraspPose, GraspSet, PoseVector};
pub use gripper::GripperModel;
pub use metrics::{evaluate, MetricConfig, MetricReport};
pub use scene::Scene;
