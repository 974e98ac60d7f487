//! Synthetic groundtruth camera-pose datasets.
//!
//! * [`trajectory`] expands sparse waypoint plans into dense 6DOF pose streams.
//! * [`poseio`] reads and writes the plain-text pose, manifest and report files.
//! * [`conditions`] models weather, time of day and traffic settings.
//! * [`simworld`] is a deterministic synthetic world with a pinhole camera.
//! * [`align`] scores reconstructed camera positions against groundtruth.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod align;
pub mod conditions;
pub mod poseio;
pub mod simworld;
pub mod trajectory;

pub use align::{AlignmentReport, RansacParams, SimilarityTransform};
pub use conditions::{ConditionSet, DegradationTable, TimeOfDay, Weather};
pub use poseio::{CaptureManifest, CaptureRecord, ReconstructedSet};
pub use simworld::{Intrinsics, World};
pub use trajectory::{DenseTrajectory, DensifyParams, EulerRotation, SparseTrajectory};
