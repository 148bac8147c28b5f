//! Landmarks, similarity alignment, extraction templates, temporal smoothing
//! and head-pose estimation.

mod align;
mod euler;
mod landmarks;
mod smooth;
mod template;
mod umeyama;

pub use align::{align_face, AlignmentMeta};
pub use euler::{euler_from_landmarks, rotation_from_euler, EulerAngles};
pub use landmarks::{regions, LandmarkSet, LANDMARK_COUNT};
pub use smooth::{smooth_landmarks, smoothing_weights};
pub use template::{canonical_2d, canonical_3d, AlignmentTemplate, ExtractionMode, TEMPLATE_CENTER, TEMPLATE_SCALE};
pub use umeyama::{umeyama, SimilarityTransform};

/// 2-d point in pixel coordinates.
pub type Point2 = [f64; 2];
/// 3-d point in template units (x right, y down, z away from the camera).
pub type Point3 = [f64; 3];
