use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

use super::{LandmarkSet, Point2, Point3, LANDMARK_COUNT};
use crate::error::{invalid, Result};

/// Frontal projection of the 3-d template into the unit square is
/// `TEMPLATE_CENTER + TEMPLATE_SCALE · (x, y)`.
pub const TEMPLATE_SCALE: f64 = 0.40;
pub const TEMPLATE_CENTER: Point2 = [0.5, 0.42];

#[derive(Deserialize)]
struct PointsFile<P> {
    points: Vec<P>,
}

static TEMPLATE_2D: LazyLock<Vec<Point2>> = LazyLock::new(|| {
    let f: PointsFile<Point2> =
        serde_json::from_str(include_str!("../../data/template2d.json")).expect("embedded template");
    assert_eq!(f.points.len(), LANDMARK_COUNT);
    f.points
});

static TEMPLATE_3D: LazyLock<Vec<Point3>> = LazyLock::new(|| {
    let f: PointsFile<Point3> =
        serde_json::from_str(include_str!("../../data/template3d.json")).expect("embedded template");
    assert_eq!(f.points.len(), LANDMARK_COUNT);
    f.points
});

/// Canonical aligned landmark positions in the unit square.
pub fn canonical_2d() -> &'static [Point2] {
    &TEMPLATE_2D
}

/// Canonical 3-d landmark rig used for pose estimation and rendering.
pub fn canonical_3d() -> &'static [Point3] {
    &TEMPLATE_3D
}

/// How much of the face an aligned crop covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionMode {
    HalfFace,
    FullFace,
    WholeFace,
}

impl ExtractionMode {
    /// Side of the crop window as a fraction of the template square.
    pub fn coverage(self) -> f64 {
        match self {
            ExtractionMode::HalfFace => 0.55,
            ExtractionMode::FullFace => 0.75,
            ExtractionMode::WholeFace => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ExtractionMode::HalfFace => "half_face",
            ExtractionMode::FullFace => "full_face",
            ExtractionMode::WholeFace => "whole_face",
        }
    }
}

impl std::str::FromStr for ExtractionMode {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "half_face" => Ok(ExtractionMode::HalfFace),
            "full_face" => Ok(ExtractionMode::FullFace),
            "whole_face" => Ok(ExtractionMode::WholeFace),
            other => Err(invalid(format!("unknown extraction mode {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentTemplate {
    pub mode: ExtractionMode,
    pub canonical_points: Vec<Point2>,
    pub coverage: f64,
}

impl AlignmentTemplate {
    pub fn new(mode: ExtractionMode) -> Self {
        Self {
            mode,
            canonical_points: canonical_2d().to_vec(),
            coverage: mode.coverage(),
        }
    }

    /// Custom template; points must lie in the unit square.
    pub fn custom(mode: ExtractionMode, points: Vec<Point2>, coverage: f64) -> Result<Self> {
        if points.len() != LANDMARK_COUNT {
            return Err(invalid("template needs 68 points"));
        }
        if points.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(invalid("template points must lie in [0,1]^2"));
        }
        if !(coverage > 0.0) {
            return Err(invalid("coverage must be positive"));
        }
        Ok(Self {
            mode,
            canonical_points: points,
            coverage,
        })
    }

    /// Where each landmark lands in an `out_size` aligned crop.
    pub fn target_points(&self, out_size: usize) -> Vec<Point2> {
        let s = out_size as f64;
        self.canonical_points
            .iter()
            .map(|p| {
                [
                    s * (0.5 + (p[0] - 0.5) / self.coverage),
                    s * (0.5 + (p[1] - 0.5) / self.coverage),
                ]
            })
            .collect()
    }

    pub fn target_landmarks(&self, out_size: usize) -> LandmarkSet {
        LandmarkSet::new(self.target_points(out_size)).expect("template has 68 finite points")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedded_2d_template_is_frontal_projection_of_3d() {
        for (p2, p3) in canonical_2d().iter().zip(canonical_3d()) {
            assert!((p2[0] - (TEMPLATE_CENTER[0] + TEMPLATE_SCALE * p3[0])).abs() < 1e-12);
            assert!((p2[1] - (TEMPLATE_CENTER[1] + TEMPLATE_SCALE * p3[1])).abs() < 1e-12);
            assert!(p2.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn coverage_orders_modes() {
        assert!(ExtractionMode::HalfFace.coverage() < ExtractionMode::FullFace.coverage());
        assert_eq!(ExtractionMode::WholeFace.coverage(), 1.0);
        assert_eq!("full_face".parse::<ExtractionMode>().unwrap(), ExtractionMode::FullFace);
        assert!("quarter_face".parse::<ExtractionMode>().is_err());
    }

    #[test]
    fn whole_face_targets_are_scaled_template() {
        let t = AlignmentTemplate::new(ExtractionMode::WholeFace);
        for (a, b) in t.target_points(100).iter().zip(canonical_2d()) {
            assert!((a[0] - 100.0 * b[0]).abs() < 1e-12);
        }
    }
}
