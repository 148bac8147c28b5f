use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Point2;
use crate::error::{invalid, Error, Result};

pub const LANDMARK_COUNT: usize = 68;

/// Index ranges of the standard 68-point annotation.
pub mod regions {
    use std::ops::Range;
    pub const JAW: Range<usize> = 0..17;
    pub const RIGHT_BROW: Range<usize> = 17..22;
    pub const LEFT_BROW: Range<usize> = 22..27;
    pub const NOSE_BRIDGE: Range<usize> = 27..31;
    pub const NOSTRILS: Range<usize> = 31..36;
    pub const RIGHT_EYE: Range<usize> = 36..42;
    pub const LEFT_EYE: Range<usize> = 42..48;
    pub const OUTER_LIP: Range<usize> = 48..60;
    pub const INNER_LIP: Range<usize> = 60..68;
}

/// 68 ordered facial points in pixel coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LandmarkFile", into = "LandmarkFile")]
pub struct LandmarkSet {
    points: Vec<Point2>,
}

#[derive(Serialize, Deserialize)]
struct LandmarkFile {
    points: Vec<Point2>,
}

impl TryFrom<LandmarkFile> for LandmarkSet {
    type Error = Error;
    fn try_from(f: LandmarkFile) -> Result<Self> {
        LandmarkSet::new(f.points)
    }
}

impl From<LandmarkSet> for LandmarkFile {
    fn from(l: LandmarkSet) -> Self {
        LandmarkFile { points: l.points }
    }
}

impl LandmarkSet {
    pub fn new(points: Vec<Point2>) -> Result<Self> {
        if points.len() != LANDMARK_COUNT {
            return Err(invalid(format!(
                "expected {LANDMARK_COUNT} landmarks, got {}",
                points.len()
            )));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(invalid("landmark coordinates must be finite"));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    pub fn map(&self, f: impl Fn(Point2) -> Point2) -> LandmarkSet {
        LandmarkSet {
            points: self.points.iter().map(|&p| f(p)).collect(),
        }
    }

    pub fn translated(&self, dx: f64, dy: f64) -> LandmarkSet {
        self.map(|[x, y]| [x + dx, y + dy])
    }

    pub fn centroid(&self) -> Point2 {
        let n = self.points.len() as f64;
        let (sx, sy) = self
            .points
            .iter()
            .fold((0.0, 0.0), |(a, b), p| (a + p[0], b + p[1]));
        [sx / n, sy / n]
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self).map_err(|e| Error::json(path, e))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_wrong_count_and_nan() {
        assert!(LandmarkSet::new(vec![[0.0, 0.0]; 67]).is_err());
        let mut pts = vec![[1.0, 2.0]; 68];
        pts[5][1] = f64::INFINITY;
        assert!(LandmarkSet::new(pts).is_err());
    }

    #[test]
    fn json_format_is_points_array() {
        let l = LandmarkSet::new((0..68).map(|i| [i as f64, 0.5]).collect()).unwrap();
        let s = serde_json::to_string(&l).unwrap();
        assert!(s.starts_with("{\"points\":[[0.0,0.5],[1.0,0.5]"));
        let back: LandmarkSet = serde_json::from_str(&s).unwrap();
        assert_eq!(back, l);
        assert!(serde_json::from_str::<LandmarkSet>("{\"points\":[[1,2]]}").is_err());
    }
}
