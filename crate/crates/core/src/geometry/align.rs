use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{umeyama, AlignmentTemplate, ExtractionMode, LandmarkSet, SimilarityTransform};
use crate::error::{invalid, Error, Result};
use crate::imgcore::{warp_affine, Image};

/// Warps the face described by `lms` into an `out_size`² crop laid out like
/// `template`. Returns the crop and the frame→crop transform.
pub fn align_face(
    img: &Image,
    lms: &LandmarkSet,
    template: &AlignmentTemplate,
    out_size: usize,
) -> Result<(Image, SimilarityTransform)> {
    if out_size < 16 {
        return Err(invalid(format!("aligned size must be at least 16, got {out_size}")));
    }
    let t = umeyama(lms.points(), &template.target_points(out_size))?;
    let inv = t.inverse()?;
    let face = warp_affine(img, &inv.matrix(), out_size, out_size)?;
    Ok((face, t))
}

/// Sidecar stored next to every aligned face so conversion can invert it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentMeta {
    pub scale: f64,
    /// Row-major 2×2.
    pub rotation: [f64; 4],
    pub translation: [f64; 2],
    pub mode: ExtractionMode,
    pub out_size: usize,
}

impl AlignmentMeta {
    pub fn new(t: &SimilarityTransform, mode: ExtractionMode, out_size: usize) -> Self {
        let r = t.rotation;
        Self {
            scale: t.scale,
            rotation: [r[0][0], r[0][1], r[1][0], r[1][1]],
            translation: t.translation,
            mode,
            out_size,
        }
    }

    pub fn transform(&self) -> SimilarityTransform {
        let r = self.rotation;
        SimilarityTransform {
            scale: self.scale,
            rotation: [[r[0], r[1]], [r[2], r[3]]],
            translation: self.translation,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let meta: AlignmentMeta = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        if !(meta.scale > 0.0) {
            return Err(invalid(format!("{}: non-positive scale", path.display())));
        }
        Ok(meta)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json(path, e))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}
