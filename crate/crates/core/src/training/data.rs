use facelab_autograd::{Scalar, Tensor};
use rand::Rng;

use super::weights::eye_weight_map;
use crate::error::{invalid, Error, Result};
use crate::geometry::LandmarkSet;
use crate::imgcore::{warp_affine_with_border, Border, Image, WeightMap};
use crate::models::{images_to_tensor, masks_to_tensor};

pub const SCALE_JITTER: f64 = 0.05;

/// One aligned training face.
#[derive(Debug, Clone)]
pub struct FaceSample {
    pub face: Image,
    pub mask: Image,
    pub weights: WeightMap,
}

/// Aligned faces of one identity, all at the same resolution.
#[derive(Debug, Clone)]
pub struct FaceSet {
    samples: Vec<FaceSample>,
    size: usize,
}

impl FaceSet {
    /// `landmarks` are in aligned-face coordinates.
    pub fn new(faces: Vec<Image>, masks: Vec<Image>, landmarks: &[LandmarkSet], eye_weight: f64) -> Result<Self> {
        if faces.len() != masks.len() || faces.len() != landmarks.len() {
            return Err(invalid("faces, masks and landmarks must have equal counts"));
        }
        let samples = faces
            .into_iter()
            .zip(masks)
            .zip(landmarks)
            .map(|((face, mask), lms)| {
                let weights = eye_weight_map(lms, face.width(), eye_weight);
                FaceSample { face, mask, weights }
            })
            .collect();
        Self::from_samples(samples)
    }

    pub fn from_samples(samples: Vec<FaceSample>) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::EmptyDataset("no aligned faces".into()))?;
        let size = first.face.width();
        for s in &samples {
            if s.face.channels() != 3 || s.face.width() != size || s.face.height() != size {
                return Err(invalid("training faces must be square RGB images of one size"));
            }
            if s.mask.channels() != 1 || !s.mask.same_size(&s.face) {
                return Err(invalid("training masks must be one-channel and match their face"));
            }
            if s.weights.width() != size || s.weights.height() != size {
                return Err(invalid("weight map size does not match face"));
            }
        }
        Ok(Self { samples, size })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn samples(&self) -> &[FaceSample] {
        &self.samples
    }
}

/// NCHW batch tensors plus `(N, H, W)` loss weights.
#[derive(Debug, Clone)]
pub struct Batch<T> {
    pub faces: Tensor<T>,
    pub masks: Tensor<T>,
    pub weights: Tensor<T>,
}

fn jitter(sample: &FaceSample, flip: bool, scale: f64) -> Result<FaceSample> {
    let n = sample.face.width();
    let c = (n as f64 - 1.0) / 2.0;
    let inv = 1.0 / scale;
    let sx = if flip { -inv } else { inv };
    // Output pixel p reads input c + (p − c)/s, mirrored in x when flipping.
    let m = [[sx, 0.0, c - sx * c], [0.0, inv, c - inv * c]];
    let warp = |img: &Image| warp_affine_with_border(img, &m, n, n, Border::Replicate);
    Ok(FaceSample {
        face: warp(&sample.face)?,
        mask: warp(&sample.mask)?,
        weights: WeightMap::from_image(&warp(&sample.weights.as_image())?)?,
    })
}

/// Draws `batch` samples uniformly with replacement; with `augment` each is
/// randomly mirrored and rescaled by up to ±5 %.
pub fn sample_batch<T: Scalar, R: Rng + ?Sized>(
    set: &FaceSet,
    batch: usize,
    augment: bool,
    rng: &mut R,
) -> Result<Batch<T>> {
    if set.is_empty() {
        return Err(Error::EmptyDataset("no aligned faces".into()));
    }
    let picked: Vec<FaceSample> = (0..batch)
        .map(|_| {
            let s = &set.samples[rng.random_range(0..set.len())];
            if augment {
                let flip = rng.random_bool(0.5);
                let scale = 1.0 + rng.random_range(-SCALE_JITTER..=SCALE_JITTER);
                jitter(s, flip, scale)
            } else {
                Ok(s.clone())
            }
        })
        .collect::<Result<_>>()?;
    let faces: Vec<&Image> = picked.iter().map(|s| &s.face).collect();
    let masks: Vec<&Image> = picked.iter().map(|s| &s.mask).collect();
    let n = set.size;
    let w: Vec<f64> = picked.iter().flat_map(|s| s.weights.data().iter().copied()).collect();
    Ok(Batch {
        faces: images_to_tensor(&faces)?,
        masks: masks_to_tensor(&masks)?,
        weights: Tensor::from_f64(&[batch, n, n], &w)?,
    })
}
