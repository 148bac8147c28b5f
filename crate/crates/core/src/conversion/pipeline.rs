use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::color::{idt_transfer, rct_transfer, MASK_THRESHOLD};
use super::config::{BlendMode, ColorMode, ConvertConfig, SHARPEN_SIGMA};
use super::poisson::poisson_blend;
use crate::error::{invalid, Result};
use crate::geometry::SimilarityTransform;
use crate::imgcore::{erode, gaussian_blur, unsharp_sharpen, warp_affine_with_border, Border, Image};
use crate::models::Model;

/// One destination frame with what extraction recorded for it.
#[derive(Debug, Clone)]
pub struct FrameInput {
    pub frame: Image,
    /// Ingested face mask in frame coordinates (single channel).
    pub mask: Image,
    /// Frame → aligned-face transform; `None` when the frame had no landmarks.
    pub transform: Option<SimilarityTransform>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameDiagnostics {
    pub passed_through: bool,
    pub note: Option<String>,
    pub cg_iterations: usize,
    pub cg_residual: f64,
    /// Mean absolute change colour transfer made inside the mask.
    pub color_shift: f64,
}

#[derive(Debug, Clone)]
pub struct FrameResult {
    pub frame: Image,
    /// Final compositing mask in frame coordinates.
    pub mask: Image,
    pub diagnostics: FrameDiagnostics,
}

fn pass_through(input: &FrameInput, note: &str) -> FrameResult {
    FrameResult {
        frame: input.frame.clone(),
        mask: Image::zeros(input.frame.height(), input.frame.width(), 1),
        diagnostics: FrameDiagnostics {
            passed_through: true,
            note: Some(note.to_string()),
            ..Default::default()
        },
    }
}

fn mean_abs_change(a: &Image, b: &Image, mask: &Image) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for (i, &m) in mask.data().iter().enumerate() {
        if m >= MASK_THRESHOLD {
            for c in 0..3 {
                sum += (a.data()[3 * i + c] - b.data()[3 * i + c]).abs();
            }
            n += 3;
        }
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// `m·a + (1 − m)·b`, returning `b`'s sample untouched wherever `m = 0`.
fn composite(a: &Image, b: &Image, m: &Image) -> Result<Image> {
    let ch = b.channels();
    let data = b
        .data()
        .iter()
        .enumerate()
        .map(|(i, &bv)| {
            let w = m.data()[i / ch];
            if w == 0.0 {
                bv
            } else {
                w * a.data()[i] + (1.0 - w) * bv
            }
        })
        .collect();
    Image::new(b.height(), b.width(), ch, data)
}

/// Swaps the face in one frame: align by the stored transform, predict,
/// intersect the predicted and ingested masks, harmonize colour against the
/// aligned original, erode and feather the mask, warp back and composite.
/// Colour transfer runs in aligned space, before paste-back.
pub fn convert_frame(model: &Model<f32>, input: &FrameInput, cfg: &ConvertConfig) -> Result<FrameResult> {
    cfg.validate()?;
    let frame = &input.frame;
    if frame.channels() != 3 || input.mask.channels() != 1 || !input.mask.same_size(frame) {
        return Err(invalid("frame must be RGB with a single-channel mask of the same size"));
    }
    let Some(t) = input.transform else {
        return Ok(pass_through(input, "no landmarks"));
    };
    let res = model.config().resolution;
    let (h, w) = (frame.height(), frame.width());
    let to_frame = t.matrix();
    let to_aligned = t.inverse()?.matrix();
    let aligned = warp_affine_with_border(frame, &to_aligned, res, res, Border::Replicate)?;
    let aligned_mask = warp_affine_with_border(&input.mask, &to_aligned, res, res, Border::Constant(0.0))?;
    let (pred, pred_mask) = model.predict_swap(&aligned, cfg.direction)?;
    let combined = Image::new(
        res,
        res,
        1,
        pred_mask.data().iter().zip(aligned_mask.data()).map(|(a, b)| a.min(*b)).collect(),
    )?;
    if combined.data().iter().all(|&v| v < MASK_THRESHOLD) {
        return Ok(pass_through(input, "empty mask"));
    }

    let mut diagnostics = FrameDiagnostics::default();
    let face = match cfg.color_mode {
        ColorMode::None => pred,
        mode => {
            let moved = if mode == ColorMode::Rct {
                rct_transfer(&pred, &aligned, &combined)?
            } else {
                idt_transfer(&pred, &aligned, &combined, cfg.idt_iterations, cfg.idt_seed)?
            };
            diagnostics.color_shift = mean_abs_change(&moved, &pred, &combined);
            moved
        }
    };
    let soft = gaussian_blur(&erode(&combined, cfg.mask_erode), cfg.feather_sigma)?;

    let face_f = warp_affine_with_border(&face, &to_frame, h, w, Border::Replicate)?;
    let mask_f = warp_affine_with_border(&soft, &to_frame, h, w, Border::Constant(0.0))?;
    let mut out = match cfg.blend_mode {
        BlendMode::Alpha => composite(&face_f, frame, &mask_f)?,
        BlendMode::Poisson => {
            let (blended, report) = poisson_blend(frame, &face_f, &mask_f, cfg.cg_tol, cfg.cg_max_iter)?;
            diagnostics.cg_iterations = report.iterations;
            diagnostics.cg_residual = report.residual;
            if report.unknowns == 0 {
                diagnostics.note = Some("poisson interior empty, alpha only".into());
            }
            // Outside Ω `blended` is the frame, so this only softens the seam.
            composite(&blended, frame, &mask_f)?
        }
    };
    if cfg.sharpen_amount > 0.0 {
        let sharp = unsharp_sharpen(&out, SHARPEN_SIGMA, cfg.sharpen_amount)?;
        out = composite(&sharp, &out, &mask_f)?;
    }
    Ok(FrameResult {
        frame: out.clamped(),
        mask: mask_f,
        diagnostics,
    })
}

/// Converts frames in parallel on `workers` threads (0 = rayon default).
/// Results keep input order and do not depend on the worker count; a failed
/// frame yields its error without stopping the others.
pub fn convert_sequence(
    model: &Model<f32>,
    frames: &[FrameInput],
    cfg: &ConvertConfig,
    workers: usize,
) -> Result<Vec<Result<FrameResult>>> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| invalid(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| frames.par_iter().map(|f| convert_frame(model, f, cfg)).collect()))
}
