use super::LandmarkSet;
use crate::error::{invalid, Result};

/// Normalized Gaussian weights for frame `i` of `n` with a centered window of
/// `window` frames (σ = window / 6). Near the ends the window shrinks
/// symmetrically so it never reaches past either end of the sequence.
pub fn smoothing_weights(n: usize, i: usize, window: usize) -> Vec<(usize, f64)> {
    let half = (window / 2).min(i).min(n - 1 - i);
    let sigma = window as f64 / 6.0;
    let mut w: Vec<(usize, f64)> = (i - half..=i + half)
        .map(|j| {
            let d = j as f64 - i as f64;
            (j, (-0.5 * d * d / (sigma * sigma)).exp())
        })
        .collect();
    let total: f64 = w.iter().map(|(_, v)| v).sum();
    for (_, v) in &mut w {
        *v /= total;
    }
    w
}

/// Temporal Gaussian smoothing of a landmark sequence. `window` must be odd;
/// a window of 1 returns the input unchanged.
pub fn smooth_landmarks(seq: &[LandmarkSet], window: usize) -> Result<Vec<LandmarkSet>> {
    if window == 0 || window % 2 == 0 {
        return Err(invalid(format!("smoothing window must be odd, got {window}")));
    }
    if window == 1 || seq.len() < 2 {
        return Ok(seq.to_vec());
    }
    let n = seq.len();
    Ok((0..n)
        .map(|i| {
            let weights = smoothing_weights(n, i, window);
            let pts = (0..seq[i].points().len())
                .map(|k| {
                    weights.iter().fold([0.0, 0.0], |acc, &(j, w)| {
                        let p = seq[j].points()[k];
                        [acc[0] + w * p[0], acc[1] + w * p[1]]
                    })
                })
                .collect();
            LandmarkSet::new(pts).expect("convex combination of finite points")
        })
        .collect())
}
