use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::params::{EYE_SIZE, EYE_SPACING, FEATURE, HEAD_ASPECT, MOUTH_WIDTH, NOSE_LENGTH, SKIN};
use super::render::layers;
use super::{IdentityParams, StateParams};
use crate::error::{invalid, Error, Result};
use crate::imgcore::{gaussian_blur, Image};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Iterations per coarse-to-fine stage.
    pub max_iterations: usize,
    /// Blur widths of the stages, coarse first.
    pub stages: [f64; 2],
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 25,
            stages: [2.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityFit {
    pub identity: IdentityParams,
    /// Root-mean-square residual over the fitted pixels and channels.
    pub rmse: f64,
    pub evaluations: usize,
}

const GEOMETRY: [(f64, f64); 5] = [HEAD_ASPECT, EYE_SPACING, EYE_SIZE, NOSE_LENGTH, MOUTH_WIDTH];

fn with_geometry(theta: &[f64], fit_head: bool) -> IdentityParams {
    let mut id = IdentityParams::default();
    let g = if fit_head { theta.to_vec() } else { [&[1.0][..], theta].concat() };
    id.head_aspect = g[0];
    id.eye_spacing = g[1];
    id.eye_size = g[2];
    id.nose_length = g[3];
    id.mouth_width = g[4];
    id
}

struct Problem<'a> {
    state: &'a StateParams,
    size: usize,
    weights: Vec<f64>,
    fit_head: bool,
    evaluations: usize,
}

struct Eval {
    residual: Vec<f64>,
    skin: [f64; 3],
    feature: [f64; 3],
}

fn blurred(v: Vec<f64>, size: usize, sigma: f64) -> Vec<f64> {
    if sigma == 0.0 {
        return v;
    }
    let img = Image::new(size, size, 1, v).expect("finite layer");
    gaussian_blur(&img, sigma).expect("valid sigma").into_data()
}

impl Problem<'_> {
    fn eval(&mut self, theta: &[f64], target: &[f64], sigma: f64) -> Eval {
        self.evaluations += 1;
        let id = with_geometry(theta, self.fit_head);
        let l = layers(&id, self.state, self.size, !self.fit_head);
        let n = self.size * self.size;
        let s = blurred(l.skin, self.size, sigma);
        let f = blurred(l.feature, self.size, sigma);
        let a: Vec<Vec<f64>> = (0..3)
            .map(|c| blurred(l.constant.iter().map(|p| p[c]).collect(), self.size, sigma))
            .collect();
        let mut skin = [0.0; 3];
        let mut feature = [0.0; 3];
        let mut residual = Vec::with_capacity(3 * n);
        for c in 0..3 {
            let (mut ss, mut sf, mut ff, mut sy, mut fy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..n {
                let w = self.weights[i];
                let y = target[i * 3 + c] - a[c][i];
                ss += w * s[i] * s[i];
                sf += w * s[i] * f[i];
                ff += w * f[i] * f[i];
                sy += w * s[i] * y;
                fy += w * f[i] * y;
            }
            let ridge = 1e-9 * (ss + ff).max(1e-12);
            let (ss, ff) = (ss + ridge, ff + ridge);
            let det = ss * ff - sf * sf;
            skin[c] = (ff * sy - sf * fy) / det;
            feature[c] = (ss * fy - sf * sy) / det;
            for i in 0..n {
                let w = self.weights[i];
                if w > 0.0 {
                    let pred = a[c][i] + s[i] * skin[c] + f[i] * feature[c];
                    residual.push(w.sqrt() * (pred - target[i * 3 + c]));
                }
            }
        }
        Eval {
            residual,
            skin,
            feature,
        }
    }
}

fn cost(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Recovers identity parameters from a frame whose per-frame state is known.
///
/// With `region` (a one-channel weight image) only pixels where it is at least
/// 0.5 are used, the head outline is ignored and `head_aspect` is reported at
/// its neutral value. Colours are solved in closed form for each candidate
/// geometry; geometry is refined by damped Gauss-Newton on finite-difference
/// Jacobians, first on blurred images then at full resolution.
pub fn fit_identity(
    img: &Image,
    state: &StateParams,
    region: Option<&Image>,
    opts: &FitOptions,
) -> Result<IdentityFit> {
    state.validate()?;
    if img.channels() != 3 || img.width() != img.height() {
        return Err(invalid("identity fitting needs a square RGB frame"));
    }
    let size = img.width();
    let weights: Vec<f64> = match region {
        Some(m) => {
            if m.channels() != 1 || !m.same_size(img) {
                return Err(invalid("fit region must be a one-channel image of the frame size"));
            }
            m.data().iter().map(|&v| if v >= 0.5 { 1.0 } else { 0.0 }).collect()
        }
        None => vec![1.0; size * size],
    };
    let used = weights.iter().filter(|&&w| w > 0.0).count();
    if used < 16 {
        return Err(Error::EmptyMask);
    }
    let fit_head = region.is_none();
    let ranges: Vec<(f64, f64)> = if fit_head { GEOMETRY.to_vec() } else { GEOMETRY[1..].to_vec() };
    let mut theta: Vec<f64> = ranges.iter().map(|r| 0.5 * (r.0 + r.1)).collect();
    let mut prob = Problem {
        state,
        size,
        weights,
        fit_head,
        evaluations: 0,
    };

    for &sigma in &opts.stages {
        let target = if sigma > 0.0 {
            gaussian_blur(img, sigma)?.into_data()
        } else {
            img.data().to_vec()
        };
        let mut cur = prob.eval(&theta, &target, sigma);
        let mut lambda = 1e-2;
        for _ in 0..opts.max_iterations {
            let k = theta.len();
            let m = cur.residual.len();
            let mut jac = DMatrix::<f64>::zeros(m, k);
            for j in 0..k {
                let h = 1e-3 * (ranges[j].1 - ranges[j].0);
                let mut t = theta.clone();
                t[j] += h;
                let e = prob.eval(&t, &target, sigma);
                for (i, (a, b)) in e.residual.iter().zip(&cur.residual).enumerate() {
                    jac[(i, j)] = (a - b) / h;
                }
            }
            let r = DVector::from_column_slice(&cur.residual);
            let jtj = jac.transpose() * &jac;
            let jtr = jac.transpose() * r;
            let base = cost(&cur.residual);
            let mut improved = false;
            for _ in 0..8 {
                let mut a = jtj.clone();
                for d in 0..k {
                    a[(d, d)] += lambda * jtj[(d, d)].max(1e-12);
                }
                let Some(step) = a.lu().solve(&(-&jtr)) else {
                    lambda *= 4.0;
                    continue;
                };
                let cand: Vec<f64> = theta
                    .iter()
                    .zip(step.iter())
                    .zip(&ranges)
                    .map(|((t, s), r)| (t + s).clamp(r.0, r.1))
                    .collect();
                let e = prob.eval(&cand, &target, sigma);
                if cost(&e.residual) < base {
                    let moved = cand
                        .iter()
                        .zip(&theta)
                        .zip(&ranges)
                        .map(|((a, b), r)| (a - b).abs() / (r.1 - r.0))
                        .fold(0.0, f64::max);
                    theta = cand;
                    cur = e;
                    lambda = (lambda / 3.0).max(1e-7);
                    improved = moved > 1e-7;
                    break;
                }
                lambda *= 4.0;
            }
            if !improved {
                break;
            }
        }
    }

    let fin = prob.eval(&theta, img.data(), 0.0);
    let mut identity = with_geometry(&theta, fit_head);
    for c in 0..3 {
        identity.skin[c] = fin.skin[c].clamp(SKIN.0, SKIN.1);
        identity.feature[c] = fin.feature[c].clamp(FEATURE.0, FEATURE.1);
    }
    let rmse = (cost(&fin.residual) / fin.residual.len() as f64).sqrt();
    Ok(IdentityFit {
        identity,
        rmse,
        evaluations: prob.evaluations,
    })
}
