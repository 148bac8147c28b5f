use facelab_autograd::{Gradients, ParamStore};
use rand::Rng;

use crate::error::{Error, Result};

pub const ADAM_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub lr_dropout_keep: f64,
}

/// First/second moment estimates and step count.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub t: u64,
    pub m: Vec<Vec<f32>>,
    pub v: Vec<Vec<f32>>,
}

impl AdamState {
    pub fn new(params: &ParamStore<f32>) -> Self {
        let zeros: Vec<Vec<f32>> = params.iter().map(|(_, _, t)| vec![0.0; t.len()]).collect();
        Self {
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }
}

/// One bias-corrected Adam update. Parameters without a gradient are treated
/// as having a zero gradient. With `lr_dropout_keep < 1` every element's
/// update is kept with that probability, drawn from `rng`.
pub fn adam_step<R: Rng + ?Sized>(
    params: &mut ParamStore<f32>,
    grads: &Gradients<f32>,
    state: &mut AdamState,
    cfg: &AdamConfig,
    rng: &mut R,
) -> Result<()> {
    let ids: Vec<_> = params.ids().collect();
    for &id in &ids {
        if let Some(g) = grads.param(id) {
            if g.data().iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("gradient of {}", params.name(id))));
            }
        }
    }
    state.t += 1;
    let t = state.t as f64;
    let bc1 = 1.0 - cfg.beta1.powf(t);
    let bc2 = 1.0 - cfg.beta2.powf(t);
    let dropout = cfg.lr_dropout_keep < 1.0;
    for (k, &id) in ids.iter().enumerate() {
        let g = grads.param(id).map(|t| t.data());
        let (m, v) = (&mut state.m[k], &mut state.v[k]);
        let p = params.get_mut(id).data_mut();
        for i in 0..p.len() {
            let gi = g.map_or(0.0, |g| g[i] as f64);
            let mi = cfg.beta1 * m[i] as f64 + (1.0 - cfg.beta1) * gi;
            let vi = cfg.beta2 * v[i] as f64 + (1.0 - cfg.beta2) * gi * gi;
            m[i] = mi as f32;
            v[i] = vi as f32;
            let keep = !dropout || rng.random_bool(cfg.lr_dropout_keep);
            if keep {
                let step = cfg.lr * (mi / bc1) / ((vi / bc2).sqrt() + ADAM_EPS);
                p[i] = (p[i] as f64 - step) as f32;
            }
        }
    }
    Ok(())
}
