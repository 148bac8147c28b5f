use facelab_autograd::{Graph, Scalar, Tensor, Var};

use crate::error::{invalid, Result};
use crate::imgcore::gaussian_kernel;

pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

/// Per-pixel SSIM of two `(N, C, H, W)` tensors with values in [0, 1], using
/// an 11-tap Gaussian window (σ = 1.5) with replicated borders and L = 1.
///
/// Every product is formed symmetrically, so `ssim_map(a, b)` and
/// `ssim_map(b, a)` are bitwise equal and `ssim_map(x, x)` is exactly 1.
pub fn ssim_map<T: Scalar>(g: &mut Graph<T>, a: Var, b: Var) -> Result<Var> {
    if g.shape(a) != g.shape(b) {
        return Err(invalid(format!(
            "ssim inputs differ in shape: {:?} vs {:?}",
            g.shape(a),
            g.shape(b)
        )));
    }
    let k = gaussian_kernel(SSIM_SIGMA);
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let mu_a = g.separable_filter(a, &k)?;
    let mu_b = g.separable_filter(b, &k)?;
    let aa = g.mul(a, a)?;
    let bb = g.mul(b, b)?;
    let ab = g.mul(a, b)?;
    let e_aa = g.separable_filter(aa, &k)?;
    let e_bb = g.separable_filter(bb, &k)?;
    let e_ab = g.separable_filter(ab, &k)?;
    let mu_aa = g.mul(mu_a, mu_a)?;
    let mu_bb = g.mul(mu_b, mu_b)?;
    let mu_ab = g.mul(mu_a, mu_b)?;
    let var_a = g.sub(e_aa, mu_aa)?;
    let var_b = g.sub(e_bb, mu_bb)?;
    let cov = g.sub(e_ab, mu_ab)?;

    let mu_ab2 = g.add(mu_ab, mu_ab)?;
    let num_l = g.add_scalar(mu_ab2, c1);
    let cov2 = g.add(cov, cov)?;
    let num_c = g.add_scalar(cov2, c2);
    let num = g.mul(num_l, num_c)?;

    let mu_sq = g.add(mu_aa, mu_bb)?;
    let den_l = g.add_scalar(mu_sq, c1);
    let var_sum = g.add(var_a, var_b)?;
    let den_c = g.add_scalar(var_sum, c2);
    let den = g.mul(den_l, den_c)?;
    Ok(g.div(num, den)?)
}

/// `(1 − SSIM) / 2` averaged under per-pixel weights `(N, H, W)`; the weights
/// are normalized, so scaling them does not change the result.
pub fn dssim<T: Scalar>(g: &mut Graph<T>, a: Var, b: Var, weights: &Tensor<T>) -> Result<Var> {
    let s = ssim_map(g, a, b)?;
    let d = g.mul_scalar(s, -0.5);
    let d = g.add_scalar(d, 0.5);
    Ok(g.weighted_mean(d, weights)?)
}

pub fn weighted_mse<T: Scalar>(g: &mut Graph<T>, a: Var, b: Var, weights: &Tensor<T>) -> Result<Var> {
    let d = g.sub(a, b)?;
    let sq = g.square(d);
    Ok(g.weighted_mean(sq, weights)?)
}

pub fn mse<T: Scalar>(g: &mut Graph<T>, a: Var, b: Var) -> Result<Var> {
    let d = g.sub(a, b)?;
    let sq = g.square(d);
    Ok(g.mean(sq))
}

/// Loss weights of one reconstruction side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixedWeights {
    pub dssim: f64,
    pub mse: f64,
    pub mask: f64,
}

/// Unweighted components of one side's reconstruction loss.
#[derive(Debug, Clone, Copy)]
pub struct SideTerms {
    pub dssim: Var,
    pub mse: Var,
    pub mask: Option<Var>,
    pub total: Var,
}

/// `α·dssim + β·weighted-MSE + γ·mask-MSE`. The mask term is skipped when the
/// model has no mask head.
pub fn mixed_loss<T: Scalar>(
    g: &mut Graph<T>,
    pred: Var,
    target: Var,
    pred_mask: Option<Var>,
    true_mask: Var,
    weights: &Tensor<T>,
    w: &MixedWeights,
) -> Result<SideTerms> {
    let ds = dssim(g, pred, target, weights)?;
    let ms = weighted_mse(g, pred, target, weights)?;
    let a = g.mul_scalar(ds, w.dssim);
    let b = g.mul_scalar(ms, w.mse);
    let mut total = g.add(a, b)?;
    let mask = match pred_mask {
        Some(pm) => {
            let m = mse(g, pm, true_mask)?;
            let c = g.mul_scalar(m, w.mask);
            total = g.add(total, c)?;
            Some(m)
        }
        None => None,
    };
    Ok(SideTerms {
        dssim: ds,
        mse: ms,
        mask,
        total,
    })
}

/// Latent moment matching: `Σ_c (μ_src − μ_dst)² + (σ_src − σ_dst)²` with
/// per-channel statistics over batch and space. The dst statistics are
/// detached, so only the src path is pulled.
pub fn trueface_loss<T: Scalar>(g: &mut Graph<T>, src: Var, dst: Var) -> Result<Var> {
    let ss = g.shape(src);
    let ds = g.shape(dst);
    if ss.len() != 4 || ds.len() != 4 || ss[1..] != ds[1..] {
        return Err(invalid(format!(
            "latent codes differ in layout: {ss:?} vs {ds:?}"
        )));
    }
    let s = g.channel_stats(src);
    let d = g.channel_stats(dst);
    let d = g.detach(d);
    let diff = g.sub(s, d)?;
    let sq = g.square(diff);
    Ok(g.sum(sq))
}

/// `‖μ_src − μ_dst‖` of per-channel latent means (diagnostic only).
pub fn latent_mean_distance<T: Scalar>(src: &Tensor<T>, dst: &Tensor<T>) -> f64 {
    let mean = |t: &Tensor<T>| -> Vec<f64> {
        let (n, c, h, w) = t.dims4();
        let hw = h * w;
        (0..c)
            .map(|ci| {
                let mut s = 0.0;
                for i in 0..n {
                    s += t.data()[(i * c + ci) * hw..(i * c + ci + 1) * hw]
                        .iter()
                        .map(|v| v.to_f64())
                        .sum::<f64>();
                }
                s / (n * hw) as f64
            })
            .collect()
    };
    mean(src)
        .iter()
        .zip(mean(dst))
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt()
}
