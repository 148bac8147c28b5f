use nalgebra::{Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::imgcore::{lab_to_rgb, rgb_to_lab, Image};

/// Smallest source standard deviation used as a divisor.
pub const RCT_STD_FLOOR: f64 = 1e-6;

/// Pixels with mask value ≥ this take part in colour statistics.
pub const MASK_THRESHOLD: f64 = 0.5;

fn check_inputs(src: &Image, reference: &Image, mask: &Image) -> Result<Vec<usize>> {
    if src.channels() != 3 || !src.same_dims(reference) {
        return Err(invalid("colour transfer needs two 3-channel images of the same size"));
    }
    if mask.channels() != 1 || !mask.same_size(src) {
        return Err(invalid("colour transfer mask must be single-channel and match the image size"));
    }
    let idx: Vec<usize> = mask
        .data()
        .iter()
        .enumerate()
        .filter(|(_, &m)| m >= MASK_THRESHOLD)
        .map(|(i, _)| i)
        .collect();
    if idx.is_empty() {
        return Err(Error::EmptyMask);
    }
    Ok(idx)
}

fn stats(img: &Image, idx: &[usize], c: usize) -> (f64, f64) {
    let n = idx.len() as f64;
    let mean = idx.iter().map(|&i| img.data()[3 * i + c]).sum::<f64>() / n;
    let var = idx.iter().map(|&i| (img.data()[3 * i + c] - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Reinhard transfer: per Lab channel, `(x − μ_src)·σ_ref/σ_src + μ_ref` with
/// statistics taken over the masked pixels, applied to the whole image.
pub fn rct_transfer(src: &Image, reference: &Image, mask: &Image) -> Result<Image> {
    let idx = check_inputs(src, reference, mask)?;
    let (ls, lr) = (rgb_to_lab(src)?, rgb_to_lab(reference)?);
    let mut coef = [(0.0, 0.0); 3];
    for (c, k) in coef.iter_mut().enumerate() {
        let (ms, ss) = stats(&ls, &idx, c);
        let (mr, sr) = stats(&lr, &idx, c);
        let gain = sr / ss.max(RCT_STD_FLOOR);
        *k = (gain, mr - gain * ms);
    }
    let mut out = ls.into_data();
    for (i, v) in out.iter_mut().enumerate() {
        let (gain, offset) = coef[i % 3];
        *v = gain * *v + offset;
    }
    let lab = Image::new(src.height(), src.width(), 3, out)?;
    Ok(lab_to_rgb(&lab)?.clamped())
}

fn random_rotation(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
    let a = Matrix3::from_fn(|_, _| StandardNormal.sample(rng));
    let qr = a.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..3 {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Maps every value of `src` to the `ref` quantile at the same rank.
fn match_marginal(src: &[f64], reference: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..src.len()).collect();
    order.sort_by(|&a, &b| src[a].total_cmp(&src[b]).then(a.cmp(&b)));
    let mut sorted_ref = reference.to_vec();
    sorted_ref.sort_by(f64::total_cmp);
    let (n, m) = (src.len(), sorted_ref.len());
    let mut out = vec![0.0; n];
    for (rank, &i) in order.iter().enumerate() {
        let pos = if n > 1 { rank as f64 * (m - 1) as f64 / (n - 1) as f64 } else { (m - 1) as f64 / 2.0 };
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(m - 1);
        let t = pos - lo as f64;
        out[i] = sorted_ref[lo] * (1.0 - t) + sorted_ref[hi] * t;
    }
    out
}

/// Iterative distribution transfer in RGB over the masked pixels. Each
/// iteration projects both colour clouds onto the axes of a random rotation,
/// matches the three 1-D marginals by quantile mapping and moves the source
/// pixels by the rotated correction. Unmasked pixels are left as they are.
pub fn idt_transfer(src: &Image, reference: &Image, mask: &Image, iterations: usize, seed: u64) -> Result<Image> {
    if iterations == 0 {
        return Err(invalid("idt needs at least one iteration"));
    }
    let idx = check_inputs(src, reference, mask)?;
    let pixel = |img: &Image, i: usize| Vector3::new(img.data()[3 * i], img.data()[3 * i + 1], img.data()[3 * i + 2]);
    let mut cloud: Vec<Vector3<f64>> = idx.iter().map(|&i| pixel(src, i)).collect();
    let target: Vec<Vector3<f64>> = idx.iter().map(|&i| pixel(reference, i)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..iterations {
        let rot = random_rotation(&mut rng);
        let rt = rot.transpose();
        let ps: Vec<Vector3<f64>> = cloud.iter().map(|p| rt * p).collect();
        let pr: Vec<Vector3<f64>> = target.iter().map(|p| rt * p).collect();
        let mut delta = vec![Vector3::zeros(); cloud.len()];
        for axis in 0..3 {
            let s: Vec<f64> = ps.iter().map(|p| p[axis]).collect();
            let r: Vec<f64> = pr.iter().map(|p| p[axis]).collect();
            for (d, (m, v)) in delta.iter_mut().zip(match_marginal(&s, &r).into_iter().zip(&s)) {
                d[axis] = m - v;
            }
        }
        for (p, d) in cloud.iter_mut().zip(&delta) {
            *p += rot * d;
        }
    }
    let mut out = src.data().to_vec();
    for (&i, p) in idx.iter().zip(&cloud) {
        for c in 0..3 {
            out[3 * i + c] = p[c].clamp(0.0, 1.0);
        }
    }
    Image::new(src.height(), src.width(), 3, out)
}
