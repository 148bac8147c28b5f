use crate::error::{invalid, Error, Result};
use crate::imgcore::Image;

/// Cap on the default CG iteration budget.
pub const CG_MAX_ITER_CAP: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PoissonReport {
    pub unknowns: usize,
    /// Largest iteration count over channels.
    pub iterations: usize,
    /// Largest final `‖r‖∞` over channels.
    pub residual: f64,
}

/// Default iteration budget: `10·√|Ω|`, at least 10, capped.
pub fn default_cg_max_iter(unknowns: usize) -> usize {
    ((10.0 * (unknowns as f64).sqrt()).ceil() as usize).clamp(10, CG_MAX_ITER_CAP)
}

/// Interior Ω: pixels with mask ≥ 0.5 that do not touch the frame border.
pub fn interior(mask: &Image) -> Vec<bool> {
    let (h, w) = (mask.height(), mask.width());
    let mut inside = vec![false; h * w];
    for y in 1..h.saturating_sub(1) {
        for x in 1..w.saturating_sub(1) {
            inside[y * w + x] = mask.get(x, y, 0) >= 0.5;
        }
    }
    inside
}

/// Seamless cloning: inside Ω the result has the 5-point Laplacian of
/// `source` and agrees with `target` on the boundary; outside Ω it is
/// `target` exactly. Solved per channel by Jacobi-preconditioned CG until
/// `‖r‖∞ < tol`. An empty interior returns `target` with zero unknowns.
pub fn poisson_blend(
    target: &Image,
    source: &Image,
    mask: &Image,
    tol: f64,
    max_iter: Option<usize>,
) -> Result<(Image, PoissonReport)> {
    if !target.same_dims(source) {
        return Err(invalid("poisson source and target differ in size"));
    }
    if mask.channels() != 1 || !mask.same_size(target) {
        return Err(invalid("poisson mask must be single-channel and match the image size"));
    }
    if !(tol > 0.0) {
        return Err(invalid("cg tolerance must be positive"));
    }
    let (h, w, ch) = (target.height(), target.width(), target.channels());
    let inside = interior(mask);
    let cells: Vec<usize> = (0..h * w).filter(|&i| inside[i]).collect();
    let mut report = PoissonReport {
        unknowns: cells.len(),
        ..Default::default()
    };
    if cells.is_empty() {
        log::warn!("poisson blend: empty interior, returning target");
        return Ok((target.clone(), report));
    }
    let mut slot = vec![usize::MAX; h * w];
    for (k, &i) in cells.iter().enumerate() {
        slot[i] = k;
    }
    let neighbors = |i: usize| [i - 1, i + 1, i - w, i + w];
    let budget = max_iter.unwrap_or_else(|| default_cg_max_iter(cells.len()));
    let mut out = target.data().to_vec();
    for c in 0..ch {
        let (t, s) = (target.data(), source.data());
        let b: Vec<f64> = cells
            .iter()
            .map(|&i| {
                neighbors(i).iter().fold(0.0, |acc, &q| {
                    let lap = s[i * ch + c] - s[q * ch + c];
                    acc + lap + if inside[q] { 0.0 } else { t[q * ch + c] }
                })
            })
            .collect();
        let apply = |x: &[f64], y: &mut [f64]| {
            for (k, &i) in cells.iter().enumerate() {
                let mut v = 4.0 * x[k];
                for q in neighbors(i) {
                    if inside[q] {
                        v -= x[slot[q]];
                    }
                }
                y[k] = v;
            }
        };
        // Warm start from the target values.
        let mut x: Vec<f64> = cells.iter().map(|&i| t[i * ch + c]).collect();
        let (iters, res) = pcg(&apply, &b, &mut x, tol, budget)?;
        report.iterations = report.iterations.max(iters);
        report.residual = report.residual.max(res);
        for (k, &i) in cells.iter().enumerate() {
            out[i * ch + c] = x[k];
        }
    }
    Ok((Image::new(h, w, ch, out)?, report))
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// CG with the constant diagonal (4) of the 5-point Laplacian as
/// preconditioner. Returns `(iterations, ‖r‖∞)`.
fn pcg(apply: &dyn Fn(&[f64], &mut [f64]), b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<(usize, f64)> {
    let n = b.len();
    let mut ax = vec![0.0; n];
    apply(x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut res = inf_norm(&r);
    if res < tol {
        return Ok((0, res));
    }
    let mut z: Vec<f64> = r.iter().map(|v| v / 4.0).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        res = inf_norm(&r);
        if res < tol {
            return Ok((it, res));
        }
        for k in 0..n {
            z[k] = r[k] / 4.0;
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(Error::CgNotConverged {
        iterations: max_iter,
        residual: res,
    })
}
