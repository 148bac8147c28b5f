use super::Image;
use crate::error::{invalid, Result};

/// Row-major 2×3 affine matrix.
pub type Affine2 = [[f64; 3]; 2];

/// How samples outside the source grid are resolved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Border {
    /// Coordinates are clamped to the nearest edge pixel.
    Replicate,
    /// Pixels outside the grid read as this value.
    Constant(f64),
}

/// Bilinear interpolation of the four pixels around `(x, y)`, writing one
/// value per channel into `out`. Coordinates are clamped to the image.
pub fn bilinear_sample(img: &Image, x: f64, y: f64) -> Vec<f64> {
    let mut out = vec![0.0; img.channels()];
    sample_into(img, x, y, Border::Replicate, &mut out);
    out
}

#[inline]
fn sample_into(img: &Image, x: f64, y: f64, border: Border, out: &mut [f64]) {
    let (w, h) = (img.width() as isize, img.height() as isize);
    let ch = img.channels();
    match border {
        Border::Replicate => {
            let xc = x.clamp(0.0, (w - 1) as f64);
            let yc = y.clamp(0.0, (h - 1) as f64);
            let (x0, y0) = (xc.floor() as isize, yc.floor() as isize);
            let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
            let (fx, fy) = (xc - x0 as f64, yc - y0 as f64);
            let d = img.data();
            let idx = |xx: isize, yy: isize| (yy as usize * w as usize + xx as usize) * ch;
            let (i00, i10, i01, i11) = (idx(x0, y0), idx(x1, y0), idx(x0, y1), idx(x1, y1));
            for c in 0..ch {
                let top = (1.0 - fx) * d[i00 + c] + fx * d[i10 + c];
                let bot = (1.0 - fx) * d[i01 + c] + fx * d[i11 + c];
                out[c] = (1.0 - fy) * top + fy * bot;
            }
        }
        Border::Constant(v) => {
            if !(x > -1.0 && y > -1.0 && x < w as f64 && y < h as f64) {
                out.fill(v);
                return;
            }
            let (x0, y0) = (x.floor() as isize, y.floor() as isize);
            let (fx, fy) = (x - x0 as f64, y - y0 as f64);
            let d = img.data();
            let fetch = |xx: isize, yy: isize, c: usize| {
                if xx < 0 || yy < 0 || xx >= w || yy >= h {
                    v
                } else {
                    d[(yy as usize * w as usize + xx as usize) * ch + c]
                }
            };
            for c in 0..ch {
                let top = (1.0 - fx) * fetch(x0, y0, c) + fx * fetch(x0 + 1, y0, c);
                let bot = (1.0 - fx) * fetch(x0, y0 + 1, c) + fx * fetch(x0 + 1, y0 + 1, c);
                out[c] = (1.0 - fy) * top + fy * bot;
            }
        }
    }
}

/// Resamples `img` onto an `out_h × out_w` grid. `m` maps output pixel
/// coordinates to input coordinates; the border is replicated.
pub fn warp_affine(img: &Image, m: &Affine2, out_h: usize, out_w: usize) -> Result<Image> {
    warp_affine_with_border(img, m, out_h, out_w, Border::Replicate)
}

pub fn warp_affine_with_border(
    img: &Image,
    m: &Affine2,
    out_h: usize,
    out_w: usize,
    border: Border,
) -> Result<Image> {
    if m.iter().flatten().any(|v| !v.is_finite()) {
        return Err(invalid("affine matrix must be finite"));
    }
    if img.is_empty() {
        return Err(invalid("cannot warp an empty image"));
    }
    let ch = img.channels();
    let mut data = vec![0.0; out_h * out_w * ch];
    for y in 0..out_h {
        for x in 0..out_w {
            let (xf, yf) = (x as f64, y as f64);
            let sx = m[0][0] * xf + m[0][1] * yf + m[0][2];
            let sy = m[1][0] * xf + m[1][1] * yf + m[1][2];
            let i = (y * out_w + x) * ch;
            sample_into(img, sx, sy, border, &mut data[i..i + ch]);
        }
    }
    Image::new(out_h, out_w, ch, data)
}
