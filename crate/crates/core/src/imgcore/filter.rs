use super::Image;
use crate::error::{invalid, Result};

/// Normalized 1-d Gaussian taps with radius `⌈3σ⌉`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as isize;
    let taps: Vec<f64> = (-r..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / s).collect()
}

fn convolve_rows(img: &Image, k: &[f64], horizontal: bool) -> Image {
    let (h, w, ch) = (img.height(), img.width(), img.channels());
    let r = (k.len() / 2) as isize;
    let mut out = vec![0.0; img.data().len()];
    let d = img.data();
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let mut acc = 0.0;
                for (i, &kv) in k.iter().enumerate() {
                    let off = i as isize - r;
                    let (sx, sy) = if horizontal {
                        ((x as isize + off).clamp(0, w as isize - 1) as usize, y)
                    } else {
                        (x, (y as isize + off).clamp(0, h as isize - 1) as usize)
                    };
                    acc += kv * d[(sy * w + sx) * ch + c];
                }
                out[(y * w + x) * ch + c] = acc;
            }
        }
    }
    Image::new(h, w, ch, out).expect("same dimensions as input")
}

/// Separable Gaussian blur with replicated borders. `sigma = 0` is identity.
pub fn gaussian_blur(img: &Image, sigma: f64) -> Result<Image> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(invalid(format!("blur sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let k = gaussian_kernel(sigma);
    Ok(convolve_rows(&convolve_rows(img, &k, true), &k, false))
}

/// `clamp(img + amount · (img − blur(img, sigma)))`.
pub fn unsharp_sharpen(img: &Image, sigma: f64, amount: f64) -> Result<Image> {
    if !(amount >= 0.0) {
        return Err(invalid(format!("sharpen amount must be >= 0, got {amount}")));
    }
    let blurred = gaussian_blur(img, sigma)?;
    let data = img
        .data()
        .iter()
        .zip(blurred.data())
        .map(|(&v, &b)| (v + amount * (v - b)).clamp(0.0, 1.0))
        .collect();
    Image::new(img.height(), img.width(), img.channels(), data)
}

/// Grayscale erosion: minimum over a `(2r+1)²` square, replicated borders.
pub fn erode(img: &Image, radius: usize) -> Image {
    if radius == 0 {
        return img.clone();
    }
    let pass = |src: &Image, horizontal: bool| {
        let (h, w) = (src.height() as isize, src.width() as isize);
        Image::from_fn(src.height(), src.width(), src.channels(), |x, y, c| {
            let mut m = f64::INFINITY;
            for off in -(radius as isize)..=radius as isize {
                let (sx, sy) = if horizontal {
                    ((x as isize + off).clamp(0, w - 1), y as isize)
                } else {
                    (x as isize, (y as isize + off).clamp(0, h - 1))
                };
                m = m.min(src.get(sx as usize, sy as usize, c));
            }
            m
        })
    };
    pass(&pass(img, true), false)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn textured() -> Image {
        Image::from_fn(16, 13, 3, |x, y, c| {
            0.5 + 0.3 * ((x * 7 + y * 3 + c) as f64 * 0.9).sin()
        })
    }

    #[test]
    fn zero_sigma_is_identity() {
        let img = textured();
        assert_eq!(gaussian_blur(&img, 0.0).unwrap(), img);
    }

    #[test]
    fn constants_are_preserved() {
        let img = Image::filled(9, 11, &[0.25, 0.5, 0.75]);
        for sigma in [0.5, 1.0, 3.7] {
            let b = gaussian_blur(&img, sigma).unwrap();
            assert!(b.max_abs_diff(&img) < 1e-12);
        }
    }

    #[test]
    fn impulse_center_equals_squared_kernel_peak() {
        let mut img = Image::zeros(21, 21, 1);
        img.set(10, 10, 0, 1.0);
        let b = gaussian_blur(&img, 1.0).unwrap();
        let norm: f64 = (-3..=3).map(|i: i32| (-(i * i) as f64 / 2.0).exp()).sum();
        let peak = 1.0 / norm;
        assert!((b.get(10, 10, 0) - peak * peak).abs() < 1e-15);
    }

    #[test]
    fn blur_is_linear() {
        let img = textured();
        let a = 0.37;
        let lhs = gaussian_blur(&img.map(|v| a * v), 1.3).unwrap();
        let rhs = gaussian_blur(&img, 1.3).unwrap().map(|v| a * v);
        assert!(lhs.max_abs_diff(&rhs) < 1e-15);
    }

    #[test]
    fn negative_parameters_rejected() {
        let img = textured();
        assert!(gaussian_blur(&img, -1.0).is_err());
        assert!(unsharp_sharpen(&img, -1.0, 1.0).is_err());
        assert!(unsharp_sharpen(&img, 1.0, -0.5).is_err());
    }

    #[test]
    fn unsharp_zero_amount_and_constants() {
        let img = textured();
        assert_eq!(unsharp_sharpen(&img, 1.0, 0.0).unwrap(), img);
        let flat = Image::filled(8, 8, &[0.4]);
        assert!(unsharp_sharpen(&flat, 2.0, 3.0).unwrap().max_abs_diff(&flat) < 1e-12);
    }

    #[test]
    fn unsharp_overshoots_both_sides_of_step() {
        let step = Image::from_fn(1, 20, 1, |x, _, _| if x < 10 { 0.2 } else { 0.8 });
        let s = unsharp_sharpen(&step, 1.0, 1.0).unwrap();
        assert!(s.get(9, 0, 0) < 0.2);
        assert!(s.get(10, 0, 0) > 0.8);
        // far from the edge nothing changes
        assert!((s.get(0, 0, 0) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn erosion_shrinks_a_square() {
        let sq = Image::from_fn(10, 10, 1, |x, y, _| {
            if (2..8).contains(&x) && (2..8).contains(&y) {
                1.0
            } else {
                0.0
            }
        });
        let e = erode(&sq, 1);
        assert_eq!(e.get(2, 2, 0), 0.0);
        assert_eq!(e.get(3, 3, 0), 1.0);
        assert_eq!(e.data().iter().sum::<f64>(), 16.0);
    }
}
