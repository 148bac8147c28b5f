//! sRGB ↔ CIELAB (D65). Lab images store `L/100` in channel 0 and raw `a`,
//! `b` in channels 1 and 2.

use std::sync::LazyLock;

use super::Image;
use crate::error::{invalid, Result};

const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.412_456_4, 0.357_576_1, 0.180_437_5],
    [0.212_672_9, 0.715_152_2, 0.072_175_0],
    [0.019_333_9, 0.119_192_0, 0.950_304_1],
];
const WHITE: [f64; 3] = [0.950_47, 1.0, 1.088_83];
const DELTA: f64 = 6.0 / 29.0;

static XYZ_TO_RGB: LazyLock<[[f64; 3]; 3]> = LazyLock::new(|| {
    let m = nalgebra::Matrix3::from_fn(|r, c| RGB_TO_XYZ[r][c]);
    let inv = m.try_inverse().expect("sRGB matrix is invertible");
    let mut out = [[0.0; 3]; 3];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = inv[(r, c)];
        }
    }
    out
});

fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.040_45 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn linear_to_srgb(c: f64) -> f64 {
    if c <= 0.003_130_8 {
        c * 12.92
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

fn f(t: f64) -> f64 {
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

fn f_inv(t: f64) -> f64 {
    if t > DELTA {
        t * t * t
    } else {
        3.0 * DELTA * DELTA * (t - 4.0 / 29.0)
    }
}

fn mat_mul(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

pub(crate) fn rgb_to_lab_px(rgb: [f64; 3]) -> [f64; 3] {
    let lin = rgb.map(srgb_to_linear);
    let xyz = mat_mul(&RGB_TO_XYZ, lin);
    let fx = f(xyz[0] / WHITE[0]);
    let fy = f(xyz[1] / WHITE[1]);
    let fz = f(xyz[2] / WHITE[2]);
    [
        (116.0 * fy - 16.0) / 100.0,
        500.0 * (fx - fy),
        200.0 * (fy - fz),
    ]
}

pub(crate) fn lab_to_rgb_px(lab: [f64; 3]) -> [f64; 3] {
    let fy = (lab[0] * 100.0 + 16.0) / 116.0;
    let fx = fy + lab[1] / 500.0;
    let fz = fy - lab[2] / 200.0;
    let xyz = [
        WHITE[0] * f_inv(fx),
        WHITE[1] * f_inv(fy),
        WHITE[2] * f_inv(fz),
    ];
    mat_mul(&XYZ_TO_RGB, xyz).map(linear_to_srgb)
}

fn convert(img: &Image, px: fn([f64; 3]) -> [f64; 3]) -> Result<Image> {
    if img.channels() != 3 {
        return Err(invalid("color conversion needs a 3-channel image"));
    }
    let mut data = Vec::with_capacity(img.data().len());
    for p in img.data().chunks_exact(3) {
        data.extend_from_slice(&px([p[0], p[1], p[2]]));
    }
    Image::new(img.height(), img.width(), 3, data)
}

pub fn rgb_to_lab(img: &Image) -> Result<Image> {
    convert(img, rgb_to_lab_px)
}

/// Inverse of [`rgb_to_lab`]. Out-of-gamut results are not clamped.
pub fn lab_to_rgb(img: &Image) -> Result<Image> {
    convert(img, lab_to_rgb_px)
}
