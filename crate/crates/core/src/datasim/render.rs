use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::raster::{convex_hull, Shape};
use super::rig::{build_rig, project};
use super::{IdentityParams, StateParams};
use crate::error::{invalid, Result};
use crate::geometry::{regions, LandmarkSet, TEMPLATE_SCALE};
use crate::imgcore::{gaussian_blur, Image};

/// A rendered frame with its ground truth.
#[derive(Debug, Clone)]
pub struct Rendered {
    pub image: Image,
    pub landmarks: LandmarkSet,
    /// Soft head coverage, one channel.
    pub mask: Image,
}

/// The frame as an affine function of the identity colours:
/// `pixel_c = constant_c + skin_c · skin + feature_c · feature`.
pub(crate) struct Layers {
    pub width: usize,
    pub height: usize,
    pub constant: Vec<[f64; 3]>,
    pub skin: Vec<f64>,
    pub feature: Vec<f64>,
    pub head: Vec<f64>,
    pub landmarks: Vec<[f64; 2]>,
}

impl Layers {
    pub fn compose(&self, id: &IdentityParams) -> Image {
        let mut data = Vec::with_capacity(self.skin.len() * 3);
        for i in 0..self.skin.len() {
            for c in 0..3 {
                let v = self.constant[i][c] + self.skin[i] * id.skin[c] + self.feature[i] * id.feature[c];
                data.push(v.clamp(0.0, 1.0));
            }
        }
        Image::new(self.height, self.width, 3, data).expect("finite layers")
    }
}

/// Smooth low-frequency texture, fixed by the seed. `offset` (pixels) pans
/// the texture so the whole frame moves with the face.
pub fn background(seed: u64, size: usize, offset: [f64; 2]) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6261_636b);
    let base: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.25..0.75));
    let waves: Vec<([f64; 2], f64, [f64; 3])> = (0..4)
        .map(|_| {
            let f = [rng.random_range(0.5..3.0), rng.random_range(0.5..3.0)];
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            let amp = std::array::from_fn(|_| rng.random_range(0.0..0.08));
            (f, phase, amp)
        })
        .collect();
    let s = size as f64;
    Image::from_fn(size, size, 3, |x, y, c| {
        let mut v = base[c];
        for (f, ph, amp) in &waves {
            v += amp[c] * (std::f64::consts::TAU * (f[0] * (x as f64 - offset[0]) + f[1] * (y as f64 - offset[1])) / s + ph).sin();
        }
        v.clamp(0.0, 1.0)
    })
}

/// Optical blur applied to every rendered frame; it keeps resampled frames
/// free of aliasing at sharp feature edges.
const CAMERA_BLUR: f64 = 0.8;

fn blur_plane(v: Vec<f64>, size: usize) -> Vec<f64> {
    let img = Image::new(size, size, 1, v).expect("finite layer");
    gaussian_blur(&img, CAMERA_BLUR).expect("valid sigma").into_data()
}

/// Builds the colour-linear decomposition of a frame. With `face_only` the
/// head covers the whole frame, which is what a fitter restricted to the face
/// interior needs.
pub(crate) fn layers(id: &IdentityParams, st: &StateParams, size: usize, face_only: bool) -> Layers {
    let rig = build_rig(id, st);
    let lms = project(&rig.landmarks, st, size);
    let forehead = project(&rig.forehead, st, size);
    let px_per_unit = size as f64 * TEMPLATE_SCALE * st.zoom;
    let n = size * size;

    let mut all = lms.clone();
    all.extend_from_slice(&forehead);
    let head = convex_hull(&all);
    let head_cov = if face_only {
        vec![1.0; n]
    } else {
        Shape::Polygon(head).rasterize(size, size)
    };

    let poly = |r: std::ops::Range<usize>| Shape::Polygon(lms[r].to_vec());
    let line = |r: std::ops::Range<usize>, hw: f64| Shape::Polyline(lms[r].to_vec(), hw * px_per_unit);
    let nose_a = line(regions::NOSE_BRIDGE.start..regions::NOSE_BRIDGE.end, 0.03).rasterize(size, size);
    let nose_b = line(regions::NOSTRILS, 0.03).rasterize(size, size);
    let brow_r = line(regions::RIGHT_BROW, 0.035).rasterize(size, size);
    let brow_l = line(regions::LEFT_BROW, 0.035).rasterize(size, size);
    let eye_r = poly(regions::RIGHT_EYE).rasterize(size, size);
    let eye_l = poly(regions::LEFT_EYE).rasterize(size, size);
    let lip_o = poly(regions::OUTER_LIP).rasterize(size, size);
    let lip_i = poly(regions::INNER_LIP).rasterize(size, size);

    let pan = [st.shift[0] * size as f64, st.shift[1] * size as f64];
    let bg = background(st.background_seed, size, pan);
    let mut constant = Vec::with_capacity(n);
    let mut skin = Vec::with_capacity(n);
    let mut feature = Vec::with_capacity(n);
    for i in 0..n {
        let x = (i % size) as f64;
        let g = st.illumination * (1.0 + 0.12 * (x / size as f64 - 0.5 - st.shift[0]));
        let mut a = [0.0; 3];
        a.copy_from_slice(bg.pixel(i % size, i / size));
        let (mut s, mut f) = (0.0, 0.0);
        let mut over = |alpha: f64, ca: f64, cs: f64, cf: f64, a: &mut [f64; 3]| {
            let alpha = alpha.clamp(0.0, 1.0);
            for v in a.iter_mut() {
                *v = (1.0 - alpha) * *v + alpha * ca;
            }
            s = (1.0 - alpha) * s + alpha * cs;
            f = (1.0 - alpha) * f + alpha * cf;
        };
        over(head_cov[i], 0.0, g, 0.0, &mut a);
        over(nose_a[i].max(nose_b[i]), 0.0, 0.7 * g, 0.0, &mut a);
        over(brow_r[i].max(brow_l[i]), 0.0, 0.0, g, &mut a);
        over(eye_r[i].max(eye_l[i]), 0.0, 0.0, g, &mut a);
        over(lip_o[i] - lip_i[i], 0.0, 0.5 * g, 0.5 * g, &mut a);
        over(lip_i[i], 0.1 * g, 0.0, 0.0, &mut a);
        constant.push(a);
        skin.push(s);
        feature.push(f);
    }
    let constant = {
        let flat: Vec<f64> = constant.iter().flatten().copied().collect();
        let img = Image::new(size, size, 3, flat).expect("finite layer");
        let d = gaussian_blur(&img, CAMERA_BLUR).expect("valid sigma").into_data();
        d.chunks_exact(3).map(|p| [p[0], p[1], p[2]]).collect()
    };
    let skin = blur_plane(skin, size);
    let feature = blur_plane(feature, size);
    Layers {
        width: size,
        height: size,
        constant,
        skin,
        feature,
        head: head_cov,
        landmarks: lms,
    }
}

/// Deterministic vector rendering of one frame.
pub fn render(id: &IdentityParams, st: &StateParams, size: usize) -> Result<Rendered> {
    id.validate()?;
    st.validate()?;
    if size < 16 {
        return Err(invalid(format!("frame size must be at least 16, got {size}")));
    }
    let l = layers(id, st, size, false);
    let image = l.compose(id);
    let mask = Image::new(size, size, 1, l.head.clone())?;
    let landmarks = LandmarkSet::new(l.landmarks)?;
    Ok(Rendered {
        image,
        landmarks,
        mask,
    })
}
