use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use super::Point2;
use crate::error::{invalid, Error, Result};
use crate::imgcore::Affine2;

/// `p ↦ scale · R · p + t` with `R` a proper rotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityTransform {
    pub scale: f64,
    pub rotation: [[f64; 2]; 2],
    pub translation: [f64; 2],
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            rotation: [[1.0, 0.0], [0.0, 1.0]],
            translation: [0.0, 0.0],
        }
    }

    /// Rotation by `angle` radians (counter-clockwise in a y-up frame).
    pub fn from_parts(scale: f64, angle: f64, translation: [f64; 2]) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            scale,
            rotation: [[c, -s], [s, c]],
            translation,
        }
    }

    pub fn angle(&self) -> f64 {
        self.rotation[1][0].atan2(self.rotation[0][0])
    }

    pub fn apply(&self, p: Point2) -> Point2 {
        let r = &self.rotation;
        [
            self.scale * (r[0][0] * p[0] + r[0][1] * p[1]) + self.translation[0],
            self.scale * (r[1][0] * p[0] + r[1][1] * p[1]) + self.translation[1],
        ]
    }

    pub fn matrix(&self) -> Affine2 {
        let (s, r, t) = (self.scale, &self.rotation, &self.translation);
        [
            [s * r[0][0], s * r[0][1], t[0]],
            [s * r[1][0], s * r[1][1], t[1]],
        ]
    }

    pub fn inverse(&self) -> Result<Self> {
        if !(self.scale > 0.0) || !self.scale.is_finite() {
            return Err(Error::Degenerate("similarity with non-positive scale".into()));
        }
        let r = &self.rotation;
        let rt = [[r[0][0], r[1][0]], [r[0][1], r[1][1]]];
        let inv_s = 1.0 / self.scale;
        let t = self.translation;
        Ok(Self {
            scale: inv_s,
            rotation: rt,
            translation: [
                -inv_s * (rt[0][0] * t[0] + rt[0][1] * t[1]),
                -inv_s * (rt[1][0] * t[0] + rt[1][1] * t[1]),
            ],
        })
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &SimilarityTransform) -> Self {
        let a = Matrix2::from_row_slice(&[
            self.rotation[0][0],
            self.rotation[0][1],
            self.rotation[1][0],
            self.rotation[1][1],
        ]);
        let b = Matrix2::from_row_slice(&[
            other.rotation[0][0],
            other.rotation[0][1],
            other.rotation[1][0],
            other.rotation[1][1],
        ]);
        let r = a * b;
        Self {
            scale: self.scale * other.scale,
            rotation: [[r[(0, 0)], r[(0, 1)]], [r[(1, 0)], r[(1, 1)]]],
            translation: self.apply(other.translation),
        }
    }
}

/// Least-squares similarity mapping `src` onto `dst` (Umeyama's method).
pub fn umeyama(src: &[Point2], dst: &[Point2]) -> Result<SimilarityTransform> {
    if src.len() != dst.len() {
        return Err(invalid(format!(
            "point count mismatch: {} vs {}",
            src.len(),
            dst.len()
        )));
    }
    if src.len() < 2 {
        return Err(invalid("need at least two point pairs"));
    }
    if src.iter().chain(dst).flatten().any(|v| !v.is_finite()) {
        return Err(invalid("non-finite point"));
    }
    let n = src.len() as f64;
    let mean = |pts: &[Point2]| {
        pts.iter()
            .fold(Vector2::zeros(), |acc, p| acc + Vector2::new(p[0], p[1]))
            / n
    };
    let (mu_s, mu_d) = (mean(src), mean(dst));
    let mut cov = Matrix2::zeros();
    let mut var_s = 0.0;
    for (s, d) in src.iter().zip(dst) {
        let sc = Vector2::new(s[0], s[1]) - mu_s;
        let dc = Vector2::new(d[0], d[1]) - mu_d;
        cov += dc * sc.transpose();
        var_s += sc.norm_squared();
    }
    cov /= n;
    var_s /= n;
    let extent = src
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1.0);
    if var_s <= 1e-24 * extent * extent {
        return Err(Error::Degenerate("source points are coincident".into()));
    }
    let svd = cov.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut s = Matrix2::identity();
    if u.determinant() * vt.determinant() < 0.0 {
        s[(1, 1)] = -1.0;
    }
    let r = u * s * vt;
    let trace_ds = svd.singular_values[0] * s[(0, 0)] + svd.singular_values[1] * s[(1, 1)];
    let scale = trace_ds / var_s;
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::Degenerate("destination points are coincident".into()));
    }
    let t = mu_d - scale * r * mu_s;
    Ok(SimilarityTransform {
        scale,
        rotation: [[r[(0, 0)], r[(0, 1)]], [r[(1, 0)], r[(1, 1)]]],
        translation: [t[0], t[1]],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_and_compose() {
        let t = SimilarityTransform::from_parts(1.7, 0.4, [3.0, -2.0]);
        let id = t.compose(&t.inverse().unwrap());
        let p = id.apply([5.0, 7.0]);
        assert!((p[0] - 5.0).abs() < 1e-12 && (p[1] - 7.0).abs() < 1e-12);
        let m = t.matrix();
        let q = t.apply([1.0, 2.0]);
        assert!((m[0][0] + 2.0 * m[0][1] + m[0][2] - q[0]).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(umeyama(&[[1.0, 1.0]], &[[0.0, 0.0]]).is_err());
        assert!(umeyama(&[[1.0, 1.0]; 4], &[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [2.0, 2.0]]).is_err());
        assert!(umeyama(&[[0.0, 0.0], [1.0, 0.0]], &[[3.0, 3.0]; 2]).is_err());
    }

    #[test]
    fn two_points_recover_exact() {
        let t = SimilarityTransform::from_parts(2.0, -1.0, [0.5, 4.0]);
        let src = [[0.0, 0.0], [1.0, 0.5]];
        let dst = src.map(|p| t.apply(p));
        let e = umeyama(&src, &dst).unwrap();
        assert!((e.scale - 2.0).abs() < 1e-12);
        assert!((e.angle() + 1.0).abs() < 1e-12);
    }
}
