use nalgebra::{Matrix2x3, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{LandmarkSet, Point3};
use crate::error::{invalid, Error, Result};

/// Head pose in degrees. The rotation is `Ry(yaw) · Rx(pitch) · Rz(roll)`
/// acting on rig coordinates (x right, y down, z away from the camera).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EulerAngles {
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

impl EulerAngles {
    pub fn new(yaw: f64, pitch: f64, roll: f64) -> Self {
        Self { yaw, pitch, roll }
    }
}

pub fn rotation_from_euler(a: &EulerAngles) -> [[f64; 3]; 3] {
    let (sy, cy) = a.yaw.to_radians().sin_cos();
    let (sx, cx) = a.pitch.to_radians().sin_cos();
    let (sz, cz) = a.roll.to_radians().sin_cos();
    let ry = Matrix3::new(cy, 0.0, sy, 0.0, 1.0, 0.0, -sy, 0.0, cy);
    let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, cx, -sx, 0.0, sx, cx);
    let rz = Matrix3::new(cz, -sz, 0.0, sz, cz, 0.0, 0.0, 0.0, 1.0);
    let r = ry * rx * rz;
    std::array::from_fn(|i| std::array::from_fn(|j| r[(i, j)]))
}

fn euler_from_rotation(r: &Matrix3<f64>) -> EulerAngles {
    let pitch = (-r[(1, 2)]).clamp(-1.0, 1.0).asin();
    let yaw = r[(0, 2)].atan2(r[(2, 2)]);
    let roll = r[(1, 0)].atan2(r[(1, 1)]);
    EulerAngles {
        yaw: yaw.to_degrees(),
        pitch: pitch.to_degrees(),
        roll: roll.to_degrees(),
    }
}

/// Scaled-orthographic pose fit of `lms` against a 3-d landmark rig.
pub fn euler_from_landmarks(lms: &LandmarkSet, template3d: &[Point3]) -> Result<EulerAngles> {
    let pts = lms.points();
    if template3d.len() != pts.len() {
        return Err(invalid("template and landmark counts differ"));
    }
    let n = pts.len() as f64;
    let c3 = template3d
        .iter()
        .fold(Vector3::zeros(), |a, p| a + Vector3::new(p[0], p[1], p[2]))
        / n;
    let c2 = lms.centroid();
    let mut xxt = Matrix3::zeros();
    let mut yxt = Matrix2x3::zeros();
    for (p, q) in template3d.iter().zip(pts) {
        let x = Vector3::new(p[0], p[1], p[2]) - c3;
        let y = nalgebra::Vector2::new(q[0] - c2[0], q[1] - c2[1]);
        xxt += x * x.transpose();
        yxt += y * x.transpose();
    }
    let scale3 = xxt.trace();
    if xxt.determinant() <= 1e-9 * scale3.powi(3) {
        return Err(Error::Degenerate("3-d template is planar or collinear".into()));
    }
    let inv = xxt
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("3-d template covariance is singular".into()))?;
    let p = yxt * inv;
    let svd = p.svd(true, true);
    let sv = svd.singular_values;
    if !(sv[1] > 1e-9 * sv[0].max(1e-300)) {
        return Err(Error::Degenerate("landmarks are collinear or coincident".into()));
    }
    let q = svd.u.unwrap() * svd.v_t.unwrap();
    let r0 = Vector3::new(q[(0, 0)], q[(0, 1)], q[(0, 2)]);
    let r1 = Vector3::new(q[(1, 0)], q[(1, 1)], q[(1, 2)]);
    let r2 = r0.cross(&r1);
    let r = Matrix3::from_rows(&[r0.transpose(), r1.transpose(), r2.transpose()]);
    Ok(euler_from_rotation(&r))
}
