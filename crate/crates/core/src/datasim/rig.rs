use super::{IdentityParams, StateParams};
use crate::geometry::{canonical_3d, regions, rotation_from_euler, Point2, Point3, TEMPLATE_CENTER, TEMPLATE_SCALE};

const TEMPLATE_EYE_SPACING: f64 = 0.72;
const MOUTH_DROP: f64 = 0.12;
const FOREHEAD_POINTS: usize = 9;

/// Identity- and expression-deformed copy of the template rig (68 points),
/// plus a forehead arc that closes the head outline.
pub(crate) struct Rig {
    pub landmarks: Vec<Point3>,
    pub forehead: Vec<Point3>,
}

fn eye_center(pts: &[Point3], r: std::ops::Range<usize>) -> [f64; 2] {
    let n = r.len() as f64;
    let (sx, sy) = pts[r].iter().fold((0.0, 0.0), |(a, b), p| (a + p[0], b + p[1]));
    [sx / n, sy / n]
}

pub(crate) fn build_rig(id: &IdentityParams, st: &StateParams) -> Rig {
    let base = canonical_3d();
    let mut p: Vec<Point3> = base.to_vec();

    for q in &mut p[regions::JAW] {
        q[0] /= id.head_aspect;
    }

    let dx = (id.eye_spacing - TEMPLATE_EYE_SPACING) / 2.0;
    for (eye, brow, sign) in [
        (regions::RIGHT_EYE, regions::RIGHT_BROW, -1.0),
        (regions::LEFT_EYE, regions::LEFT_BROW, 1.0),
    ] {
        let c = eye_center(base, eye.clone());
        for q in &mut p[eye] {
            q[0] = c[0] + (q[0] - c[0]) * id.eye_size + sign * dx;
            q[1] = c[1] + (q[1] - c[1]) * id.eye_size * st.eye_open;
        }
        for q in &mut p[brow] {
            q[0] += sign * dx;
        }
    }

    let top = base[regions::NOSE_BRIDGE.start][1];
    for q in &mut p[regions::NOSE_BRIDGE.start..regions::NOSTRILS.end] {
        q[1] = top + (q[1] - top) * id.nose_length;
    }

    for q in &mut p[regions::OUTER_LIP.start..regions::INNER_LIP.end] {
        q[0] *= id.mouth_width;
    }
    // Lower lip: outer 55..=59, inner 65..=67.
    for i in (55..60).chain(65..68) {
        p[i][1] += MOUTH_DROP * st.mouth_open;
    }

    let jaw_top = base[0];
    let forehead = (1..=FOREHEAD_POINTS)
        .map(|k| {
            let t = std::f64::consts::PI * k as f64 / (FOREHEAD_POINTS + 1) as f64;
            [
                jaw_top[0].abs() * t.cos() / id.head_aspect,
                jaw_top[1] - 0.85 * t.sin(),
                0.55 * (1.0 - t.sin()) + 0.05,
            ]
        })
        .collect();
    Rig {
        landmarks: p,
        forehead,
    }
}

/// Scaled-orthographic projection into a `size`² frame. With the default
/// state this is `size · (TEMPLATE_CENTER + TEMPLATE_SCALE · (x, y))`.
pub(crate) fn project(points: &[Point3], st: &StateParams, size: usize) -> Vec<Point2> {
    let r = rotation_from_euler(&crate::geometry::EulerAngles::new(st.yaw, st.pitch, st.roll));
    let s = size as f64;
    let k = TEMPLATE_SCALE * st.zoom;
    points
        .iter()
        .map(|p| {
            let x = r[0][0] * p[0] + r[0][1] * p[1] + r[0][2] * p[2];
            let y = r[1][0] * p[0] + r[1][1] * p[1] + r[1][2] * p[2];
            [
                s * (TEMPLATE_CENTER[0] + k * x + st.shift[0]),
                s * (TEMPLATE_CENTER[1] + k * y + st.shift[1]),
            ]
        })
        .collect()
}
