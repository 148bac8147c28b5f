use crate::geometry::{regions, LandmarkSet, Point2};
use crate::imgcore::WeightMap;

pub const EYE_DILATION: f64 = 2.0;

fn seg_dist2(p: Point2, a: Point2, b: Point2) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p[0] - a[0] - t * dx).powi(2) + (p[1] - a[1] - t * dy).powi(2)
}

fn inside(p: Point2, poly: &[Point2]) -> bool {
    let n = poly.len();
    let mut c = false;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + n - 1) % n]);
        if (a[1] > p[1]) != (b[1] > p[1]) && p[0] < a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]) {
            c = !c;
        }
    }
    c
}

/// Per-pixel loss weights for an aligned face: `eye_weight` on pixels inside
/// either eye polygon or within 2 px of it, 1 elsewhere.
pub fn eye_weight_map(lms: &LandmarkSet, size: usize, eye_weight: f64) -> WeightMap {
    let eyes: Vec<&[Point2]> = [regions::RIGHT_EYE, regions::LEFT_EYE]
        .into_iter()
        .map(|r| &lms.points()[r])
        .collect();
    let d2 = EYE_DILATION * EYE_DILATION;
    let mut data = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let p = [x as f64, y as f64];
            let hit = eyes.iter().any(|poly| {
                inside(p, poly) || (0..poly.len()).any(|i| seg_dist2(p, poly[i], poly[(i + 1) % poly.len()]) <= d2)
            });
            data.push(if hit { eye_weight } else { 1.0 });
        }
    }
    WeightMap::new(size, size, data).expect("non-negative weights")
}
