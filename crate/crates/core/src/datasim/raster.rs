//! Anti-aliased coverage of polygons and thick polylines.

use crate::geometry::Point2;

const RAMP: f64 = 2.0;

pub(crate) enum Shape {
    Polygon(Vec<Point2>),
    Polyline(Vec<Point2>, f64),
}

fn seg_dist2(p: Point2, a: Point2, b: Point2) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (ex, ey) = (p[0] - a[0] - t * dx, p[1] - a[1] - t * dy);
    ex * ex + ey * ey
}

fn inside(p: Point2, poly: &[Point2]) -> bool {
    let mut c = false;
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + n - 1) % n]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                c = !c;
            }
        }
    }
    c
}

impl Shape {
    /// Coverage at a point: a linear ramp `RAMP` pixels wide across the boundary.
    fn point_coverage(&self, p: Point2) -> f64 {
        match self {
            Shape::Polygon(poly) => {
                let n = poly.len();
                let d = (0..n)
                    .map(|i| seg_dist2(p, poly[i], poly[(i + 1) % n]))
                    .fold(f64::INFINITY, f64::min)
                    .sqrt();
                let sd = if inside(p, poly) { d } else { -d };
                (0.5 + sd / RAMP).clamp(0.0, 1.0)
            }
            Shape::Polyline(line, half_width) => {
                let d = line
                    .windows(2)
                    .map(|w| seg_dist2(p, w[0], w[1]))
                    .fold(f64::INFINITY, f64::min)
                    .sqrt();
                (0.5 + (half_width - d) / RAMP).clamp(0.0, 1.0)
            }
        }
    }

    fn bbox(&self) -> [f64; 4] {
        let (pts, pad) = match self {
            Shape::Polygon(p) => (p, RAMP),
            Shape::Polyline(p, hw) => (p, hw + RAMP),
        };
        let mut b = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        for q in pts {
            b[0] = b[0].min(q[0]);
            b[1] = b[1].min(q[1]);
            b[2] = b[2].max(q[0]);
            b[3] = b[3].max(q[1]);
        }
        [b[0] - pad, b[1] - pad, b[2] + pad, b[3] + pad]
    }

    /// Per-pixel coverage on a `w`×`h` grid (pixel centers at integer
    /// coordinates), averaged over a 2×2 sub-sample pattern.
    pub fn rasterize(&self, w: usize, h: usize) -> Vec<f64> {
        let mut out = vec![0.0; w * h];
        let b = self.bbox();
        let x0 = (b[0].floor().max(0.0)) as usize;
        let y0 = (b[1].floor().max(0.0)) as usize;
        let x1 = (b[2].ceil().max(-1.0) + 1.0).min(w as f64) as usize;
        let y1 = (b[3].ceil().max(-1.0) + 1.0).min(h as f64) as usize;
        const OFF: [f64; 2] = [-0.25, 0.25];
        for y in y0..y1 {
            for x in x0..x1 {
                let mut acc = 0.0;
                for oy in OFF {
                    for ox in OFF {
                        acc += self.point_coverage([x as f64 + ox, y as f64 + oy]);
                    }
                }
                out[y * w + x] = acc / 4.0;
            }
        }
        out
    }
}

/// Counter-clockwise convex hull (monotone chain).
pub(crate) fn convex_hull(points: &[Point2]) -> Vec<Point2> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: Point2, a: Point2, b: Point2| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut hull: Vec<Point2> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point2>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_coverage_area() {
        let sq = Shape::Polygon(vec![[10.0, 10.0], [30.0, 10.0], [30.0, 25.0], [10.0, 25.0]]);
        let cov = sq.rasterize(40, 40);
        // Pixel centers at integers: the square spans 20×15 pixel areas.
        let area: f64 = cov.iter().sum();
        assert!((area - 300.0).abs() < 2.0, "{area}");
        assert_eq!(cov[20 * 40 + 20], 1.0);
        assert_eq!(cov[0], 0.0);
    }

    #[test]
    fn hull_of_square_with_interior_points() {
        let h = convex_hull(&[[0.0, 0.0], [1.0, 0.0], [0.5, 0.5], [1.0, 1.0], [0.0, 1.0], [0.2, 0.7]]);
        assert_eq!(h.len(), 4);
    }
}
