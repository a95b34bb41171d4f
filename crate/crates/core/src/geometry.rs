//! Planar convex hull and the target-to-hull distance used as the fencing
//! metric.

use crate::model::Vec2;

/// Cross products with magnitude below this are treated as collinear.
pub const COLLINEAR_TOL: f64 = 1e-12;

/// Convex polygon with counterclockwise vertices.
///
/// One vertex is a point and two vertices are a segment; both show up when
/// agents coincide in projection or line up.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<Vec2>,
}

impl Polygon {
    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Signed area (positive for counterclockwise order).
    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        (0..n)
            .map(|i| self.vertices[i].cross(self.vertices[(i + 1) % n]))
            .sum::<f64>()
            * 0.5
    }

    pub fn contains(&self, p: Vec2) -> bool {
        distance_to_hull(p, self) == 0.0
    }
}

fn turn(o: Vec2, a: Vec2, b: Vec2) -> f64 {
    (a - o).cross(b - o)
}

/// Andrew's monotone chain.
pub fn convex_hull(points: &[Vec2]) -> Polygon {
    let mut pts = points.to_vec();
    pts.sort_by(Vec2::total_cmp);
    pts.dedup();
    if pts.len() <= 2 {
        return Polygon { vertices: pts };
    }

    let mut lower: Vec<Vec2> = Vec::with_capacity(pts.len());
    for &p in &pts {
        while lower.len() >= 2 && turn(lower[lower.len() - 2], lower[lower.len() - 1], p) <= COLLINEAR_TOL {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Vec2> = Vec::with_capacity(pts.len());
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && turn(upper[upper.len() - 2], upper[upper.len() - 1], p) <= COLLINEAR_TOL {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    // Collinear input leaves one extreme in each chain, i.e. a segment.
    lower.extend(upper);
    Polygon { vertices: lower }
}

/// Distance from `p` to the segment `[a, b]`.
pub fn distance_to_segment(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Zero when `p` lies inside or on the hull, otherwise the Euclidean distance
/// to its boundary.
pub fn distance_to_hull(p: Vec2, hull: &Polygon) -> f64 {
    let v = &hull.vertices;
    match v.len() {
        0 => f64::INFINITY,
        1 => (p - v[0]).norm(),
        2 => distance_to_segment(p, v[0], v[1]),
        n => {
            let inside = (0..n).all(|i| turn(v[i], v[(i + 1) % n], p) >= 0.0);
            if inside {
                return 0.0;
            }
            (0..n)
                .map(|i| distance_to_segment(p, v[i], v[(i + 1) % n]))
                .fold(f64::INFINITY, f64::min)
        }
    }
}
