//! Planar geometry primitives shared by every stage of the pipeline.

use std::f64::consts::{FRAC_PI_2, PI};
use std::ops::{Add, Mul, Neg, Sub};

/// A point or displacement in the scene's local metric frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_angle(theta: f64) -> Self {
        Self::new(theta.cos(), theta.sin())
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    pub fn heading(self) -> f64 {
        self.y.atan2(self.x)
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn rotate(self, theta: f64) -> Vec2 {
        let (s, c) = theta.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn lerp(self, o: Vec2, t: f64) -> Vec2 {
        self + (o - self) * t
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wraps an angle into (-pi, pi].
pub fn normalize_angle(theta: f64) -> f64 {
    let mut a = theta % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// `(sin, cos)` evaluated on the angle reduced to `[-pi/4, pi/4]`, so
/// angles a quarter turn apart give swapped and negated values.
pub fn sin_cos_quadrant(theta: f64) -> (f64, f64) {
    let k = (theta / FRAC_PI_2).round();
    let (s, c) = (theta - k * FRAC_PI_2).sin_cos();
    match (k as i64).rem_euclid(4) {
        0 => (s, c),
        1 => (c, -s),
        2 => (-s, -c),
        _ => (-c, s),
    }
}

/// Signed shortest rotation taking `from` onto `to`, in (-pi, pi].
pub fn shortest_arc(from: f64, to: f64) -> f64 {
    normalize_angle(to - from)
}

/// A rigid 2D pose used to express world points in a vehicle-centred frame
/// (x forward, y left).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub origin: Vec2,
    pub heading: f64,
}

impl Frame {
    pub fn new(origin: Vec2, heading: f64) -> Self {
        Self { origin, heading }
    }

    pub fn to_local(&self, p: Vec2) -> Vec2 {
        (p - self.origin).rotate(-self.heading)
    }

    pub fn to_world(&self, p: Vec2) -> Vec2 {
        p.rotate(self.heading) + self.origin
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec2,
    pub max: Vec2,
}

impl Aabb {
    pub fn from_points(points: &[Vec2]) -> Option<Aabb> {
        let first = *points.first()?;
        let mut b = Aabb { min: first, max: first };
        for p in &points[1..] {
            b.min.x = b.min.x.min(p.x);
            b.min.y = b.min.y.min(p.y);
            b.max.x = b.max.x.max(p.x);
            b.max.y = b.max.y.max(p.y);
        }
        Some(b)
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn intersects(&self, o: &Aabb) -> bool {
        self.min.x <= o.max.x && o.min.x <= self.max.x && self.min.y <= o.max.y && o.min.y <= self.max.y
    }

    pub fn union(&self, o: &Aabb) -> Aabb {
        Aabb {
            min: Vec2::new(self.min.x.min(o.min.x), self.min.y.min(o.min.y)),
            max: Vec2::new(self.max.x.max(o.max.x), self.max.y.max(o.max.y)),
        }
    }
}

/// Twice the signed area; positive for counter-clockwise rings.
pub fn signed_area2(ring: &[Vec2]) -> f64 {
    let n = ring.len();
    (0..n).map(|i| ring[i].cross(ring[(i + 1) % n])).sum()
}

pub fn signed_area(ring: &[Vec2]) -> f64 {
    0.5 * signed_area2(ring)
}

const ON_SEGMENT_EPS: f64 = 1e-9;

/// Distance from `p` to segment `ab`, with the clamped projection parameter.
pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> (f64, f64) {
    let ab = b - a;
    let len2 = ab.dot(ab);
    let t = if len2 > 0.0 { ((p - a).dot(ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (p.distance(a + ab * t), t)
}

/// Point-in-polygon by winding number. Points on the boundary count as inside.
pub fn point_in_polygon(p: Vec2, ring: &[Vec2]) -> bool {
    point_in_polygon_tol(p, ring, ON_SEGMENT_EPS)
}

/// As [`point_in_polygon`], treating points within `tol` of an edge as inside.
pub fn point_in_polygon_tol(p: Vec2, ring: &[Vec2], tol: f64) -> bool {
    let n = ring.len();
    if n < 3 {
        return false;
    }
    let mut winding = 0i32;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        if point_segment_distance(p, a, b).0 <= tol {
            return true;
        }
        let side = (b - a).cross(p - a);
        if a.y <= p.y {
            if b.y > p.y && side > 0.0 {
                winding += 1;
            }
        } else if b.y <= p.y && side < 0.0 {
            winding -= 1;
        }
    }
    winding != 0
}

fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment(a: Vec2, b: Vec2, p: Vec2) -> bool {
    p.x >= a.x.min(b.x) - ON_SEGMENT_EPS
        && p.x <= a.x.max(b.x) + ON_SEGMENT_EPS
        && p.y >= a.y.min(b.y) - ON_SEGMENT_EPS
        && p.y <= a.y.max(b.y) + ON_SEGMENT_EPS
}

/// Closed-segment intersection test (touching counts).
pub fn segments_intersect(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

/// True when no two non-adjacent edges of the ring intersect and no vertex repeats.
pub fn is_simple_polygon(ring: &[Vec2]) -> bool {
    let n = ring.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if ring[i] == ring[j] {
                return false;
            }
        }
    }
    let boxes: Vec<Aabb> = (0..n).map(|i| Aabb::from_points(&[ring[i], ring[(i + 1) % n]]).unwrap()).collect();
    for i in 0..n {
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent || !boxes[i].intersects(&boxes[j]) {
                continue;
            }
            if segments_intersect(ring[i], ring[(i + 1) % n], ring[j], ring[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

/// Whether two simple polygons share any point (interiors or boundaries).
pub fn polygons_intersect(a: &[Vec2], b: &[Vec2]) -> bool {
    match (Aabb::from_points(a), Aabb::from_points(b)) {
        (Some(ba), Some(bb)) if ba.intersects(&bb) => {}
        _ => return false,
    }
    if a.iter().any(|&p| point_in_polygon(p, b)) || b.iter().any(|&p| point_in_polygon(p, a)) {
        return true;
    }
    let (na, nb) = (a.len(), b.len());
    (0..na).any(|i| (0..nb).any(|j| segments_intersect(a[i], a[(i + 1) % na], b[j], b[(j + 1) % nb])))
}

pub fn polyline_length(line: &[Vec2]) -> f64 {
    line.windows(2).map(|w| w[0].distance(w[1])).sum()
}
