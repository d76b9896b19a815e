//! Planar geometry used by the simulator: vectors, segments, ray casts and
//! swept-circle contact tests.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector for a heading in degrees, counter-clockwise from +x.
    pub fn from_heading(degrees: f64) -> Self {
        let rad = degrees.to_radians();
        Self::new(rad.cos(), rad.sin())
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn length_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn length(self) -> f64 {
        self.length_squared().sqrt()
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).length()
    }

    pub fn normalized(self) -> Option<Vec2> {
        let len = self.length();
        (len > 0.0 && len.is_finite()).then(|| self * (1.0 / len))
    }

    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    /// Heading of this vector in degrees, in [0, 360).
    pub fn heading(self) -> f64 {
        crate::world::normalize_heading(self.y.atan2(self.x).to_degrees())
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Vec2,
    pub b: Vec2,
}

impl Segment {
    pub const fn new(a: Vec2, b: Vec2) -> Self {
        Self { a, b }
    }

    pub fn length(&self) -> f64 {
        self.a.distance(self.b)
    }

    pub fn closest_point(&self, p: Vec2) -> Vec2 {
        let ab = self.b - self.a;
        let len2 = ab.length_squared();
        if len2 == 0.0 {
            return self.a;
        }
        let t = ((p - self.a).dot(ab) / len2).clamp(0.0, 1.0);
        self.a + ab * t
    }

    pub fn distance_to(&self, p: Vec2) -> f64 {
        p.distance(self.closest_point(p))
    }

    /// True when the two closed segments share at least one point.
    pub fn intersects(&self, other: &Segment) -> bool {
        let d1 = orientation(other.a, other.b, self.a);
        let d2 = orientation(other.a, other.b, self.b);
        let d3 = orientation(self.a, self.b, other.a);
        let d4 = orientation(self.a, self.b, other.b);
        if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
            && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
        {
            return true;
        }
        (d1 == 0.0 && on_segment(other, self.a))
            || (d2 == 0.0 && on_segment(other, self.b))
            || (d3 == 0.0 && on_segment(self, other.a))
            || (d4 == 0.0 && on_segment(self, other.b))
    }
}

fn orientation(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment(seg: &Segment, p: Vec2) -> bool {
    p.x >= seg.a.x.min(seg.b.x)
        && p.x <= seg.a.x.max(seg.b.x)
        && p.y >= seg.a.y.min(seg.b.y)
        && p.y <= seg.a.y.max(seg.b.y)
}

/// Distance along a unit-direction ray to the first point of a segment.
pub fn ray_segment(origin: Vec2, dir: Vec2, seg: &Segment) -> Option<f64> {
    let edge = seg.b - seg.a;
    let denom = dir.cross(edge);
    let to_a = seg.a - origin;
    if denom.abs() < 1e-12 {
        // Parallel. Only a collinear overlap can be hit.
        if to_a.cross(dir).abs() > 1e-12 {
            return None;
        }
        let ta = to_a.dot(dir);
        let tb = (seg.b - origin).dot(dir);
        let (lo, hi) = if ta < tb { (ta, tb) } else { (tb, ta) };
        if hi < 0.0 {
            return None;
        }
        return Some(lo.max(0.0));
    }
    let t = to_a.cross(edge) / denom;
    let u = to_a.cross(dir) / denom;
    (t >= 0.0 && (0.0..=1.0).contains(&u)).then_some(t)
}

/// Distance along a unit-direction ray to the first point of a circle.
/// Returns 0 when the origin is already inside.
pub fn ray_circle(origin: Vec2, dir: Vec2, center: Vec2, radius: f64) -> Option<f64> {
    let oc = origin - center;
    let c = oc.length_squared() - radius * radius;
    if c <= 0.0 {
        return Some(0.0);
    }
    let b = oc.dot(dir);
    if b > 0.0 {
        return None;
    }
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    Some(-b - disc.sqrt())
}

/// Fraction `s` of the displacement `delta` at which a circle of `radius`
/// starting at `start` first touches the segment. `None` if it never does
/// within the full displacement.
pub fn sweep_circle_segment(start: Vec2, delta: Vec2, radius: f64, seg: &Segment) -> Option<f64> {
    let travel = delta.length();
    if travel == 0.0 {
        return None;
    }
    let dir = delta * (1.0 / travel);
    let mut best: Option<f64> = None;
    let mut consider = |dist: f64| {
        if dist <= travel {
            let s = (dist / travel).max(0.0);
            best = Some(best.map_or(s, |b: f64| b.min(s)));
        }
    };

    for end in [seg.a, seg.b] {
        if let Some(d) = ray_circle(start, dir, end, radius) {
            // Starting in contact only counts when moving inward.
            if d > 0.0 || dir.dot(end - start) > 0.0 {
                consider(d);
            }
        }
    }

    let edge = seg.b - seg.a;
    if let Some(unit) = edge.normalized() {
        let normal = unit.perp();
        let offset = (start - seg.a).dot(normal);
        let approach = dir.dot(normal);
        if approach != 0.0 {
            // Contact with the offset line on the side we start from.
            let side = if offset >= 0.0 { radius } else { -radius };
            let dist = (side - offset) / approach;
            let moving_in = offset.signum() * approach < 0.0 || offset == 0.0;
            if moving_in {
                let dist = dist.max(0.0);
                let hit = start + dir * dist;
                let along = (hit - seg.a).dot(unit);
                if (0.0..=edge.length()).contains(&along) {
                    consider(dist);
                }
            }
        }
    }
    best
}

/// Fraction of `delta` at which a circle of `radius` starting at `start`
/// first touches a circle of `other_radius` at `center`.
pub fn sweep_circle_circle(
    start: Vec2,
    delta: Vec2,
    radius: f64,
    center: Vec2,
    other_radius: f64,
) -> Option<f64> {
    let travel = delta.length();
    if travel == 0.0 {
        return None;
    }
    let dir = delta * (1.0 / travel);
    let reach = radius + other_radius;
    if start.distance(center) < reach {
        // Already overlapping: block only motion that goes deeper.
        return (dir.dot(center - start) > 0.0).then_some(0.0);
    }
    ray_circle(start, dir, center, reach)
        .filter(|d| *d <= travel)
        .map(|d| d / travel)
}
