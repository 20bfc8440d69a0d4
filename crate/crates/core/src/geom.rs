//! Small planar geometry helpers.

pub type Point = [f64; 2];

#[inline]
pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn add(a: Point, b: Point) -> Point {
    [a[0] + b[0], a[1] + b[1]]
}

#[inline]
pub fn scale(a: Point, s: f64) -> Point {
    [a[0] * s, a[1] * s]
}

#[inline]
pub fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

#[inline]
pub fn midpoint(a: Point, b: Point) -> Point {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

/// Twice the signed area of the triangle (a, b, c); positive when CCW.
#[inline]
pub fn orient(a: Point, b: Point, c: Point) -> f64 {
    cross(sub(b, a), sub(c, a))
}

/// Barycentric coordinates of `p` with respect to triangle (a, b, c).
pub fn barycentric(a: Point, b: Point, c: Point, p: Point) -> [f64; 3] {
    let det = orient(a, b, c);
    let l1 = orient(a, p, c) / det;
    let l2 = orient(a, b, p) / det;
    [1.0 - l1 - l2, l1, l2]
}

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x0, x1, y0, y1 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, p: Point, tol: f64) -> bool {
        p[0] >= self.x0 - tol && p[0] <= self.x1 + tol && p[1] >= self.y0 - tol && p[1] <= self.y1 + tol
    }

    pub fn corners(&self) -> [Point; 4] {
        [
            [self.x0, self.y0],
            [self.x1, self.y0],
            [self.x1, self.y1],
            [self.x0, self.y1],
        ]
    }
}

/// Oriented straight segment from `a` to `b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub a: Point,
    pub b: Point,
}

impl Segment {
    pub fn new(a: Point, b: Point) -> Self {
        Self { a, b }
    }

    pub fn length(&self) -> f64 {
        norm(sub(self.b, self.a))
    }

    pub fn direction(&self) -> Point {
        let d = sub(self.b, self.a);
        scale(d, 1.0 / norm(d))
    }

    /// Point at arc length `t` from `a`.
    pub fn at(&self, t: f64) -> Point {
        add(self.a, scale(self.direction(), t))
    }

    /// Arc-length coordinate of the orthogonal projection of `p`.
    pub fn param(&self, p: Point) -> f64 {
        dot(sub(p, self.a), self.direction())
    }

    /// Unsigned distance from `p` to the segment.
    pub fn distance(&self, p: Point) -> f64 {
        let len = self.length();
        let t = self.param(p).clamp(0.0, len);
        norm(sub(p, self.at(t)))
    }

    /// Parameter interval (arc length) of the part of the segment inside the
    /// closed triangle, if it has positive length.
    pub fn clip_to_triangle(&self, tri: [Point; 3], eps: f64) -> Option<(f64, f64)> {
        let len = self.length();
        let d = self.direction();
        let (mut t0, mut t1) = (0.0_f64, len);
        let area2 = orient(tri[0], tri[1], tri[2]);
        let sign = area2.signum();
        for k in 0..3 {
            let p = tri[k];
            let q = tri[(k + 1) % 3];
            let e = sub(q, p);
            // inside means sign * cross(e, x - p) >= 0
            let num = sign * cross(e, sub(self.a, p));
            let den = sign * cross(e, d);
            let tol = eps * norm(e);
            if den.abs() < 1e-300 {
                if num < -tol {
                    return None;
                }
                continue;
            }
            let t = -(num + tol) / den;
            if den > 0.0 {
                t0 = t0.max(t);
            } else {
                t1 = t1.min(t);
            }
        }
        if t1 - t0 > eps {
            Some((t0.max(0.0), t1.min(len)))
        } else {
            None
        }
    }
}

/// A line through `origin` with unit direction `dir`; "left" is the side the
/// normal `(-dir.y, dir.x)` points to.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Line {
    pub origin: Point,
    pub dir: Point,
}

impl Line {
    /// Signed distance, negative on the left side.
    pub fn signed_distance(&self, p: Point) -> f64 {
        cross(sub(p, self.origin), self.dir)
    }
}

/// Clip a convex polygon against the half-plane `{ p : g(p) <= 0 }` where `g`
/// is affine (Sutherland-Hodgman step).
pub fn clip_halfplane(poly: &[Point], g: impl Fn(Point) -> f64) -> Vec<Point> {
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 2);
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        let gp = g(p);
        let gq = g(q);
        if gp <= 0.0 {
            out.push(p);
        }
        if (gp < 0.0 && gq > 0.0) || (gp > 0.0 && gq < 0.0) {
            let t = gp / (gp - gq);
            out.push(add(p, scale(sub(q, p), t)));
        }
    }
    out
}

/// Signed area of a simple polygon.
pub fn polygon_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    let mut a = 0.0;
    for i in 0..n {
        a += cross(poly[i], poly[(i + 1) % n]);
    }
    0.5 * a
}
