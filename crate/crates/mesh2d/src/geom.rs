//! Minimal 2D vector / rectangle primitives.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

/// A point (or vector) in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// Scalar 2D cross product `self.x * o.y - self.y * o.x`.
    pub fn cross(self, o: Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn dist(self, o: Point2) -> f64 {
        (self - o).norm()
    }

    pub fn dist_sq(self, o: Point2) -> f64 {
        (self - o).norm_sq()
    }

    /// Unit vector in the same direction; zero vector is returned unchanged.
    pub fn normalized(self) -> Point2 {
        let n = self.norm();
        if n > 0.0 {
            self / n
        } else {
            self
        }
    }

    /// Counterclockwise rotation by 90 degrees.
    pub fn rot90(self) -> Point2 {
        Point2::new(-self.y, self.x)
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Point2 {
    fn add_assign(&mut self, o: Point2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

impl Div<f64> for Point2 {
    type Output = Point2;
    fn div(self, s: f64) -> Point2 {
        Point2::new(self.x / s, self.y / s)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

/// Axis-aligned rectangle `[ax, bx] x [ay, by]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub ax: f64,
    pub bx: f64,
    pub ay: f64,
    pub by: f64,
}

impl Rect {
    pub const fn new(ax: f64, bx: f64, ay: f64, by: f64) -> Self {
        Rect { ax, bx, ay, by }
    }

    pub const UNIT: Rect = Rect::new(0.0, 1.0, 0.0, 1.0);

    pub fn width(&self) -> f64 {
        self.bx - self.ax
    }

    pub fn height(&self) -> f64 {
        self.by - self.ay
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.ax && p.x <= self.bx && p.y >= self.ay && p.y <= self.by
    }

    pub fn center(&self) -> Point2 {
        Point2::new(0.5 * (self.ax + self.bx), 0.5 * (self.ay + self.by))
    }

    /// Grow the rectangle by `m` on every side.
    pub fn expand(&self, m: f64) -> Rect {
        Rect::new(self.ax - m, self.bx + m, self.ay - m, self.by + m)
    }
}

/// Area-weighted centroid and signed area of a simple polygon.
/// Positive area means counterclockwise orientation.
pub fn polygon_signed_area(verts: &[Point2]) -> f64 {
    let n = verts.len();
    let mut acc = 0.0;
    for i in 0..n {
        let a = verts[i];
        let b = verts[(i + 1) % n];
        acc += a.cross(b);
    }
    0.5 * acc
}

/// Circumcenter of a triangle, or `None` when the vertices are collinear.
pub fn circumcenter(a: Point2, b: Point2, c: Point2) -> Option<Point2> {
    let d = 2.0 * ((b - a).cross(c - a));
    if d == 0.0 {
        return None;
    }
    let ba = b - a;
    let ca = c - a;
    let ba2 = ba.norm_sq();
    let ca2 = ca.norm_sq();
    let ux = (ca.y * ba2 - ba.y * ca2) / d;
    let uy = (ba.x * ca2 - ca.x * ba2) / d;
    Some(Point2::new(a.x + ux, a.y + uy))
}

/// Visit the cells of the Chebyshev ring at distance `l` around `(cx, cy)`,
/// clipped to an `nx` by `ny` lattice.
pub fn for_ring(
    cx: usize,
    cy: usize,
    l: usize,
    nx: usize,
    ny: usize,
    mut f: impl FnMut(usize, usize),
) {
    let (cx, cy, l) = (cx as isize, cy as isize, l as isize);
    let in_grid = |x: isize, y: isize| x >= 0 && y >= 0 && x < nx as isize && y < ny as isize;
    if l == 0 {
        if in_grid(cx, cy) {
            f(cx as usize, cy as usize);
        }
        return;
    }
    for x in (cx - l)..=(cx + l) {
        for &y in &[cy - l, cy + l] {
            if in_grid(x, y) {
                f(x as usize, y as usize);
            }
        }
    }
    for y in (cy - l + 1)..(cy + l) {
        for &x in &[cx - l, cx + l] {
            if in_grid(x, y) {
                f(x as usize, y as usize);
            }
        }
    }
}

/// True when segments `a1-a2` and `b1-b2` properly cross (shared endpoints
/// and collinear overlaps do not count).
pub fn segments_cross(a1: Point2, a2: Point2, b1: Point2, b2: Point2) -> bool {
    let d1 = (a2 - a1).cross(b1 - a1);
    let d2 = (a2 - a1).cross(b2 - a1);
    let d3 = (b2 - b1).cross(a1 - b1);
    let d4 = (b2 - b1).cross(a2 - b1);
    (d1 > 0.0) != (d2 > 0.0) && (d3 > 0.0) != (d4 > 0.0)
}
