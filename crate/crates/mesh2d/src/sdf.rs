//! Signed distance field representation of the geometry.
//!
//! A shape is a circle or rectangle primitive, a boolean combination, a
//! user-supplied distance function, or a closed clockwise polyline contour.
//! The field is negative inside, positive outside and zero on the boundary.
//! Contour queries are accelerated with a rectangular lattice that bins the
//! segments by the cells they touch; a query walks outward from its cell
//! layer by layer until segments are found, then widens the search enough to
//! guarantee the true global minimum.

use crate::error::{Error, Result};
use crate::geom::{for_ring, Point2, Rect};
use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

/// Boolean set operation on two distance fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoolOp {
    Union,
    Difference,
    Intersection,
}

/// Combine two signed distances. For `Difference` the result is `a \ b`.
/// The combined field is exact on the boundary but only a bound on the
/// distance elsewhere.
pub fn boolean_sdf(op: BoolOp, da: f64, db: f64) -> f64 {
    match op {
        BoolOp::Union => da.min(db),
        BoolOp::Difference => da.max(-db),
        BoolOp::Intersection => da.max(db),
    }
}

/// One input line segment with its side convention.
#[derive(Debug, Clone, Copy)]
pub struct Segment {
    pub p1: Point2,
    pub p2: Point2,
    /// Unit normal of the segment; `(p - q) . normal > 0` on the exterior
    /// side. For a clockwise contour this is the direction of `p1 -> p2`
    /// rotated counterclockwise by 90 degrees.
    pub normal: Point2,
}

impl Segment {
    pub fn new(p1: Point2, p2: Point2) -> Result<Segment> {
        let d = p2 - p1;
        let len = d.norm();
        if len <= 0.0 {
            return Err(Error::Validation(format!(
                "zero-length contour segment at ({}, {})",
                p1.x, p1.y
            )));
        }
        Ok(Segment {
            p1,
            p2,
            normal: (d / len).rot90(),
        })
    }

    pub fn length(&self) -> f64 {
        (self.p2 - self.p1).norm()
    }
}

/// Nearest point of the closed segment `s` to `p`: one of the endpoints or
/// the interior foot of the perpendicular. Returns the point, its distance
/// and the line parameter `t` in `[0, 1]`.
pub fn closest_on_segment(p: Point2, s: &Segment) -> (Point2, f64, f64) {
    let d = s.p2 - s.p1;
    let len_sq = d.norm_sq();
    let t = if len_sq > 0.0 {
        ((p - s.p1).dot(d) / len_sq).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let q = s.p1 + d * t;
    (q, p.dist(q), t)
}

/// Lattice binning of contour segments for nearest-segment queries.
#[derive(Debug, Clone)]
pub struct SegmentGrid {
    nx: usize,
    ny: usize,
    dx: f64,
    dy: f64,
    origin: Point2,
    bins: Vec<Vec<u32>>,
}

impl SegmentGrid {
    fn build(domain: Rect, segments: &[Segment]) -> SegmentGrid {
        let mean_len =
            segments.iter().map(Segment::length).sum::<f64>() / segments.len() as f64;
        let nx = (domain.width() / mean_len).ceil().max(1.0) as usize;
        let ny = (domain.height() / mean_len).ceil().max(1.0) as usize;
        let dx = domain.width() / nx as f64;
        let dy = domain.height() / ny as f64;
        let origin = Point2::new(domain.ax, domain.ay);
        let mut bins = vec![Vec::new(); nx * ny];
        for (i, s) in segments.iter().enumerate() {
            // conservative: bin by the segment's bounding box
            let x0 = s.p1.x.min(s.p2.x);
            let x1 = s.p1.x.max(s.p2.x);
            let y0 = s.p1.y.min(s.p2.y);
            let y1 = s.p1.y.max(s.p2.y);
            let ix0 = clamp_idx((x0 - origin.x) / dx, nx);
            let ix1 = clamp_idx((x1 - origin.x) / dx, nx);
            let iy0 = clamp_idx((y0 - origin.y) / dy, ny);
            let iy1 = clamp_idx((y1 - origin.y) / dy, ny);
            for iy in iy0..=iy1 {
                for ix in ix0..=ix1 {
                    bins[iy * nx + ix].push(i as u32);
                }
            }
        }
        SegmentGrid {
            nx,
            ny,
            dx,
            dy,
            origin,
            bins,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    fn cell_of(&self, p: Point2) -> (usize, usize) {
        (
            clamp_idx((p.x - self.origin.x) / self.dx, self.nx),
            clamp_idx((p.y - self.origin.y) / self.dy, self.ny),
        )
    }
}

fn clamp_idx(v: f64, n: usize) -> usize {
    if v < 0.0 {
        0
    } else {
        (v as usize).min(n - 1)
    }
}

/// Closed polyline contour with acceleration grid and vertex normals.
#[derive(Debug, Clone)]
pub struct Contour {
    segments: Vec<Segment>,
    /// Per-segment normals to use when the closest point is an endpoint
    /// (averaged with the adjacent segment where endpoints are shared).
    vertex_normal_p1: Vec<Point2>,
    vertex_normal_p2: Vec<Point2>,
    grid: SegmentGrid,
}

impl Contour {
    pub fn new(domain: Rect, segments: Vec<Segment>) -> Result<Contour> {
        if segments.is_empty() {
            return Err(Error::EmptyContour);
        }
        let grid = SegmentGrid::build(domain, &segments);
        let (vertex_normal_p1, vertex_normal_p2) = vertex_normals(&segments);
        Ok(Contour {
            segments,
            vertex_normal_p1,
            vertex_normal_p2,
            grid,
        })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn grid(&self) -> &SegmentGrid {
        &self.grid
    }

    /// Signed distance, closest boundary point and the normal used for the
    /// sign, by brute force over all segments. Ties between equidistant
    /// segments go to the lower index.
    pub fn query_brute(&self, p: Point2) -> (f64, Point2, Point2) {
        let mut best = (f64::INFINITY, Point2::default(), Point2::default());
        for (i, _) in self.segments.iter().enumerate() {
            self.consider(p, i as u32, &mut best);
        }
        self.signed(p, best)
    }

    /// Grid-accelerated version of [`Contour::query_brute`]; always returns
    /// the same global minimum.
    pub fn query(&self, p: Point2) -> (f64, Point2, Point2) {
        let g = &self.grid;
        let (cx, cy) = g.cell_of(p);
        let max_layer = g.nx.max(g.ny);
        let mut best = (f64::INFINITY, Point2::default(), Point2::default());
        let mut found_layer = None;
        for l in 0..=max_layer {
            let mut any = false;
            for_ring(cx, cy, l, g.nx, g.ny, |ix, iy| {
                for &s in &g.bins[iy * g.nx + ix] {
                    any = true;
                    self.consider(p, s, &mut best);
                }
            });
            if any {
                found_layer = Some(l);
                break;
            }
        }
        let l = match found_layer {
            Some(l) => l,
            None => return self.signed(p, best), // cannot happen: grid is nonempty
        };
        // Widen to a box that provably contains every segment at least as
        // close as the current minimum.
        let layer_r = ((l as f64) * g.dx).hypot((l as f64) * g.dy);
        let r = layer_r.max(best.0);
        let kx = (r / g.dx).ceil() as usize + 1;
        let ky = (r / g.dy).ceil() as usize + 1;
        let x0 = cx.saturating_sub(kx);
        let x1 = (cx + kx).min(g.nx - 1);
        let y0 = cy.saturating_sub(ky);
        let y1 = (cy + ky).min(g.ny - 1);
        let mut best = (f64::INFINITY, Point2::default(), Point2::default());
        for iy in y0..=y1 {
            for ix in x0..=x1 {
                for &s in &g.bins[iy * g.nx + ix] {
                    self.consider(p, s, &mut best);
                }
            }
        }
        self.signed(p, best)
    }

    fn consider(&self, p: Point2, seg_idx: u32, best: &mut (f64, Point2, Point2)) {
        let s = &self.segments[seg_idx as usize];
        let (q, dist, t) = closest_on_segment(p, s);
        if dist < best.0 {
            let n = if t <= 0.0 {
                self.vertex_normal_p1[seg_idx as usize]
            } else if t >= 1.0 {
                self.vertex_normal_p2[seg_idx as usize]
            } else {
                s.normal
            };
            *best = (dist, q, n);
        }
    }

    fn signed(&self, p: Point2, best: (f64, Point2, Point2)) -> (f64, Point2, Point2) {
        let (dist, q, n) = best;
        let sdf = if (p - q).dot(n) < 0.0 { -dist } else { dist };
        (sdf, q, n)
    }
}

/// Averaged normals at shared segment endpoints. Endpoints are matched
/// bit-exactly first; leftovers get a tolerance scan so loops written with
/// slightly different decimal text still close up.
fn vertex_normals(segments: &[Segment]) -> (Vec<Point2>, Vec<Point2>) {
    let mut map: HashMap<(u64, u64), Vec<(usize, bool)>> = HashMap::new();
    for (i, s) in segments.iter().enumerate() {
        map.entry(key(s.p1)).or_default().push((i, true));
        map.entry(key(s.p2)).or_default().push((i, false));
    }
    let mut at_p1 = vec![Point2::default(); segments.len()];
    let mut at_p2 = vec![Point2::default(); segments.len()];
    for group in map.values() {
        let mut n = Point2::default();
        for &(i, _) in group {
            n += segments[i].normal;
        }
        let n = n.normalized();
        for &(i, is_p1) in group {
            if is_p1 {
                at_p1[i] = n;
            } else {
                at_p2[i] = n;
            }
        }
    }
    (at_p1, at_p2)
}

fn key(p: Point2) -> (u64, u64) {
    (p.x.to_bits(), p.y.to_bits())
}

type SdfFn = Arc<dyn Fn(Point2) -> f64 + Send + Sync>;

/// Geometry representation: an evaluatable signed distance field over a
/// rectangular domain.
#[derive(Clone)]
pub struct Shape {
    domain: Rect,
    kind: ShapeKind,
}

#[derive(Clone)]
pub enum ShapeKind {
    Circle { center: Point2, radius: f64 },
    Rectangle(Rect),
    Contour(Arc<Contour>),
    Combined {
        op: BoolOp,
        left: Box<ShapeKind>,
        right: Box<ShapeKind>,
    },
    Function(SdfFn),
}

impl fmt::Debug for ShapeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShapeKind::Circle { center, radius } => f
                .debug_struct("Circle")
                .field("center", center)
                .field("radius", radius)
                .finish(),
            ShapeKind::Rectangle(r) => f.debug_tuple("Rectangle").field(r).finish(),
            ShapeKind::Contour(c) => f
                .debug_struct("Contour")
                .field("segments", &c.segments.len())
                .finish(),
            ShapeKind::Combined { op, .. } => f.debug_struct("Combined").field("op", op).finish(),
            ShapeKind::Function(_) => f.write_str("Function"),
        }
    }
}

impl fmt::Debug for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Shape")
            .field("domain", &self.domain)
            .field("kind", &self.kind)
            .finish()
    }
}

impl Shape {
    pub fn circle(domain: Rect, center: Point2, radius: f64) -> Result<Shape> {
        if radius <= 0.0 {
            return Err(Error::Validation(format!("circle radius {radius} <= 0")));
        }
        Ok(Shape {
            domain,
            kind: ShapeKind::Circle { center, radius },
        })
    }

    pub fn rectangle(domain: Rect, rect: Rect) -> Result<Shape> {
        if rect.width() <= 0.0 || rect.height() <= 0.0 {
            return Err(Error::Validation("rectangle with non-positive extent".into()));
        }
        Ok(Shape {
            domain,
            kind: ShapeKind::Rectangle(rect),
        })
    }

    pub fn contour(domain: Rect, segments: Vec<Segment>) -> Result<Shape> {
        Ok(Shape {
            domain,
            kind: ShapeKind::Contour(Arc::new(Contour::new(domain, segments)?)),
        })
    }

    /// Load a contour from a plain-text file, one `x1 y1 x2 y2` segment per
    /// line, clockwise orientation, loops closed by matching endpoints.
    /// Blank lines and `#` comments are skipped.
    pub fn contour_from_file(domain: Rect, path: &Path) -> Result<Shape> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut segments = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse {
                    line: lineno + 1,
                    msg: format!("bad number in contour file: {e}"),
                })?;
            if vals.len() != 4 {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: format!("expected 4 numbers per segment, got {}", vals.len()),
                });
            }
            segments.push(Segment::new(
                Point2::new(vals[0], vals[1]),
                Point2::new(vals[2], vals[3]),
            )?);
        }
        Shape::contour(domain, segments)
    }

    pub fn combine(op: BoolOp, left: Shape, right: Shape) -> Shape {
        Shape {
            domain: left.domain,
            kind: ShapeKind::Combined {
                op,
                left: Box::new(left.kind),
                right: Box::new(right.kind),
            },
        }
    }

    pub fn union(a: Shape, b: Shape) -> Shape {
        Shape::combine(BoolOp::Union, a, b)
    }

    pub fn difference(a: Shape, b: Shape) -> Shape {
        Shape::combine(BoolOp::Difference, a, b)
    }

    pub fn intersection(a: Shape, b: Shape) -> Shape {
        Shape::combine(BoolOp::Intersection, a, b)
    }

    pub fn from_fn<F>(domain: Rect, f: F) -> Shape
    where
        F: Fn(Point2) -> f64 + Send + Sync + 'static,
    {
        Shape {
            domain,
            kind: ShapeKind::Function(Arc::new(f)),
        }
    }

    pub fn domain(&self) -> Rect {
        self.domain
    }

    /// Signed distance at `p`: negative inside, positive outside.
    pub fn sdf(&self, p: Point2) -> f64 {
        eval_kind(&self.kind, p)
    }

    /// Central finite-difference gradient of the field with the given step.
    pub fn gradient(&self, p: Point2, step: f64) -> Point2 {
        let fx = self.sdf(Point2::new(p.x + step, p.y)) - self.sdf(Point2::new(p.x - step, p.y));
        let fy = self.sdf(Point2::new(p.x, p.y + step)) - self.sdf(Point2::new(p.x, p.y - step));
        Point2::new(fx, fy) / (2.0 * step)
    }

    /// The contour segments when the shape is a plain contour.
    pub fn as_contour(&self) -> Option<&Contour> {
        match &self.kind {
            ShapeKind::Contour(c) => Some(c),
            _ => None,
        }
    }

    /// All contour segments reachable in the shape tree (for rendering).
    pub fn collect_segments(&self) -> Vec<Segment> {
        fn walk(kind: &ShapeKind, out: &mut Vec<Segment>) {
            match kind {
                ShapeKind::Contour(c) => out.extend_from_slice(&c.segments),
                ShapeKind::Combined { left, right, .. } => {
                    walk(left, out);
                    walk(right, out);
                }
                _ => {}
            }
        }
        let mut out = Vec::new();
        walk(&self.kind, &mut out);
        out
    }
}

fn eval_kind(kind: &ShapeKind, p: Point2) -> f64 {
    match kind {
        ShapeKind::Circle { center, radius } => p.dist(*center) - radius,
        ShapeKind::Rectangle(r) => {
            let c = r.center();
            let hx = 0.5 * r.width();
            let hy = 0.5 * r.height();
            let qx = (p.x - c.x).abs() - hx;
            let qy = (p.y - c.y).abs() - hy;
            let outside = Point2::new(qx.max(0.0), qy.max(0.0)).norm();
            let inside = qx.max(qy).min(0.0);
            outside + inside
        }
        ShapeKind::Contour(c) => c.query(p).0,
        ShapeKind::Combined { op, left, right } => {
            boolean_sdf(*op, eval_kind(left, p), eval_kind(right, p))
        }
        ShapeKind::Function(f) => f(p),
    }
}

/// Clockwise regular n-gon approximating a circle; handy for contour input.
pub fn circle_polygon(center: Point2, radius: f64, n: usize) -> Vec<Segment> {
    let vert = |k: usize| {
        // negative angle step = clockwise winding
        let a = -(k as f64) * std::f64::consts::TAU / n as f64;
        Point2::new(center.x + radius * a.cos(), center.y + radius * a.sin())
    };
    (0..n)
        .map(|k| Segment::new(vert(k), vert((k + 1) % n)).unwrap())
        .collect()
}

/// Clockwise rectangle outline as four segments.
pub fn rect_polygon(r: Rect) -> Vec<Segment> {
    let a = Point2::new(r.ax, r.ay);
    let b = Point2::new(r.ax, r.by);
    let c = Point2::new(r.bx, r.by);
    let d = Point2::new(r.bx, r.ay);
    vec![
        Segment::new(a, b).unwrap(),
        Segment::new(b, c).unwrap(),
        Segment::new(c, d).unwrap(),
        Segment::new(d, a).unwrap(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn unit_square_contour() -> Shape {
        Shape::contour(Rect::new(-1.0, 2.0, -1.0, 2.0), rect_polygon(Rect::UNIT)).unwrap()
    }

    #[test]
    fn circle_primitive_values() {
        let s = Shape::circle(Rect::UNIT, Point2::new(0.5, 0.5), 0.1).unwrap();
        assert!((s.sdf(Point2::new(0.5, 0.5)) + 0.1).abs() < 1e-15);
        assert!(s.sdf(Point2::new(0.6, 0.5)).abs() < 1e-15);
        assert!((s.sdf(Point2::new(0.9, 0.5)) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn rectangle_primitive_is_exact_distance() {
        let s = Shape::rectangle(Rect::new(-1.0, 2.0, -1.0, 2.0), Rect::UNIT).unwrap();
        // inside: distance to nearest side
        assert!((s.sdf(Point2::new(0.5, 0.5)) + 0.5).abs() < 1e-15);
        assert!((s.sdf(Point2::new(0.1, 0.5)) + 0.1).abs() < 1e-15);
        // outside near an edge
        assert!((s.sdf(Point2::new(0.5, -0.25)) - 0.25).abs() < 1e-15);
        // outside near a corner: true euclidean distance
        let d = s.sdf(Point2::new(1.3, 1.4));
        assert!((d - (0.3f64.hypot(0.4))).abs() < 1e-15);
    }

    #[test]
    fn boolean_algebra() {
        for d in [-0.7, 0.0, 0.3] {
            assert_eq!(boolean_sdf(BoolOp::Union, d, d), d);
        }
        assert!((boolean_sdf(BoolOp::Difference, -0.05, -0.02) - 0.02).abs() < 1e-15);
        assert!((boolean_sdf(BoolOp::Intersection, -0.2, 0.1) - 0.1).abs() < 1e-15);
        // commutativity and the difference/intersection identity
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let a = rng.gen_range(-1.0..1.0);
            let b = rng.gen_range(-1.0..1.0);
            assert_eq!(
                boolean_sdf(BoolOp::Union, a, b),
                boolean_sdf(BoolOp::Union, b, a)
            );
            assert_eq!(
                boolean_sdf(BoolOp::Intersection, a, b),
                boolean_sdf(BoolOp::Intersection, b, a)
            );
            assert_eq!(
                boolean_sdf(BoolOp::Difference, a, b),
                boolean_sdf(BoolOp::Intersection, a, -b)
            );
        }
    }

    #[test]
    fn closest_point_three_cases() {
        let s = Segment::new(Point2::new(0.0, 0.0), Point2::new(1.0, 0.0)).unwrap();
        let (q, d, _) = closest_on_segment(Point2::new(0.0, 1.0), &s);
        assert_eq!((q.x, q.y, d), (0.0, 0.0, 1.0));
        let (q, d, _) = closest_on_segment(Point2::new(0.5, 0.5), &s);
        assert_eq!((q.x, q.y, d), (0.5, 0.0, 0.5));
        let (q, d, _) = closest_on_segment(Point2::new(2.0, 0.0), &s);
        assert_eq!((q.x, q.y, d), (1.0, 0.0, 1.0));
    }

    #[test]
    fn square_contour_signs() {
        let s = unit_square_contour();
        assert!((s.sdf(Point2::new(0.5, 0.5)) + 0.5).abs() < 1e-12);
        let c = s.as_contour().unwrap();
        let (sdf, q, _) = c.query(Point2::new(0.5, -0.25));
        assert!((sdf - 0.25).abs() < 1e-12);
        assert!((q.x - 0.5).abs() < 1e-12 && q.y.abs() < 1e-12);
    }

    #[test]
    fn contour_query_matches_brute_force() {
        let contour = circle_polygon(Point2::new(0.5, 0.5), 0.3, 64);
        let shape = Shape::contour(Rect::UNIT, contour).unwrap();
        let c = shape.as_contour().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..200 {
            let p = Point2::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
            let (fast, qf, _) = c.query(p);
            let (brute, qb, _) = c.query_brute(p);
            assert!(
                (fast - brute).abs() < 1e-12,
                "sdf mismatch at ({}, {}): {fast} vs {brute}",
                p.x,
                p.y
            );
            assert!(qf.dist(qb) < 1e-12);
        }
    }

    // Random star-shaped clockwise polygons: accelerated query must equal
    // brute force everywhere.
    #[test]
    fn contour_query_matches_brute_force_random_polygons() {
        let mut rng = ChaCha8Rng::seed_from_u64(9001);
        for case in 0..20 {
            let n = rng.gen_range(3..=500);
            let verts: Vec<Point2> = (0..n)
                .map(|k| {
                    let a = -(k as f64) * std::f64::consts::TAU / n as f64;
                    let r = rng.gen_range(0.1..0.45);
                    Point2::new(0.5 + r * a.cos(), 0.5 + r * a.sin())
                })
                .collect();
            let segs: Vec<Segment> = (0..n)
                .map(|k| Segment::new(verts[k], verts[(k + 1) % n]).unwrap())
                .collect();
            let shape = Shape::contour(Rect::UNIT, segs).unwrap();
            let c = shape.as_contour().unwrap();
            for _ in 0..50 {
                let p = Point2::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
                let (fast, _, _) = c.query(p);
                let (brute, _, _) = c.query_brute(p);
                assert!(
                    (fast - brute).abs() < 1e-12,
                    "case {case}: mismatch at ({}, {})",
                    p.x,
                    p.y
                );
            }
        }
    }

    #[test]
    fn gradient_is_radial_for_circle() {
        let s = Shape::circle(Rect::UNIT, Point2::new(0.5, 0.5), 0.1).unwrap();
        let g = s.gradient(Point2::new(0.9, 0.5), 1e-6);
        assert!((g.x - 1.0).abs() < 1e-6);
        assert!(g.y.abs() < 1e-6);
    }

    #[test]
    fn gradient_of_linear_field() {
        let s = Shape::from_fn(Rect::UNIT, |p| p.x);
        let g = s.gradient(Point2::new(0.3, 0.7), 1e-6);
        assert!((g.x - 1.0).abs() < 1e-9);
        assert!(g.y.abs() < 1e-9);
    }

    #[test]
    fn gradient_above_square_contour_points_up() {
        let s = unit_square_contour();
        let g = s.gradient(Point2::new(0.5, 1.4), 1e-6);
        assert!(g.x.abs() < 1e-6);
        assert!((g.y - 1.0).abs() < 1e-6);
    }

    #[test]
    fn gradient_magnitude_is_one_at_generic_points() {
        let s = Shape::circle(Rect::UNIT, Point2::new(0.5, 0.5), 0.25).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let p = Point2::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
            if p.dist(Point2::new(0.5, 0.5)) < 1e-3 {
                continue; // gradient undefined at the center
            }
            let g = s.gradient(p, 1e-6);
            assert!((g.norm() - 1.0).abs() < 1e-3);
        }
    }

    // |sdf| must match the distance to a dense boundary sampling.
    #[test]
    fn sdf_magnitude_matches_boundary_sampling() {
        let shapes = [
            Shape::circle(Rect::UNIT, Point2::new(0.5, 0.5), 0.3).unwrap(),
            Shape::rectangle(Rect::UNIT, Rect::new(0.2, 0.8, 0.3, 0.7)).unwrap(),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for shape in &shapes {
            // sample the zero level set densely by sphere-marching on rays
            let mut boundary = Vec::new();
            for k in 0..2000 {
                let a = k as f64 / 2000.0 * std::f64::consts::TAU;
                let dir = Point2::new(a.cos(), a.sin());
                let mut t = 0.0;
                let c = Point2::new(0.5, 0.5);
                for _ in 0..60 {
                    let p = c + dir * t;
                    let d = shape.sdf(p);
                    if d.abs() < 1e-12 {
                        break;
                    }
                    t += d.abs();
                    if t > 1.0 {
                        break;
                    }
                }
                let p = c + dir * t;
                if shape.sdf(p).abs() < 1e-9 {
                    boundary.push(p);
                }
            }
            assert!(boundary.len() > 1000);
            for _ in 0..5000 {
                let p = Point2::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
                let d = shape.sdf(p).abs();
                let nearest = boundary
                    .iter()
                    .map(|b| b.dist(p))
                    .fold(f64::INFINITY, f64::min);
                // discretization tolerance of the sampling
                assert!((d - nearest).abs() < 2e-3, "{d} vs {nearest}");
            }
        }
    }
}
