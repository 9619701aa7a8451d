//! Bounded Voronoi diagram by cell-based half-plane clipping, its dual
//! Delaunay triangulation, and the validity tests that keep triangles
//! conforming to the geometry.
//!
//! Each cell starts as a regular octagon of adaptive span intersected with
//! the clip box and is cut by the perpendicular bisector of every candidate
//! neighbor found by an outward search over point bins. The search stops once
//! the remaining bins are provably farther than twice the current cell
//! radius, so no cutting neighbor can be missed. Cells are independent of
//! each other, which makes the diagram embarrassingly parallel and bitwise
//! deterministic for any thread count.

use crate::config::Config;
use crate::geom::{circumcenter, for_ring, polygon_signed_area, segments_cross, Point2, Rect};
use crate::grid::{CellKind, GeometryGrid};
use crate::parallel::par_map;
use crate::sdf::Shape;
use std::collections::{HashMap, HashSet};

/// What produced a Voronoi cell edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeSource {
    /// Octagon side or clip-box side.
    Wall,
    /// Bisector with the given generator.
    Neighbor(u32),
}

/// One bounded Voronoi cell: a convex polygon around its generator with the
/// source of every edge recorded.
#[derive(Debug, Clone)]
pub struct VoronoiCell {
    pub generator: u32,
    /// Polygon vertices in counterclockwise order.
    pub verts: Vec<Point2>,
    /// `edges[k]` produced the edge from `verts[k]` to `verts[k+1]`.
    pub edges: Vec<EdgeSource>,
    pub area: f64,
}

impl VoronoiCell {
    /// Local characteristic length scale, `sqrt(area)`.
    pub fn l_v(&self) -> f64 {
        self.area.sqrt()
    }

    /// Sorted, deduplicated neighbor generator ids.
    pub fn neighbor_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self
            .edges
            .iter()
            .filter_map(|e| match e {
                EdgeSource::Neighbor(j) => Some(*j),
                EdgeSource::Wall => None,
            })
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

/// Lattice bins over the point set, sized so that about `n_opt` points share
/// a bin.
#[derive(Debug)]
pub struct PointBins {
    nx: usize,
    ny: usize,
    dx: f64,
    dy: f64,
    origin: Point2,
    bins: Vec<Vec<u32>>,
}

impl PointBins {
    pub fn build(points: &[Point2], n_opt: f64) -> PointBins {
        let n = points.len().max(1);
        let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        if points.is_empty() {
            lo = Point2::new(0.0, 0.0);
            hi = Point2::new(1.0, 1.0);
        }
        // floor degenerate extents (collinear point sets) so the lattice
        // never blows up in one direction
        let scale = (hi.x - lo.x).max(hi.y - lo.y).max(1e-12);
        let w = (hi.x - lo.x).max(1e-3 * scale);
        let h = (hi.y - lo.y).max(1e-3 * scale);
        let lambda = ((n as f64) / (n_opt * w * h)).sqrt();
        let nx = ((lambda * w).ceil() as usize).clamp(1, n);
        let ny = ((lambda * h).ceil() as usize).clamp(1, n);
        let mut bins = vec![Vec::new(); nx * ny];
        let dx = w / nx as f64;
        let dy = h / ny as f64;
        for (i, p) in points.iter().enumerate() {
            let ix = (((p.x - lo.x) / dx) as usize).min(nx - 1);
            let iy = (((p.y - lo.y) / dy) as usize).min(ny - 1);
            bins[iy * nx + ix].push(i as u32);
        }
        PointBins {
            nx,
            ny,
            dx,
            dy,
            origin: lo,
            bins,
        }
    }

    fn cell_of(&self, p: Point2) -> (usize, usize) {
        let ix = ((p.x - self.origin.x) / self.dx).floor();
        let iy = ((p.y - self.origin.y) / self.dy).floor();
        (
            (ix.max(0.0) as usize).min(self.nx - 1),
            (iy.max(0.0) as usize).min(self.ny - 1),
        )
    }
}

/// Octagon span per generator.
#[derive(Debug, Clone, Copy)]
pub enum Spans<'a> {
    Uniform(f64),
    PerPoint(&'a [f64]),
}

impl Spans<'_> {
    fn get(&self, i: usize) -> f64 {
        match self {
            Spans::Uniform(s) => *s,
            Spans::PerPoint(v) => v[i],
        }
    }
}

/// Clip the polygon by the half-plane `(x - mid) . n <= 0`, tagging any new
/// edge with `label`. Vertices exactly on the line count as kept.
fn clip_halfplane(
    verts: &mut Vec<Point2>,
    edges: &mut Vec<EdgeSource>,
    mid: Point2,
    n: Point2,
    label: EdgeSource,
) {
    let m = verts.len();
    if m == 0 {
        return;
    }
    let d: Vec<f64> = verts.iter().map(|&v| (v - mid).dot(n)).collect();
    if d.iter().all(|&v| v <= 0.0) {
        return;
    }
    let mut new_verts = Vec::with_capacity(m + 2);
    let mut new_edges = Vec::with_capacity(m + 2);
    for k in 0..m {
        let a = k;
        let b = (k + 1) % m;
        if d[a] <= 0.0 {
            new_verts.push(verts[a]);
            if d[b] > 0.0 {
                // leaving the half-plane: cut edge, then run along the line
                let t = d[a] / (d[a] - d[b]);
                new_edges.push(edges[k]);
                new_verts.push(verts[a] + (verts[b] - verts[a]) * t);
                new_edges.push(label);
            } else {
                new_edges.push(edges[k]);
            }
        } else if d[b] <= 0.0 {
            // entering: the remainder of this edge keeps its source
            let t = d[a] / (d[a] - d[b]);
            new_verts.push(verts[a] + (verts[b] - verts[a]) * t);
            new_edges.push(edges[k]);
        }
    }
    *verts = new_verts;
    *edges = new_edges;
}

/// Compute the bounded Voronoi cell of point `i`: a regular octagon of the
/// given span intersected with `bounds`, cut by the bisector of every
/// neighbor that can possibly intersect it.
pub fn compute_bounded_cell(
    i: usize,
    points: &[Point2],
    bins: &PointBins,
    span: f64,
    bounds: Rect,
) -> VoronoiCell {
    let p = points[i];
    let mut verts: Vec<Point2> = (0..8)
        .map(|k| {
            let a = (22.5 + 45.0 * k as f64).to_radians();
            Point2::new(p.x + span * a.cos(), p.y + span * a.sin())
        })
        .collect();
    let mut edges = vec![EdgeSource::Wall; 8];
    // intersect with the clip box
    let walls = [
        (Point2::new(bounds.bx, 0.0), Point2::new(1.0, 0.0)),
        (Point2::new(bounds.ax, 0.0), Point2::new(-1.0, 0.0)),
        (Point2::new(0.0, bounds.by), Point2::new(0.0, 1.0)),
        (Point2::new(0.0, bounds.ay), Point2::new(0.0, -1.0)),
    ];
    for (mid, n) in walls {
        clip_halfplane(&mut verts, &mut edges, mid, n, EdgeSource::Wall);
    }

    let (cx, cy) = bins.cell_of(p);
    let bin_step = bins.dx.min(bins.dy);
    let max_ring = bins.nx.max(bins.ny);
    let mut r_max_sq = verts
        .iter()
        .map(|&v| v.dist_sq(p))
        .fold(0.0f64, f64::max);
    for ring in 0..=max_ring {
        if ring >= 2 {
            let lb = (ring as f64 - 1.0) * bin_step;
            if lb * lb > 4.0 * r_max_sq {
                break;
            }
        }
        let mut cut = false;
        for_ring(cx, cy, ring, bins.nx, bins.ny, |ix, iy| {
            for &j in &bins.bins[iy * bins.nx + ix] {
                if j as usize == i {
                    continue;
                }
                let q = points[j as usize];
                let diff = q - p;
                let dist_sq = diff.norm_sq();
                if dist_sq == 0.0 || dist_sq > 4.0 * r_max_sq {
                    continue;
                }
                let mid = p + diff * 0.5;
                let before = verts.len();
                clip_halfplane(&mut verts, &mut edges, mid, diff, EdgeSource::Neighbor(j));
                if verts.len() != before {
                    cut = true;
                }
            }
        });
        if cut {
            r_max_sq = verts
                .iter()
                .map(|&v| v.dist_sq(p))
                .fold(0.0f64, f64::max);
        }
    }

    let area = polygon_signed_area(&verts);
    VoronoiCell {
        generator: i as u32,
        verts,
        edges,
        area,
    }
}

/// All-pairs reference version of [`compute_bounded_cell`]: no bins, no
/// search cutoff. Used as the oracle in tests.
pub fn compute_cell_brute(
    i: usize,
    points: &[Point2],
    span: f64,
    bounds: Rect,
) -> VoronoiCell {
    let p = points[i];
    let mut verts: Vec<Point2> = (0..8)
        .map(|k| {
            let a = (22.5 + 45.0 * k as f64).to_radians();
            Point2::new(p.x + span * a.cos(), p.y + span * a.sin())
        })
        .collect();
    let mut edges = vec![EdgeSource::Wall; 8];
    let walls = [
        (Point2::new(bounds.bx, 0.0), Point2::new(1.0, 0.0)),
        (Point2::new(bounds.ax, 0.0), Point2::new(-1.0, 0.0)),
        (Point2::new(0.0, bounds.by), Point2::new(0.0, 1.0)),
        (Point2::new(0.0, bounds.ay), Point2::new(0.0, -1.0)),
    ];
    for (mid, n) in walls {
        clip_halfplane(&mut verts, &mut edges, mid, n, EdgeSource::Wall);
    }
    for (j, &q) in points.iter().enumerate() {
        if j == i || q == p {
            continue;
        }
        let diff = q - p;
        let mid = p + diff * 0.5;
        clip_halfplane(&mut verts, &mut edges, mid, diff, EdgeSource::Neighbor(j as u32));
    }
    let area = polygon_signed_area(&verts);
    VoronoiCell {
        generator: i as u32,
        verts,
        edges,
        area,
    }
}

/// Compute every cell of the diagram. The result is a pure per-cell function
/// of the inputs, so it is identical for any thread count.
pub fn compute_diagram(
    points: &[Point2],
    bounds: Rect,
    spans: Spans<'_>,
    n_opt: f64,
) -> Vec<VoronoiCell> {
    let bins = PointBins::build(points, n_opt);
    par_map(points.len(), |i| {
        compute_bounded_cell(i, points, &bins, spans.get(i), bounds)
    })
}

/// Dual Delaunay extraction: a triangle is emitted for every Voronoi vertex
/// where two neighbor-labelled edges meet, provided all three generator
/// pairs have mutual neighbor records. Exactly-cocircular four-point patches
/// produce both diagonals; the conflict is resolved toward the
/// lexicographically smallest diagonal.
pub fn extract_delaunay(cells: &[VoronoiCell], points: &[Point2]) -> Vec<[u32; 3]> {
    let neighbor_sets: Vec<Vec<u32>> = cells.iter().map(|c| c.neighbor_ids()).collect();
    let mutual = |a: u32, b: u32| -> bool {
        neighbor_sets[a as usize].binary_search(&b).is_ok()
            && neighbor_sets[b as usize].binary_search(&a).is_ok()
    };

    let mut set: HashSet<[u32; 3]> = HashSet::new();
    let per_cell: Vec<Vec<[u32; 3]>> = par_map(cells.len(), |ci| {
        let cell = &cells[ci];
        let i = cell.generator;
        let m = cell.verts.len();
        let mut out = Vec::new();
        for k in 0..m {
            let prev = cell.edges[(k + m - 1) % m];
            let here = cell.edges[k];
            if let (EdgeSource::Neighbor(a), EdgeSource::Neighbor(b)) = (prev, here) {
                if a == b || a == i || b == i {
                    continue;
                }
                if mutual(i, a) && mutual(i, b) && mutual(a, b) {
                    let mut t = [i, a, b];
                    t.sort_unstable();
                    out.push(t);
                }
            }
        }
        out
    });
    for tris in per_cell {
        for t in tris {
            set.insert(t);
        }
    }

    // Resolve exactly-cocircular quads: when all four triples of a quad were
    // emitted, keep the two triangles that use the lexicographically
    // smallest crossing diagonal.
    let mut tris: Vec<[u32; 3]> = set.iter().copied().collect();
    tris.sort_unstable();
    let mut by_pair: HashMap<(u32, u32), Vec<usize>> = HashMap::new();
    for (ti, t) in tris.iter().enumerate() {
        for (a, b) in [(t[0], t[1]), (t[0], t[2]), (t[1], t[2])] {
            by_pair.entry((a, b)).or_default().push(ti);
        }
    }
    let mut removed: HashSet<usize> = HashSet::new();
    let mut seen_quads: HashSet<[u32; 4]> = HashSet::new();
    for list in by_pair.values() {
        if list.len() < 2 {
            continue;
        }
        for x in 0..list.len() {
            for y in (x + 1)..list.len() {
                let t1 = tris[list[x]];
                let t2 = tris[list[y]];
                let mut quad: Vec<u32> = t1.iter().chain(t2.iter()).copied().collect();
                quad.sort_unstable();
                quad.dedup();
                if quad.len() != 4 {
                    continue;
                }
                let q = [quad[0], quad[1], quad[2], quad[3]];
                if !seen_quads.insert(q) {
                    continue;
                }
                let triples = [
                    [q[0], q[1], q[2]],
                    [q[0], q[1], q[3]],
                    [q[0], q[2], q[3]],
                    [q[1], q[2], q[3]],
                ];
                if !triples.iter().all(|t| set.contains(t)) {
                    continue;
                }
                // find the pairing whose segments properly cross
                let pairings = [
                    ((q[0], q[1]), (q[2], q[3])),
                    ((q[0], q[2]), (q[1], q[3])),
                    ((q[0], q[3]), (q[1], q[2])),
                ];
                let crossing = pairings.iter().find(|(d1, d2)| {
                    segments_cross(
                        points[d1.0 as usize],
                        points[d1.1 as usize],
                        points[d2.0 as usize],
                        points[d2.1 as usize],
                    )
                });
                let Some((d1, d2)) = crossing else { continue };
                let keep = if d1 <= d2 { *d1 } else { *d2 };
                // drop the quad's two triangles built on the other diagonal
                for (ti, t) in tris.iter().enumerate() {
                    if t.iter().all(|v| q.contains(v))
                        && !(t.contains(&keep.0) && t.contains(&keep.1))
                    {
                        removed.insert(ti);
                    }
                }
            }
        }
    }

    let mut out: Vec<[u32; 3]> = Vec::with_capacity(tris.len());
    for (ti, t) in tris.iter().enumerate() {
        if removed.contains(&ti) {
            continue;
        }
        let cross = (points[t[1] as usize] - points[t[0] as usize])
            .cross(points[t[2] as usize] - points[t[0] as usize]);
        // exactly degenerate triples (coincident or collinear generators)
        // are not triangles
        if cross.abs() <= 2e-300 {
            continue;
        }
        let mut t = *t;
        if cross < 0.0 {
            t.swap(1, 2); // counterclockwise
        }
        out.push(t);
    }
    out
}

/// Validity of one triangle against the geometry: centroid test, edge
/// midpoint test, circumcenter ratio test, in that order.
pub fn triangle_valid(
    tri: [u32; 3],
    points: &[Point2],
    grid: &GeometryGrid,
    shape: &Shape,
    cfg: &Config,
) -> bool {
    let a = points[tri[0] as usize];
    let b = points[tri[1] as usize];
    let c = points[tri[2] as usize];

    // Test 1: centroid
    let centroid = (a + b + c) / 3.0;
    let idx = grid.cell_of(centroid);
    match grid.kind(idx) {
        CellKind::Inner => return true,
        CellKind::Outer => return false,
        CellKind::Boundary => {
            let adf = grid
                .adf(idx)
                .map(|cell| cell.query(centroid))
                .unwrap_or_else(|| shape.sdf(centroid));
            if adf > grid.geps(idx) {
                return false;
            }
        }
    }

    // Test 2: edge midpoints inside or on the boundary
    let mut count = 0;
    for m in [(a + b) * 0.5, (b + c) * 0.5, (a + c) * 0.5] {
        let idx = grid.cell_of(m);
        match grid.kind(idx) {
            CellKind::Inner => count += 1,
            CellKind::Boundary => {
                let adf = grid
                    .adf(idx)
                    .map(|cell| cell.query(m))
                    .unwrap_or_else(|| shape.sdf(m));
                if adf <= grid.geps(idx) {
                    count += 1;
                }
            }
            CellKind::Outer => {}
        }
    }
    if count >= 2 {
        return true;
    }

    // Test 3: circumcenter distance relative to the circumradius
    circumcenter_test(a, b, c, grid, shape, cfg.t_tria_ccircum)
}

/// Test 3 in isolation: invalid iff `|sdf(circumcenter)| / R > threshold`.
pub fn circumcenter_test(
    a: Point2,
    b: Point2,
    c: Point2,
    grid: &GeometryGrid,
    shape: &Shape,
    threshold: f64,
) -> bool {
    let Some(cc) = circumcenter(a, b, c) else {
        return false;
    };
    let r = cc.dist(a);
    if r <= 0.0 {
        return false;
    }
    let sdf = if grid.domain().contains(cc) {
        let idx = grid.cell_of(cc);
        if grid.kind(idx) == CellKind::Boundary {
            grid.adf(idx)
                .map(|cell| cell.query(cc))
                .unwrap_or_else(|| shape.sdf(cc))
        } else {
            shape.sdf(cc)
        }
    } else {
        shape.sdf(cc)
    };
    sdf.abs() / r <= threshold
}

/// Reference Delaunay by exhaustive empty-circumcircle enumeration, O(n^4).
/// Triangles whose circumcircle contains another point strictly inside
/// (beyond `tol` relative) are rejected. Test oracle only.
pub fn delaunay_by_enumeration(points: &[Point2], tol: f64) -> Vec<[u32; 3]> {
    let n = points.len();
    let mut out = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                let Some(cc) = circumcenter(points[i], points[j], points[k]) else {
                    continue;
                };
                let r = cc.dist(points[i]);
                let mut empty = true;
                for (l, &p) in points.iter().enumerate() {
                    if l == i || l == j || l == k {
                        continue;
                    }
                    if cc.dist(p) < r * (1.0 - tol) {
                        empty = false;
                        break;
                    }
                }
                if empty {
                    out.push([i as u32, j as u32, k as u32]);
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Default)]
pub struct DelaunayMesh {
    /// Vertex index triples, counterclockwise.
    pub triangles: Vec<[u32; 3]>,
    pub valid: Vec<bool>,
}

impl DelaunayMesh {
    pub fn valid_triangles(&self) -> impl Iterator<Item = [u32; 3]> + '_ {
        self.triangles
            .iter()
            .zip(&self.valid)
            .filter(|(_, &v)| v)
            .map(|(t, _)| *t)
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }
}

/// Procedure used every (re)triangulation round: diagram, dual, validity.
pub fn triangulate(
    points: &[Point2],
    grid: &GeometryGrid,
    shape: &Shape,
    cfg: &Config,
) -> (Vec<VoronoiCell>, DelaunayMesh) {
    let spans: Vec<f64> = points
        .iter()
        .map(|&p| {
            let h = grid.h(grid.cell_of(p));
            let h = if h.is_finite() { h } else { grid.h_avg };
            cfg.fac_voro_bound * h
        })
        .collect();
    let cells = compute_diagram(points, grid.domain(), Spans::PerPoint(&spans), cfg.n_opt);
    let triangles = extract_delaunay(&cells, points);
    let valid = par_map(triangles.len(), |t| {
        triangle_valid(triangles[t], points, grid, shape, cfg)
    });
    (cells, DelaunayMesh { triangles, valid })
}

/// Match two vertex sets as multisets within `tol` (test helper).
pub fn vertex_sets_match(a: &[Point2], b: &[Point2], tol: f64) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut used = vec![false; b.len()];
    'outer: for va in a {
        for (k, vb) in b.iter().enumerate() {
            if !used[k] && va.dist(*vb) <= tol {
                used[k] = true;
                continue 'outer;
            }
        }
        return false;
    }
    true
}
