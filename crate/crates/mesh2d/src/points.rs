//! Mesh point bookkeeping: density-proportional initialization by
//! error-diffusion dithering, point categories, triangle quality metrics,
//! and the mid-meshing point addition scheme.

use crate::config::Config;
use crate::error::{Error, Result};
use crate::geom::Point2;
use crate::grid::{CellKind, GeometryGrid};
use crate::parallel::{det_sum, par_map};
use crate::sdf::Shape;
use crate::treatment::newton_project;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointKind {
    Inner,
    Boundary,
}

/// Per-triangle metrics. `alpha` is circumradius over twice the inradius,
/// `beta` the longest-to-shortest edge ratio; both are 1 for an equilateral
/// triangle.
#[derive(Debug, Clone, Copy)]
pub struct TriangleInfo {
    pub verts: [u32; 3],
    pub alpha: f64,
    pub beta: f64,
    pub r_circum: f64,
    pub r_in: f64,
    pub l_max: f64,
    pub l_min: f64,
    pub circumcenter: Point2,
    pub centroid: Point2,
}

/// Aspect and edge ratio of a triangle.
pub fn triangle_quality(a: Point2, b: Point2, c: Point2) -> Result<(f64, f64)> {
    let info = triangle_metrics([0, 1, 2], a, b, c)?;
    Ok((info.alpha, info.beta))
}

fn triangle_metrics(verts: [u32; 3], a: Point2, b: Point2, c: Point2) -> Result<TriangleInfo> {
    let l1 = a.dist(b);
    let l2 = b.dist(c);
    let l3 = c.dist(a);
    let area = 0.5 * ((b - a).cross(c - a)).abs();
    if area <= 1e-300 {
        return Err(Error::DegenerateTriangle);
    }
    let l_max = l1.max(l2).max(l3);
    let l_min = l1.min(l2).min(l3);
    let r_circum = l1 * l2 * l3 / (4.0 * area);
    let s = 0.5 * (l1 + l2 + l3);
    let r_in = area / s;
    let circumcenter = crate::geom::circumcenter(a, b, c).ok_or(Error::DegenerateTriangle)?;
    Ok(TriangleInfo {
        verts,
        alpha: r_circum / (2.0 * r_in),
        beta: l_max / l_min,
        r_circum,
        r_in,
        l_max,
        l_min,
        circumcenter,
        centroid: (a + b + c) / 3.0,
    })
}

/// Generalized 1/2-mean: `((sum of sqrt(x)) / n)^2`. Less sensitive to large
/// outliers than the arithmetic mean.
pub fn half_mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Validation("half_mean of an empty list".into()));
    }
    let s: f64 = values.iter().map(|v| v.sqrt()).sum();
    Ok((s / values.len() as f64).powi(2))
}

/// Quality aggregate of one iteration.
#[derive(Debug, Clone, Copy)]
pub struct QualityRecord {
    pub half_alpha: f64,
    pub half_beta: f64,
    pub max_alpha: f64,
}

/// Relative change between two successive values.
pub fn rel_change(prev: f64, now: f64) -> f64 {
    ((now - prev) / prev).abs()
}

/// Current mesh points with categories, movement bookkeeping and the valid
/// triangle list of the latest triangulation.
#[derive(Debug, Clone)]
pub struct MeshState {
    pub points: Vec<Point2>,
    pub kinds: Vec<PointKind>,
    /// Pinned points never move (corner pinning and the like).
    pub frozen: Vec<bool>,
    /// Distance each point moved in the previous iteration.
    pub prev_move: Vec<f64>,
    /// Position snapshot taken at the last retriangulation.
    pub snapshot: Vec<Point2>,
    /// Valid triangles of the current triangulation (vertex index triples).
    pub triangles: Vec<[u32; 3]>,
    /// Per-iteration quality history.
    pub history: Vec<QualityRecord>,
    pub n_total: usize,
    pub n_init: usize,
    /// Set when the triangulation no longer matches the points (initially,
    /// and after point addition).
    pub needs_triangulation: bool,
}

impl MeshState {
    pub fn n_current(&self) -> usize {
        self.points.len()
    }

    pub fn take_snapshot(&mut self) {
        self.snapshot = self.points.clone();
    }

    /// Displacement from the snapshot taken at the last retriangulation.
    pub fn move_since_retria(&self, i: usize) -> f64 {
        self.points[i].dist(self.snapshot[i])
    }

    pub fn freeze_point(&mut self, i: usize) {
        self.frozen[i] = true;
    }

    /// Categorize a position: points in inner cells are inner; in boundary
    /// cells the signed distance against the local tolerance decides.
    pub fn categorize(p: Point2, grid: &GeometryGrid, shape: &Shape) -> PointKind {
        let idx = grid.cell_of(p);
        match grid.kind(idx) {
            CellKind::Boundary => {
                let d = grid
                    .adf(idx)
                    .map(|c| c.query(p))
                    .unwrap_or_else(|| shape.sdf(p));
                if d.abs() <= grid.geps(idx) {
                    PointKind::Boundary
                } else {
                    PointKind::Inner
                }
            }
            _ => PointKind::Inner,
        }
    }
}

/// Expected point counts per cell turned into integer counts by serial
/// raster-scan dithering: scan rows top to bottom, cells left to right,
/// round the accumulated value and diffuse the residual with equal weights
/// to the not-yet-visited valid neighbors (right, lower-left, lower,
/// lower-right). Undiffusable residuals are dropped and the total is then
/// repaired to exactly `n_init` at the extreme-density cells.
pub fn dither_counts(grid: &GeometryGrid, rho_norm: &[f64], n_init: usize) -> Vec<usize> {
    let (nx, ny) = grid.dims();
    let valid: Vec<bool> = (0..grid.cell_count())
        .map(|idx| grid.kind(idx) == CellKind::Inner || grid.is_selected(idx))
        .collect();
    let mut residual = vec![0.0f64; grid.cell_count()];
    let mut counts = vec![0usize; grid.cell_count()];
    for iy_top in 0..ny {
        let iy = ny - 1 - iy_top;
        for ix in 0..nx {
            let idx = iy * nx + ix;
            if !valid[idx] {
                continue;
            }
            let value = rho_norm[idx] * n_init as f64 + residual[idx];
            let n = value.round().max(0.0);
            counts[idx] = n as usize;
            let r = value - n;
            // unvisited neighbors in scan order: right, lower-left, lower,
            // lower-right (the scan walks top-down)
            let mut targets = [0usize; 4];
            let mut m = 0;
            if ix + 1 < nx && valid[idx + 1] {
                targets[m] = idx + 1;
                m += 1;
            }
            if iy > 0 {
                let below = (iy - 1) * nx + ix;
                if ix > 0 && valid[below - 1] {
                    targets[m] = below - 1;
                    m += 1;
                }
                if valid[below] {
                    targets[m] = below;
                    m += 1;
                }
                if ix + 1 < nx && valid[below + 1] {
                    targets[m] = below + 1;
                    m += 1;
                }
            }
            if m > 0 {
                let w = r / m as f64;
                for &t in &targets[..m] {
                    residual[t] += w;
                }
            }
        }
    }
    // exact-count repair at the extreme-density cells
    let mut total: usize = counts.iter().sum();
    if total != n_init {
        let mut order: Vec<usize> = (0..grid.cell_count()).filter(|&i| valid[i]).collect();
        order.sort_by(|&a, &b| rho_norm[b].partial_cmp(&rho_norm[a]).unwrap().then(a.cmp(&b)));
        while total < n_init {
            for &idx in &order {
                counts[idx] += 1;
                total += 1;
                if total == n_init {
                    break;
                }
            }
        }
        while total > n_init {
            for &idx in order.iter().rev() {
                if counts[idx] > 0 {
                    counts[idx] -= 1;
                    total -= 1;
                    if total == n_init {
                        break;
                    }
                }
            }
        }
    }
    counts
}

/// Seed `n_init` points proportional to the density field, projecting strays
/// in the selected boundary cells back onto the geometry.
pub fn init_points(
    grid: &GeometryGrid,
    rho_norm: &[f64],
    n_init: usize,
    n_total: usize,
    shape: &Shape,
    cfg: &Config,
    rng: &mut impl Rng,
) -> Result<MeshState> {
    let counts = dither_counts(grid, rho_norm, n_init);
    let (nx, ny) = grid.dims();
    let mut points = Vec::with_capacity(n_init);
    // positions must be pairwise distinct: coincident generators degrade the
    // Voronoi dual (boundary projections can collide, e.g. at a corner)
    let mut seen = std::collections::HashSet::with_capacity(n_init);
    let key = |p: Point2| (p.x.to_bits(), p.y.to_bits());
    for iy_top in 0..ny {
        let iy = ny - 1 - iy_top;
        for ix in 0..nx {
            let idx = iy * nx + ix;
            let n = counts[idx];
            if n == 0 {
                continue;
            }
            let rect = grid.cell_rect(idx);
            let selected_boundary = grid.is_selected(idx);
            for _ in 0..n {
                let mut placed = None;
                for _attempt in 0..100 {
                    let p = Point2::new(
                        rng.gen_range(rect.ax..rect.bx),
                        rng.gen_range(rect.ay..rect.by),
                    );
                    let candidate = if !selected_boundary {
                        Some(p)
                    } else {
                        let d = grid
                            .adf(idx)
                            .map(|c| c.query(p))
                            .unwrap_or_else(|| shape.sdf(p));
                        if d <= grid.geps(idx) {
                            Some(p)
                        } else {
                            newton_project(
                                shape,
                                p,
                                grid.geps(idx),
                                grid.deps(idx),
                                cfg.newton_damping,
                                cfg.t_newton_ct,
                            )
                            .ok()
                            .map(|q| crate::treatment::clamp_to_domain(q, grid.domain()))
                        }
                    };
                    if let Some(q) = candidate {
                        if seen.insert(key(q)) {
                            placed = Some(q);
                            break;
                        }
                    }
                }
                if let Some(p) = placed {
                    points.push(p);
                }
            }
        }
    }
    let kinds: Vec<PointKind> = points
        .iter()
        .map(|&p| MeshState::categorize(p, grid, shape))
        .collect();
    let n = points.len();
    Ok(MeshState {
        snapshot: points.clone(),
        points,
        kinds,
        frozen: vec![false; n],
        prev_move: vec![0.0; n],
        triangles: Vec::new(),
        history: Vec::new(),
        n_total,
        n_init,
        needs_triangulation: true,
    })
}

/// Metrics of the current valid triangles plus the iteration quality
/// aggregate (1/2-means of both ratios, maximum aspect ratio). Triangles of
/// a stale triangulation can degenerate while points move (e.g. three
/// points projected onto one straight boundary piece); those are dropped
/// from the statistics and disappear at the next retriangulation.
pub fn compute_quality(
    points: &[Point2],
    triangles: &[[u32; 3]],
) -> Result<(Vec<TriangleInfo>, QualityRecord)> {
    let infos: Vec<Option<TriangleInfo>> = par_map(triangles.len(), |t| {
        let [i, j, k] = triangles[t];
        triangle_metrics(
            triangles[t],
            points[i as usize],
            points[j as usize],
            points[k as usize],
        )
        .ok()
    });
    let infos: Vec<TriangleInfo> = infos.into_iter().flatten().collect();
    if infos.is_empty() {
        return Err(Error::EmptyTriangulation);
    }
    let n = infos.len() as f64;
    let sum_sqrt_alpha = det_sum(infos.len(), |i| infos[i].alpha.sqrt());
    let sum_sqrt_beta = det_sum(infos.len(), |i| infos[i].beta.sqrt());
    let max_alpha = infos.iter().map(|t| t.alpha).fold(0.0, f64::max);
    Ok((
        infos,
        QualityRecord {
            half_alpha: (sum_sqrt_alpha / n).powi(2),
            half_beta: (sum_sqrt_beta / n).powi(2),
            max_alpha,
        },
    ))
}

/// Number of points to add when the addition scheme triggers.
pub fn addition_count(n_current: usize, n_total: usize, fac_add: f64) -> usize {
    (((fac_add * n_current as f64).round() as usize).max(1)).min(n_total - n_current)
}

/// Add points at the centroids of the triangles most in need of refinement
/// (largest circumradius relative to the local desired edge length) when the
/// quality plateau criterion fires. Returns whether points were added; the
/// grid's adaptive quantities are rescaled for the new resolution.
pub fn maybe_add_points(
    state: &mut MeshState,
    infos: &[TriangleInfo],
    grid: &mut GeometryGrid,
    shape: &Shape,
    cfg: &Config,
) -> bool {
    if state.n_current() >= state.n_total || state.history.len() < 2 {
        return false;
    }
    let prev = state.history[state.history.len() - 2];
    let now = state.history[state.history.len() - 1];
    let rel_a = rel_change(prev.half_alpha, now.half_alpha);
    let rel_b = rel_change(prev.half_beta, now.half_beta);
    if rel_a >= cfg.t_add_quality || rel_b >= cfg.t_add_quality {
        return false;
    }
    if infos.is_empty() {
        return false;
    }
    let n_old = state.n_current();
    let n_add = addition_count(n_old, state.n_total, cfg.fac_add).min(infos.len());
    // sort by circumradius over local desired edge length, descending
    let mut order: Vec<usize> = (0..infos.len()).collect();
    let ratio: Vec<f64> = infos
        .iter()
        .map(|t| {
            let h = grid.h(grid.cell_of(t.centroid));
            if h.is_finite() && h > 0.0 {
                t.r_circum / h
            } else {
                0.0
            }
        })
        .collect();
    order.sort_by(|&a, &b| ratio[b].partial_cmp(&ratio[a]).unwrap().then(a.cmp(&b)));
    for &t in order.iter().take(n_add) {
        let p = infos[t].centroid;
        state.points.push(p);
        state.kinds.push(MeshState::categorize(p, grid, shape));
        state.frozen.push(false);
        state.prev_move.push(0.0);
        state.snapshot.push(p);
    }
    grid.rescale_on_addition(n_old, state.n_current());
    state.needs_triangulation = true;
    true
}
