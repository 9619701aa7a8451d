//! Automatic element sizing and density fields.
//!
//! The sizing value at a point is the infimum over boundary samples `s` of
//! `K * d(s, x) + lfs(s)`, where the local feature size `lfs` is the distance
//! from `s` to the approximate medial axis. The medial axis itself is read
//! off the Voronoi diagram of the boundary samples. Density is `1 / mu^2`.

use crate::config::Config;
use crate::error::{Error, Result};
use crate::geom::{for_ring, Point2, Rect};
use crate::grid::{CellKind, GeometryGrid, MACHINE_EPS};
use crate::parallel::{det_sum, par_map};
use crate::sdf::Shape;
use crate::treatment::newton_project;
use crate::voronoi::{compute_diagram, EdgeSource, Spans};
use rand::Rng;
use std::sync::Arc;

/// Target spacing of the boundary approximation points.
pub fn boundary_spacing(grid: &GeometryGrid, cfg: &Config) -> f64 {
    let (dx, dy) = grid.cell_size();
    cfg.fac_s * dx.min(dy)
}

fn boundary_tolerance(grid: &GeometryGrid, cfg: &Config) -> f64 {
    let (dx, dy) = grid.cell_size();
    cfg.fac_geps * dx.min(dy)
}

/// Dense boundary approximation points. Contour input uses the segment
/// endpoints plus even subdivision; pure distance-field input seeds random
/// points in every boundary cell and projects the strays onto the boundary.
pub fn generate_boundary_points(
    shape: &Shape,
    grid: &GeometryGrid,
    cfg: &Config,
    rng: &mut impl Rng,
) -> Result<Vec<Point2>> {
    let d_s = boundary_spacing(grid, cfg);
    let mut out = Vec::new();
    if let Some(contour) = shape.as_contour() {
        for s in contour.segments() {
            out.push(s.p1);
            let len = s.length();
            if len > d_s {
                let k = (len / d_s).floor() as usize + 1;
                let dir = (s.p2 - s.p1) / k as f64;
                for i in 1..k {
                    out.push(s.p1 + dir * i as f64);
                }
            }
        }
        return Ok(out);
    }

    let geps_hat = boundary_tolerance(grid, cfg);
    let (dx, dy) = grid.cell_size();
    let deps_hat = MACHINE_EPS.sqrt() * dx.min(dy);
    for idx in 0..grid.cell_count() {
        if grid.kind(idx) != CellKind::Boundary {
            continue;
        }
        let rect = grid.cell_rect(idx);
        for _ in 0..cfg.n_grid {
            let p = Point2::new(
                rng.gen_range(rect.ax..rect.bx),
                rng.gen_range(rect.ay..rect.by),
            );
            if shape.sdf(p).abs() <= geps_hat {
                out.push(p);
            } else if let Ok(q) = newton_project(
                shape,
                p,
                geps_hat,
                deps_hat,
                cfg.newton_damping,
                cfg.t_newton_ct,
            ) {
                out.push(q);
            }
        }
    }
    if out.len() < 3 {
        return Err(Error::ProjectionStarvation(out.len()));
    }
    Ok(out)
}

/// Merge boundary points closer than the target spacing. A candidate
/// neighbor only counts when the midpoint with it still lies on the
/// boundary; the closest valid neighbor under the spacing is deleted and the
/// current point moves to their midpoint. Passes repeat until every point's
/// closest valid neighbor is at least the spacing away.
pub fn trim_boundary_points(
    pts: &[Point2],
    shape: &Shape,
    grid: &GeometryGrid,
    cfg: &Config,
) -> Vec<Point2> {
    let d_s = boundary_spacing(grid, cfg);
    let geps_hat = boundary_tolerance(grid, cfg);
    let (dx, dy) = grid.cell_size();
    let (nx, ny) = grid.dims();
    let reach = (d_s / dx.min(dy)).ceil() as usize;

    let mut pos: Vec<Point2> = pts.to_vec();
    let mut alive = vec![true; pos.len()];
    let mut resolved = vec![false; pos.len()];
    loop {
        // rebuild bins: points move between passes
        let mut bins: Vec<Vec<u32>> = vec![Vec::new(); nx * ny];
        for (i, p) in pos.iter().enumerate() {
            if alive[i] {
                bins[grid.cell_of(*p)].push(i as u32);
            }
        }
        let mut changed = false;
        for i in 0..pos.len() {
            if !alive[i] || resolved[i] {
                continue;
            }
            // gather alive candidates within the spacing
            let cell = grid.cell_of(pos[i]);
            let (cx, cy) = (cell % nx, cell / nx);
            let mut cands: Vec<(f64, u32)> = Vec::new();
            for l in 0..=reach {
                for_ring(cx, cy, l, nx, ny, |ix, iy| {
                    for &j in &bins[iy * nx + ix] {
                        if j as usize == i || !alive[j as usize] {
                            continue;
                        }
                        let d = pos[i].dist(pos[j as usize]);
                        if d < d_s {
                            cands.push((d, j));
                        }
                    }
                });
            }
            cands.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            let mut merged = false;
            for (_, j) in cands {
                let j = j as usize;
                let mid = (pos[i] + pos[j]) * 0.5;
                if shape.sdf(mid).abs() > geps_hat {
                    continue; // different boundary feature
                }
                // delete the neighbor, move to the midpoint
                alive[j] = false;
                bins[grid.cell_of(pos[j])].retain(|&k| k as usize != j);
                let old_cell = grid.cell_of(pos[i]);
                pos[i] = mid;
                if grid.cell_of(mid) != old_cell {
                    bins[old_cell].retain(|&k| k as usize != i);
                    bins[grid.cell_of(mid)].push(i as u32);
                }
                // the move may bring previously settled points back under
                // the spacing
                let (mx, my) = (grid.cell_of(mid) % nx, grid.cell_of(mid) / nx);
                for l in 0..=reach {
                    for_ring(mx, my, l, nx, ny, |ix, iy| {
                        for &k in &bins[iy * nx + ix] {
                            if alive[k as usize] && pos[k as usize].dist(mid) < d_s {
                                resolved[k as usize] = false;
                            }
                        }
                    });
                }
                merged = true;
                changed = true;
                break;
            }
            if !merged {
                resolved[i] = true;
            }
        }
        if !changed {
            break;
        }
    }
    pos.into_iter()
        .zip(alive)
        .filter(|(_, a)| *a)
        .map(|(p, _)| p)
        .collect()
}

/// Approximate medial-axis points from the Voronoi diagram of the boundary
/// samples: per sample, the farthest Voronoi vertex of its cell, plus the
/// farthest one in the half-plane away from it. Only proper Voronoi vertices
/// count (both incident edges are bisectors); corners cut by the domain box
/// are clip artifacts, not equidistant points.
pub fn medial_axis_points(s_points: &[Point2], grid: &GeometryGrid) -> Vec<Point2> {
    if s_points.len() < 3 {
        return Vec::new();
    }
    let domain = grid.domain();
    // octagon large enough that only the domain box bounds the cells
    let span = 2.0 * domain.diagonal();
    let cells = compute_diagram(s_points, domain, Spans::Uniform(span), 3.3);
    let per_point: Vec<Vec<Point2>> = par_map(cells.len(), |i| {
        let cell = &cells[i];
        let s = s_points[i];
        let m = cell.verts.len();
        let proper: Vec<Point2> = (0..m)
            .filter(|&k| {
                matches!(cell.edges[(k + m - 1) % m], EdgeSource::Neighbor(_))
                    && matches!(cell.edges[k], EdgeSource::Neighbor(_))
            })
            .map(|k| cell.verts[k])
            .collect();
        let mut out = Vec::new();
        let Some(v1) = proper
            .iter()
            .copied()
            .max_by(|a, b| a.dist_sq(s).partial_cmp(&b.dist_sq(s)).unwrap())
        else {
            return out;
        };
        out.push(v1);
        let n = v1 - s;
        let v2 = proper
            .iter()
            .copied()
            .filter(|w| (*w - s).dot(n) < 0.0)
            .max_by(|a, b| a.dist_sq(s).partial_cmp(&b.dist_sq(s)).unwrap());
        if let Some(v2) = v2 {
            out.push(v2);
        }
        out
    });
    per_point
        .into_iter()
        .flatten()
        .filter(|p| domain.contains(*p))
        .collect()
}

/// Drop isolated medial-axis candidates: a point is kept only when enough
/// neighbors lie within the search radius.
pub fn trim_medial_points(m_points: &[Point2], grid: &GeometryGrid, cfg: &Config) -> Vec<Point2> {
    let d_s = boundary_spacing(grid, cfg);
    let r_nei = cfg.fac_nei * cfg.n_nei_thres as f64 * d_s;
    let (dx, dy) = grid.cell_size();
    let (nx, ny) = grid.dims();
    let reach = (r_nei / dx.min(dy)).ceil() as usize;
    let mut bins: Vec<Vec<u32>> = vec![Vec::new(); nx * ny];
    for (i, p) in m_points.iter().enumerate() {
        bins[grid.cell_of(*p)].push(i as u32);
    }
    let keep: Vec<bool> = par_map(m_points.len(), |i| {
        let cell = grid.cell_of(m_points[i]);
        let (cx, cy) = (cell % nx, cell / nx);
        let mut count = 0usize;
        for l in 0..=reach {
            for_ring(cx, cy, l, nx, ny, |ix, iy| {
                for &j in &bins[iy * nx + ix] {
                    if j as usize != i && m_points[j as usize].dist(m_points[i]) <= r_nei {
                        count += 1;
                    }
                }
            });
        }
        count >= cfg.n_nei_thres
    });
    m_points
        .iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(p, _)| *p)
        .collect()
}

/// Local feature size per boundary point: distance to the nearest
/// medial-axis point.
pub fn compute_lfs(
    s_points: &[Point2],
    m_points: &[Point2],
    domain: Rect,
) -> Result<Vec<f64>> {
    if m_points.is_empty() {
        return Err(Error::EmptyMedialAxis);
    }
    let floor = 1e-12 * domain.diagonal();
    let lfs = par_map(s_points.len(), |i| {
        m_points
            .iter()
            .map(|m| m.dist(s_points[i]))
            .fold(f64::INFINITY, f64::min)
    });
    for (i, &v) in lfs.iter().enumerate() {
        if v < floor {
            return Err(Error::DegenerateFeatureSize {
                point: (s_points[i].x, s_points[i].y),
                lfs: v,
            });
        }
    }
    Ok(lfs)
}

/// How sizing values are produced at query points between cell midpoints.
#[derive(Clone)]
enum MuSource {
    /// Per-cell table only (uniform field).
    Constant,
    /// Feature-size construction; uncached cells evaluate the same formula
    /// at their midpoint.
    Auto {
        s: Arc<Vec<Point2>>,
        lfs: Arc<Vec<f64>>,
        k: f64,
    },
    /// User-supplied relative sizing function, cell-midpoint quantized.
    Function(Arc<dyn Fn(Point2) -> f64 + Send + Sync>),
}

/// Element sizing `mu` and density `rho = 1 / mu^2` tabulated on grid cells.
#[derive(Clone)]
pub struct SizingModel {
    mu: Vec<f64>,
    rho: Vec<f64>,
    source: MuSource,
}

impl std::fmt::Debug for SizingModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SizingModel")
            .field("cells", &self.mu.len())
            .finish()
    }
}

fn auto_mu(s: &[Point2], lfs: &[f64], k: f64, at: Point2) -> f64 {
    let mut best = f64::INFINITY;
    for (si, &l) in s.iter().zip(lfs) {
        let v = k * si.dist(at) + l;
        if v < best {
            best = v;
        }
    }
    best
}

impl SizingModel {
    /// Uniform sizing field (`mu = 1` everywhere).
    pub fn constant(grid: &GeometryGrid) -> SizingModel {
        let n = grid.cell_count();
        SizingModel {
            mu: vec![1.0; n],
            rho: vec![1.0; n],
            source: MuSource::Constant,
        }
    }

    /// Sizing from boundary samples and their feature sizes:
    /// `mu_i = min_s [K d(s, m_i) + lfs(s)]` at cell midpoints. Outer cells
    /// are filled only when `include_outer` is set (needed by centroid
    /// quadrature, whose Voronoi cells can overlap outer cells).
    pub fn auto(
        grid: &GeometryGrid,
        s_points: Vec<Point2>,
        lfs: Vec<f64>,
        k: f64,
        include_outer: bool,
    ) -> SizingModel {
        let s = Arc::new(s_points);
        let lfs = Arc::new(lfs);
        let n = grid.cell_count();
        let mu: Vec<f64> = par_map(n, |idx| {
            if grid.kind(idx) == CellKind::Outer && !include_outer {
                return f64::NAN;
            }
            auto_mu(&s, &lfs, k, grid.midpoint(idx))
        });
        let rho = mu.iter().map(|&m| 1.0 / (m * m)).collect();
        SizingModel {
            mu,
            rho,
            source: MuSource::Auto { s, lfs, k },
        }
    }

    /// User-supplied relative sizing function, tabulated at cell midpoints
    /// on every cell. Values are floored to keep the density finite.
    pub fn from_fn<F>(grid: &GeometryGrid, f: F) -> SizingModel
    where
        F: Fn(Point2) -> f64 + Send + Sync + 'static,
    {
        let floor = 1e-9 * grid.domain().diagonal();
        let f = Arc::new(move |p: Point2| f(p).max(floor));
        let n = grid.cell_count();
        let mu: Vec<f64> = {
            let f = f.clone();
            par_map(n, move |idx| f(grid.midpoint(idx)))
        };
        let rho = mu.iter().map(|&m| 1.0 / (m * m)).collect();
        SizingModel {
            mu,
            rho,
            source: MuSource::Function(f),
        }
    }

    pub fn mu_cell(&self, idx: usize) -> f64 {
        self.mu[idx]
    }

    pub fn rho_cell(&self, idx: usize) -> f64 {
        self.rho[idx]
    }

    /// Sizing at a point, quantized to its cell midpoint. Cells without a
    /// tabulated value fall back to direct evaluation of the same formula.
    pub fn mu_at(&self, grid: &GeometryGrid, p: Point2) -> f64 {
        let idx = grid.cell_of(p);
        let v = self.mu[idx];
        if v.is_finite() {
            return v;
        }
        match &self.source {
            MuSource::Constant => 1.0,
            MuSource::Auto { s, lfs, k } => auto_mu(s, lfs, *k, grid.midpoint(idx)),
            MuSource::Function(f) => f(grid.midpoint(idx)),
        }
    }

    /// Density at a point (`1 / mu^2`), cell-midpoint quantized.
    pub fn rho_at(&self, grid: &GeometryGrid, p: Point2) -> f64 {
        let idx = grid.cell_of(p);
        let v = self.rho[idx];
        if v.is_finite() {
            return v;
        }
        let mu = self.mu_at(grid, p);
        1.0 / (mu * mu)
    }
}

/// Density normalized over the seeding cells (inner plus selected boundary);
/// non-selected boundary cells are divided by the same factor. Returns one
/// value per cell, zero on outer cells.
pub fn normalized_rho(grid: &GeometryGrid, model: &SizingModel) -> Vec<f64> {
    let n = grid.cell_count();
    let total = det_sum(n, |idx| {
        if grid.kind(idx) == CellKind::Inner || grid.is_selected(idx) {
            model.rho_cell(idx)
        } else {
            0.0
        }
    });
    (0..n)
        .map(|idx| match grid.kind(idx) {
            CellKind::Outer => 0.0,
            _ => model.rho_cell(idx) / total,
        })
        .collect()
}

/// Plain-text dump of the sizing inputs and fields for external plotting:
/// one record per line.
pub fn dump_debug_tables(
    dir: &std::path::Path,
    s_points: &[Point2],
    m_points: &[Point2],
    model: &SizingModel,
    grid: &GeometryGrid,
) -> Result<()> {
    use std::fmt::Write as _;
    let write = |name: &str, body: String| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
    };
    let mut s = String::new();
    for p in s_points {
        writeln!(s, "{} {}", p.x, p.y).unwrap();
    }
    write("boundary_points.txt", s)?;
    let mut m = String::new();
    for p in m_points {
        writeln!(m, "{} {}", p.x, p.y).unwrap();
    }
    write("medial_points.txt", m)?;
    let mut f = String::new();
    for idx in 0..grid.cell_count() {
        if grid.kind(idx) != CellKind::Outer {
            let mp = grid.midpoint(idx);
            writeln!(
                f,
                "{} {} {} {}",
                mp.x,
                mp.y,
                model.mu_cell(idx),
                model.rho_cell(idx)
            )
            .unwrap();
        }
    }
    write("sizing_density.txt", f)
}
