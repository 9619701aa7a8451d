//! Geometry grid: the domain lattice of inner/boundary/outer cells, the
//! per-cell geometric adaptive quantities derived from the local desired edge
//! length, and the per-boundary-cell adaptive signed distance quadtrees.

use crate::config::Config;
use crate::error::{Error, Result};
use crate::geom::{Point2, Rect};
use crate::parallel::par_map;
use crate::sdf::Shape;

/// Double-precision unit roundoff.
pub const MACHINE_EPS: f64 = f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    Inner,
    Boundary,
    Outer,
}

/// Quadtree of bilinear patches approximating the signed distance over one
/// boundary cell. Corner values are exact field evaluations; children reuse
/// the five midpoint/centroid evaluations of their parent so sibling leaves
/// share corners bit-identically.
#[derive(Debug, Clone)]
pub struct AdfCell {
    nodes: Vec<AdfNode>,
    rect: Rect,
    pub e_tol: f64,
    pub max_depth_hit: u32,
}

#[derive(Debug, Clone)]
struct AdfNode {
    /// Corner values in order [bottom-left, bottom-right, top-left, top-right].
    corners: [f64; 4],
    /// Child node indices per quadrant, same order as `corners`.
    children: Option<[u32; 4]>,
}

fn bilinear(rect: Rect, c: &[f64; 4], p: Point2) -> f64 {
    let u = (p.x - rect.ax) / rect.width();
    let v = (p.y - rect.ay) / rect.height();
    c[0] * (1.0 - u) * (1.0 - v) + c[1] * u * (1.0 - v) + c[2] * (1.0 - u) * v + c[3] * u * v
}

impl AdfCell {
    /// Top-down construction: subdivide while the worst interpolation error
    /// at the four edge midpoints and centroid exceeds `e_tol`, up to
    /// `max_depth`.
    pub fn build(shape: &Shape, rect: Rect, e_tol: f64, max_depth: u32) -> AdfCell {
        let corners = [
            shape.sdf(Point2::new(rect.ax, rect.ay)),
            shape.sdf(Point2::new(rect.bx, rect.ay)),
            shape.sdf(Point2::new(rect.ax, rect.by)),
            shape.sdf(Point2::new(rect.bx, rect.by)),
        ];
        let mut cell = AdfCell {
            nodes: Vec::new(),
            rect,
            e_tol,
            max_depth_hit: 0,
        };
        cell.nodes.push(AdfNode {
            corners,
            children: None,
        });
        cell.subdivide(shape, 0, rect, 0, max_depth);
        cell
    }

    fn subdivide(&mut self, shape: &Shape, node: usize, rect: Rect, depth: u32, max_depth: u32) {
        self.max_depth_hit = self.max_depth_hit.max(depth);
        if depth >= max_depth {
            return;
        }
        let mx = 0.5 * (rect.ax + rect.bx);
        let my = 0.5 * (rect.ay + rect.by);
        let probes = [
            Point2::new(mx, rect.ay),
            Point2::new(mx, rect.by),
            Point2::new(rect.ax, my),
            Point2::new(rect.bx, my),
            Point2::new(mx, my),
        ];
        let corners = self.nodes[node].corners;
        let sdf_vals: Vec<f64> = probes.iter().map(|&p| shape.sdf(p)).collect();
        let max_err = probes
            .iter()
            .zip(&sdf_vals)
            .map(|(&p, &s)| (bilinear(rect, &corners, p) - s).abs())
            .fold(0.0, f64::max);
        if max_err <= self.e_tol {
            return;
        }
        let (s_mb, s_mt, s_ml, s_mr, s_ct) =
            (sdf_vals[0], sdf_vals[1], sdf_vals[2], sdf_vals[3], sdf_vals[4]);
        let child_corners = [
            [corners[0], s_mb, s_ml, s_ct],
            [s_mb, corners[1], s_ct, s_mr],
            [s_ml, s_ct, corners[2], s_mt],
            [s_ct, s_mr, s_mt, corners[3]],
        ];
        let child_rects = [
            Rect::new(rect.ax, mx, rect.ay, my),
            Rect::new(mx, rect.bx, rect.ay, my),
            Rect::new(rect.ax, mx, my, rect.by),
            Rect::new(mx, rect.bx, my, rect.by),
        ];
        let base = self.nodes.len() as u32;
        for c in child_corners {
            self.nodes.push(AdfNode {
                corners: c,
                children: None,
            });
        }
        self.nodes[node].children = Some([base, base + 1, base + 2, base + 3]);
        for (k, r) in child_rects.into_iter().enumerate() {
            self.subdivide(shape, (base as usize) + k, r, depth + 1, max_depth);
        }
    }

    /// Bilinear interpolation at the leaf containing `p`.
    pub fn query(&self, p: Point2) -> f64 {
        self.query_with_depth(p).0
    }

    /// Interpolated value plus the depth of the leaf that produced it.
    pub fn query_with_depth(&self, p: Point2) -> (f64, u32) {
        let mut node = 0usize;
        let mut rect = self.rect;
        let mut depth = 0;
        while let Some(children) = self.nodes[node].children {
            let mx = 0.5 * (rect.ax + rect.bx);
            let my = 0.5 * (rect.ay + rect.by);
            let right = p.x >= mx;
            let top = p.y >= my;
            let quadrant = (right as usize) + 2 * (top as usize);
            node = children[quadrant] as usize;
            depth += 1;
            rect = Rect::new(
                if right { mx } else { rect.ax },
                if right { rect.bx } else { mx },
                if top { my } else { rect.ay },
                if top { rect.by } else { my },
            );
        }
        (bilinear(rect, &self.nodes[node].corners, p), depth)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Leaf rectangles paired with the depth they sit at.
    pub fn leaves(&self) -> Vec<(Rect, u32)> {
        let mut out = Vec::new();
        let mut stack = vec![(0usize, self.rect, 0u32)];
        while let Some((node, rect, depth)) = stack.pop() {
            match self.nodes[node].children {
                None => out.push((rect, depth)),
                Some(ch) => {
                    let mx = 0.5 * (rect.ax + rect.bx);
                    let my = 0.5 * (rect.ay + rect.by);
                    stack.push((ch[0] as usize, Rect::new(rect.ax, mx, rect.ay, my), depth + 1));
                    stack.push((ch[1] as usize, Rect::new(mx, rect.bx, rect.ay, my), depth + 1));
                    stack.push((ch[2] as usize, Rect::new(rect.ax, mx, my, rect.by), depth + 1));
                    stack.push((ch[3] as usize, Rect::new(mx, rect.bx, my, rect.by), depth + 1));
                }
            }
        }
        out
    }

    /// Corner values of the root patch.
    pub fn root_corners(&self) -> [f64; 4] {
        self.nodes[0].corners
    }
}

/// Rectangular cell lattice over the domain with per-cell adaptive
/// quantities. Cell `(ix, iy)` has index `iy * nx + ix`, row 0 at the bottom.
#[derive(Debug, Clone)]
pub struct GeometryGrid {
    nx: usize,
    ny: usize,
    dx: f64,
    dy: f64,
    domain: Rect,
    l_diag: f64,
    kind: Vec<CellKind>,
    /// Selected boundary cells: the narrower band used for point seeding.
    selected: Vec<bool>,
    /// Local desired edge length; NaN on cells where it is not defined.
    h: Vec<f64>,
    pub h_avg: f64,
    t_retria: Vec<f64>,
    t_end: Vec<f64>,
    t_pt: Vec<f64>,
    geps: Vec<f64>,
    deps: Vec<f64>,
    adf: Vec<Option<AdfCell>>,
}

impl GeometryGrid {
    /// Build the lattice sized from the total point count and classify every
    /// cell by its midpoint signed distance.
    pub fn build(shape: &Shape, n_total: usize, cfg: &Config) -> Result<GeometryGrid> {
        let domain = shape.domain();
        if domain.width() <= 0.0 || domain.height() <= 0.0 {
            return Err(Error::DegenerateDomain(format!(
                "domain [{}, {}] x [{}, {}]",
                domain.ax, domain.bx, domain.ay, domain.by
            )));
        }
        if n_total < 1 {
            return Err(Error::Validation("n_total must be >= 1".into()));
        }
        let lambda =
            ((n_total as f64) / (cfg.n_opt * domain.width() * domain.height())).sqrt();
        let fac = cfg.fac_grid.round().max(1.0);
        let nx = (fac * (lambda * domain.width()).ceil()) as usize;
        let ny = (fac * (lambda * domain.height()).ceil()) as usize;
        let nx = nx.max(1);
        let ny = ny.max(1);
        let dx = domain.width() / nx as f64;
        let dy = domain.height() / ny as f64;
        let l_diag = dx.hypot(dy);

        let kind: Vec<CellKind> = par_map(nx * ny, |idx| {
            let ix = idx % nx;
            let iy = idx / nx;
            let m = Point2::new(
                domain.ax + (ix as f64 + 0.5) * dx,
                domain.ay + (iy as f64 + 0.5) * dy,
            );
            let s = shape.sdf(m);
            if s.abs() <= l_diag {
                CellKind::Boundary
            } else if s < 0.0 {
                CellKind::Inner
            } else {
                CellKind::Outer
            }
        });
        // narrower band of boundary cells used for point generation
        let eta_band = cfg.eta * dx.min(dy);
        let selected: Vec<bool> = par_map(nx * ny, |idx| {
            if kind[idx] != CellKind::Boundary {
                return false;
            }
            let ix = idx % nx;
            let iy = idx / nx;
            let m = Point2::new(
                domain.ax + (ix as f64 + 0.5) * dx,
                domain.ay + (iy as f64 + 0.5) * dy,
            );
            shape.sdf(m) <= eta_band
        });
        let n = nx * ny;
        Ok(GeometryGrid {
            nx,
            ny,
            dx,
            dy,
            domain,
            l_diag,
            kind,
            selected,
            h: vec![f64::NAN; n],
            h_avg: f64::NAN,
            t_retria: vec![f64::NAN; n],
            t_end: vec![f64::NAN; n],
            t_pt: vec![f64::NAN; n],
            geps: vec![f64::NAN; n],
            deps: vec![f64::NAN; n],
            adf: vec![None; n],
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn cell_size(&self) -> (f64, f64) {
        (self.dx, self.dy)
    }

    pub fn domain(&self) -> Rect {
        self.domain
    }

    pub fn l_diag(&self) -> f64 {
        self.l_diag
    }

    pub fn cell_count(&self) -> usize {
        self.nx * self.ny
    }

    pub fn cell_of(&self, p: Point2) -> usize {
        let ix = ((p.x - self.domain.ax) / self.dx).floor();
        let iy = ((p.y - self.domain.ay) / self.dy).floor();
        let ix = (ix.max(0.0) as usize).min(self.nx - 1);
        let iy = (iy.max(0.0) as usize).min(self.ny - 1);
        iy * self.nx + ix
    }

    pub fn kind(&self, idx: usize) -> CellKind {
        self.kind[idx]
    }

    pub fn kind_at(&self, p: Point2) -> CellKind {
        self.kind[self.cell_of(p)]
    }

    pub fn is_selected(&self, idx: usize) -> bool {
        self.selected[idx]
    }

    pub fn midpoint(&self, idx: usize) -> Point2 {
        let ix = idx % self.nx;
        let iy = idx / self.nx;
        Point2::new(
            self.domain.ax + (ix as f64 + 0.5) * self.dx,
            self.domain.ay + (iy as f64 + 0.5) * self.dy,
        )
    }

    pub fn cell_rect(&self, idx: usize) -> Rect {
        let ix = idx % self.nx;
        let iy = idx / self.nx;
        Rect::new(
            self.domain.ax + ix as f64 * self.dx,
            self.domain.ax + (ix as f64 + 1.0) * self.dx,
            self.domain.ay + iy as f64 * self.dy,
            self.domain.ay + (iy as f64 + 1.0) * self.dy,
        )
    }

    pub fn h(&self, idx: usize) -> f64 {
        self.h[idx]
    }

    pub fn t_retria(&self, idx: usize) -> f64 {
        self.t_retria[idx]
    }

    pub fn t_end(&self, idx: usize) -> f64 {
        self.t_end[idx]
    }

    pub fn t_pt(&self, idx: usize) -> f64 {
        self.t_pt[idx]
    }

    pub fn geps(&self, idx: usize) -> f64 {
        self.geps[idx]
    }

    pub fn deps(&self, idx: usize) -> f64 {
        self.deps[idx]
    }

    pub fn adf(&self, idx: usize) -> Option<&AdfCell> {
        self.adf[idx].as_ref()
    }

    /// Indices of all cells of a kind, ascending.
    pub fn cells_of_kind(&self, k: CellKind) -> Vec<usize> {
        (0..self.cell_count())
            .filter(|&i| self.kind[i] == k)
            .collect()
    }

    /// Derive `h_i` and the movement/boundary tolerances from the normalized
    /// density and the current point count. `rho_norm` must hold values on
    /// all inner and boundary cells (non-selected boundary cells normalized
    /// by the same factor).
    pub fn compute_adaptive_quantities(
        &mut self,
        rho_norm: &[f64],
        n_current: usize,
        cfg: &Config,
    ) -> Result<()> {
        let cell_area = self.dx * self.dy;
        let mut h_sum = 0.0;
        let mut h_count = 0usize;
        for idx in 0..self.cell_count() {
            if self.kind[idx] == CellKind::Outer {
                continue;
            }
            let n_expect = rho_norm[idx] * n_current as f64;
            if n_expect <= 0.0 {
                if self.kind[idx] == CellKind::Inner {
                    return Err(Error::ZeroDensityCell(idx));
                }
                // boundary cell with vanishing density: no sizing info
                self.h[idx] = f64::INFINITY;
            } else {
                self.h[idx] = (cell_area / n_expect).sqrt();
            }
            if self.kind[idx] == CellKind::Inner || self.selected[idx] {
                h_sum += self.h[idx];
                h_count += 1;
            }
        }
        self.h_avg = h_sum / h_count.max(1) as f64;
        let sqrt_eps = MACHINE_EPS.sqrt();
        for idx in 0..self.cell_count() {
            if self.kind[idx] == CellKind::Outer {
                continue;
            }
            let h = self.h[idx];
            self.t_retria[idx] = cfg.fac_retria_mvmt * h;
            self.t_end[idx] = cfg.fac_end_mvmt * h;
            self.t_pt[idx] = cfg.fac_pt_mvmt * h;
            if self.kind[idx] == CellKind::Boundary {
                let base = h.min(self.h_avg);
                self.geps[idx] = cfg.fac_geps * base;
                self.deps[idx] = sqrt_eps * base;
            }
        }
        Ok(())
    }

    /// Rescale `h_i` and everything derived from it after points were added.
    /// ADF trees are left alone: their tolerances were frozen for the full
    /// resolution at build time.
    pub fn rescale_on_addition(&mut self, n_old: usize, n_current: usize) {
        let f = ((n_old as f64) / (n_current as f64)).sqrt();
        for idx in 0..self.cell_count() {
            self.h[idx] *= f;
            self.t_retria[idx] *= f;
            self.t_end[idx] *= f;
            self.t_pt[idx] *= f;
            self.geps[idx] *= f;
            self.deps[idx] *= f;
        }
        self.h_avg *= f;
    }

    /// Build the per-boundary-cell signed distance quadtrees. The error
    /// tolerance is frozen at point-initialization time:
    /// `fac_etol_adf * geps_i * sqrt(n_current / n_total)`.
    pub fn build_adf(&mut self, shape: &Shape, n_current: usize, n_total: usize, cfg: &Config) {
        let fac_pt_adf = ((n_current as f64) / (n_total as f64)).sqrt();
        let cells: Vec<usize> = self.cells_of_kind(CellKind::Boundary);
        let built: Vec<(usize, AdfCell)> = {
            let grid = &*self;
            par_map(cells.len(), |k| {
                let idx = cells[k];
                let e_tol = cfg.fac_etol_adf * grid.geps[idx] * fac_pt_adf;
                (
                    idx,
                    AdfCell::build(shape, grid.cell_rect(idx), e_tol, cfg.t_depth_adf),
                )
            })
        };
        for (idx, cell) in built {
            self.adf[idx] = Some(cell);
        }
    }

    /// Signed distance lookup through the quadtree of the boundary cell
    /// containing `p`.
    pub fn adf_query(&self, p: Point2) -> Result<f64> {
        let idx = self.cell_of(p);
        match &self.adf[idx] {
            Some(cell) => Ok(cell.query(p)),
            None => Err(Error::NotBoundaryCell { x: p.x, y: p.y }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> Config {
        Config::default()
    }

    #[test]
    fn grid_dimensions_match_reference_case() {
        // unit domain, defaults, 5000 points -> 195 x 195
        let shape = Shape::circle(Rect::UNIT, Point2::new(0.5, 0.5), 0.3).unwrap();
        let grid = GeometryGrid::build(&shape, 5000, &cfg()).unwrap();
        assert_eq!(grid.dims(), (195, 195));
    }

    #[test]
    fn no_outer_cells_when_domain_inside_shape() {
        let shape = Shape::circle(Rect::UNIT, Point2::new(0.5, 0.5), 10.0).unwrap();
        let grid = GeometryGrid::build(&shape, 500, &cfg()).unwrap();
        assert_eq!(grid.cells_of_kind(CellKind::Outer).len(), 0);
        for idx in 0..grid.cell_count() {
            if grid.kind(idx) == CellKind::Boundary {
                assert!(shape.sdf(grid.midpoint(idx)).abs() <= grid.l_diag());
            }
        }
    }

    #[test]
    fn categories_match_midpoint_reclassification() {
        let shape = Shape::circle(Rect::UNIT, Point2::new(0.5, 0.5), 0.1).unwrap();
        let grid = GeometryGrid::build(&shape, 5000, &cfg()).unwrap();
        let mut counts = [0usize; 3];
        for idx in 0..grid.cell_count() {
            let s = shape.sdf(grid.midpoint(idx));
            let expect = if s.abs() <= grid.l_diag() {
                CellKind::Boundary
            } else if s < 0.0 {
                CellKind::Inner
            } else {
                CellKind::Outer
            };
            assert_eq!(grid.kind(idx), expect);
            counts[match expect {
                CellKind::Inner => 0,
                CellKind::Boundary => 1,
                CellKind::Outer => 2,
            }] += 1;
        }
        assert_eq!(counts.iter().sum::<usize>(), grid.cell_count());
        assert!(counts.iter().all(|&c| c > 0));
    }

    #[test]
    fn grid_never_coarsens_with_more_points() {
        let shape = Shape::circle(Rect::UNIT, Point2::new(0.5, 0.5), 0.3).unwrap();
        let mut prev = 0;
        for n in [100, 500, 1000, 5000, 20000] {
            let grid = GeometryGrid::build(&shape, n, &cfg()).unwrap();
            assert!(grid.dims().0 >= prev);
            prev = grid.dims().0;
        }
    }

    #[test]
    fn adaptive_quantity_arithmetic() {
        // h = sqrt(dx*dy / nE); with dx = dy = 0.01 and nE = 4, h = 0.005
        let shape = Shape::rectangle(Rect::UNIT, Rect::new(-1.0, 2.0, -1.0, 2.0)).unwrap();
        let mut c = cfg();
        c.n_opt = 1.0;
        c.fac_grid = 1.0;
        let mut grid = GeometryGrid::build(&shape, 10_000, &c).unwrap();
        assert_eq!(grid.dims(), (100, 100));
        let n_cells = grid.cell_count();
        // uniform density over all (inner) cells
        let rho = vec![1.0 / n_cells as f64; n_cells];
        let n_current = 4 * n_cells;
        grid.compute_adaptive_quantities(&rho, n_current, &c).unwrap();
        let idx = grid.cell_of(Point2::new(0.5, 0.5));
        assert!((grid.h(idx) - 0.005).abs() < 1e-15);
        assert!((grid.h_avg - 0.005).abs() < 1e-12);
        assert!((grid.t_retria(idx) - 0.1 * 0.005).abs() < 1e-15);
        assert!((grid.t_end(idx) - 0.001 * 0.005).abs() < 1e-18);
        assert!((grid.t_pt(idx) - 0.4 * 0.005).abs() < 1e-15);
        // uniform case: h equals sqrt(area / N)
        let expect = (1.0f64 / n_current as f64).sqrt();
        assert!((grid.h(idx) - expect).abs() < 1e-12);
    }

    #[test]
    fn geps_uses_table_default() {
        // fac_geps = 0.01, h = h_avg = 0.005 -> geps = 5e-5
        let shape = Shape::from_fn(Rect::UNIT, |p| p.x - 0.5);
        let mut c = cfg();
        c.n_opt = 1.0;
        c.fac_grid = 1.0;
        let mut grid = GeometryGrid::build(&shape, 10_000, &c).unwrap();
        let n_cells = grid.cell_count();
        let rho = vec![1.0 / n_cells as f64; n_cells];
        grid.compute_adaptive_quantities(&rho, 4 * n_cells, &c).unwrap();
        let bidx = grid
            .cells_of_kind(CellKind::Boundary)
            .into_iter()
            .next()
            .unwrap();
        assert!((grid.geps(bidx) - 5e-5).abs() < 1e-16);
        assert!((grid.deps(bidx) - MACHINE_EPS.sqrt() * 0.005).abs() < 1e-18);
    }

    #[test]
    fn rescale_factors_compose() {
        let shape = Shape::circle(Rect::UNIT, Point2::new(0.5, 0.5), 0.3).unwrap();
        let c = cfg();
        let mut grid = GeometryGrid::build(&shape, 2560, &c).unwrap();
        let n_cells = grid.cell_count();
        let mut rho = vec![0.0; n_cells];
        for idx in 0..n_cells {
            if grid.kind(idx) != CellKind::Outer {
                rho[idx] = 1.0;
            }
        }
        let total: f64 = (0..n_cells)
            .filter(|&i| grid.kind(i) == CellKind::Inner || grid.is_selected(i))
            .map(|i| rho[i])
            .sum();
        for v in &mut rho {
            *v /= total;
        }
        grid.compute_adaptive_quantities(&rho, 1000, &c).unwrap();
        let idx = grid.cell_of(Point2::new(0.5, 0.5));
        let h0 = grid.h(idx);
        let ratio0 = grid.t_pt(idx) / h0;

        grid.rescale_on_addition(1000, 1600);
        assert!((grid.h(idx) - h0 * (1000.0f64 / 1600.0).sqrt()).abs() < 1e-15);
        assert!((grid.h(idx) / h0 - 0.79057).abs() < 1e-5);
        grid.rescale_on_addition(1600, 2560);
        assert!((grid.h(idx) - h0 * (1000.0f64 / 2560.0).sqrt()).abs() < 1e-15);
        // identity rescale and threshold/h ratio preservation
        let h1 = grid.h(idx);
        grid.rescale_on_addition(2560, 2560);
        assert_eq!(grid.h(idx), h1);
        assert!((grid.t_pt(idx) / grid.h(idx) - ratio0).abs() < 1e-12);
    }

    #[test]
    fn adf_bilinear_field_stays_at_depth_zero() {
        // a plane field is reproduced exactly by bilinear interpolation
        let shape = Shape::from_fn(Rect::UNIT, |p| p.x - 0.5);
        let cell = AdfCell::build(&shape, Rect::new(0.45, 0.55, 0.4, 0.6), 1e-12, 10);
        assert_eq!(cell.node_count(), 1);
        assert_eq!(cell.max_depth_hit, 0);
        // query at a corner and at the centroid are exact
        assert!((cell.query(Point2::new(0.45, 0.4)) + 0.05).abs() < 1e-15);
        assert!((cell.query(Point2::new(0.5, 0.5)) - 0.0).abs() < 1e-15);
    }

    #[test]
    fn adf_zero_tolerance_reaches_depth_cap() {
        let shape = Shape::circle(Rect::UNIT, Point2::new(0.5, 0.5), 0.3).unwrap();
        // curved boundary cell with tolerance ~0 must hit the depth cap
        let cell = AdfCell::build(&shape, Rect::new(0.78, 0.82, 0.48, 0.52), 0.0, 10);
        assert_eq!(cell.max_depth_hit, 10);
    }

    #[test]
    fn adf_error_within_tolerance_and_leaves_tile() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let shape = Shape::circle(Rect::UNIT, Point2::new(0.5, 0.5), 0.3).unwrap();
        let mut c = cfg();
        c.n_opt = 20.0; // keep the test grid small
        let mut grid = GeometryGrid::build(&shape, 2000, &c).unwrap();
        let n_cells = grid.cell_count();
        let mut rho = vec![0.0; n_cells];
        for idx in 0..n_cells {
            if grid.kind(idx) != CellKind::Outer {
                rho[idx] = 1.0;
            }
        }
        let total: f64 = (0..n_cells)
            .filter(|&i| grid.kind(i) == CellKind::Inner || grid.is_selected(i))
            .map(|i| rho[i])
            .sum();
        for v in &mut rho {
            *v /= total;
        }
        grid.compute_adaptive_quantities(&rho, 2000, &c).unwrap();
        grid.build_adf(&shape, 2000, 2000, &c);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let boundary = grid.cells_of_kind(CellKind::Boundary);
        let mut checked = 0;
        while checked < 1000 {
            let idx = boundary[rng.gen_range(0..boundary.len())];
            let r = grid.cell_rect(idx);
            let p = Point2::new(rng.gen_range(r.ax..r.bx), rng.gen_range(r.ay..r.by));
            let adf = grid.adf_query(p).unwrap();
            let cell = grid.adf(idx).unwrap();
            if cell.max_depth_hit < 10 {
                assert!(
                    (adf - shape.sdf(p)).abs() <= cell.e_tol * (1.0 + 1e-9),
                    "adf error {} beyond tolerance {}",
                    (adf - shape.sdf(p)).abs(),
                    cell.e_tol
                );
            }
            checked += 1;
        }

        // leaves tile the cell exactly
        for &idx in boundary.iter().take(10) {
            let cell = grid.adf(idx).unwrap();
            let total: f64 = cell.leaves().iter().map(|(r, _)| r.area()).sum();
            let rect_area = grid.cell_rect(idx).area();
            assert!((total - rect_area).abs() < 1e-12 * rect_area.max(1e-300));
        }
    }

    #[test]
    fn adf_is_continuous_across_sibling_seams() {
        // children reuse the parent's midpoint evaluations, so interpolation
        // must agree from both sides of every internal edge
        let shape = Shape::circle(Rect::UNIT, Point2::new(0.5, 0.5), 0.3).unwrap();
        let rect = Rect::new(0.78, 0.82, 0.48, 0.52);
        let cell = AdfCell::build(&shape, rect, 1e-10, 6);
        assert!(cell.node_count() > 1);
        let mx = 0.5 * (rect.ax + rect.bx);
        for k in 1..40 {
            let y = rect.ay + k as f64 * (rect.by - rect.ay) / 40.0;
            let l = cell.query(Point2::new(mx - 1e-13, y));
            let r = cell.query(Point2::new(mx + 1e-13, y));
            assert!((l - r).abs() < 1e-9, "seam jump {l} vs {r}");
        }
    }

    #[test]
    fn adf_query_outside_boundary_cells_errors() {
        let shape = Shape::circle(Rect::UNIT, Point2::new(0.5, 0.5), 0.3).unwrap();
        let c = cfg();
        let grid = GeometryGrid::build(&shape, 1000, &c).unwrap();
        assert!(matches!(
            grid.adf_query(Point2::new(0.5, 0.5)),
            Err(Error::NotBoundaryCell { .. })
        ));
    }
}
