//! The iterative point-update algorithms: spring-force balancing over the
//! triangulation edges, Lloyd relaxation toward density-weighted Voronoi
//! centroids with adaptive quadrature, the hybrid controller that switches
//! from the former to the latter near the end, and the termination logic.

use crate::config::Config;
use crate::error::{Error, Result};
use crate::geom::Point2;
use crate::grid::GeometryGrid;
use crate::parallel::{det_sum, par_map};
use crate::points::{rel_change, MeshState};
use crate::sizing::SizingModel;
use crate::voronoi::VoronoiCell;

/// Hybrid phase. The transition is one-way: once the controller switches to
/// centroid iterations it never goes back to spring iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Dm,
    Cvd,
}

/// Repulsive spring force of an edge: `k (l0 - l)` under compression, zero
/// otherwise.
pub fn spring_force(l: f64, l0: f64, k: f64) -> f64 {
    if l < l0 {
        k * (l0 - l)
    } else {
        0.0
    }
}

/// Unique edge list of a triangulation plus per-point incidence, reused
/// across iterations until the next retriangulation.
#[derive(Debug, Clone, Default)]
pub struct SpringSystem {
    pub edges: Vec<[u32; 2]>,
    /// Per point, indices into `edges` (ascending).
    pub incident: Vec<Vec<u32>>,
}

impl SpringSystem {
    pub fn from_triangles(triangles: &[[u32; 3]], n_points: usize) -> SpringSystem {
        let mut edges: Vec<[u32; 2]> = Vec::with_capacity(triangles.len() * 3);
        for t in triangles {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[0], t[2])] {
                edges.push(if a < b { [a, b] } else { [b, a] });
            }
        }
        edges.sort_unstable();
        edges.dedup();
        SpringSystem::from_edges(edges, n_points)
    }

    pub fn from_edges(edges: Vec<[u32; 2]>, n_points: usize) -> SpringSystem {
        let mut incident = vec![Vec::new(); n_points];
        for (e, [a, b]) in edges.iter().enumerate() {
            incident[*a as usize].push(e as u32);
            incident[*b as usize].push(e as u32);
        }
        SpringSystem { edges, incident }
    }
}

/// Per-edge force data of one spring step.
#[derive(Debug)]
pub struct SpringStep {
    pub fac_mu: f64,
    /// Desired length per edge.
    pub l0: Vec<f64>,
    /// Current length per edge.
    pub len: Vec<f64>,
    /// Net internal force per point.
    pub force: Vec<Point2>,
}

/// Evaluate the spring forces of the current positions: desired lengths are
/// the edge-midpoint sizing values scaled so the mesh is everywhere slightly
/// compressed, and each under-length edge pushes its endpoints apart.
pub fn spring_forces(
    points: &[Point2],
    springs: &SpringSystem,
    model: &SizingModel,
    grid: &GeometryGrid,
    cfg: &Config,
) -> Result<SpringStep> {
    let ne = springs.edges.len();
    if ne == 0 {
        return Err(Error::EmptyTriangulation);
    }
    let len: Vec<f64> = par_map(ne, |e| {
        let [a, b] = springs.edges[e];
        points[a as usize].dist(points[b as usize])
    });
    let mu: Vec<f64> = par_map(ne, |e| {
        let [a, b] = springs.edges[e];
        let mid = (points[a as usize] + points[b as usize]) * 0.5;
        model.mu_at(grid, mid)
    });
    let sum_l2 = det_sum(ne, |e| len[e] * len[e]);
    let sum_mu2 = det_sum(ne, |e| mu[e] * mu[e]);
    let fac_mu = (sum_l2 / sum_mu2).sqrt();
    let l0: Vec<f64> = par_map(ne, |e| mu[e] * cfg.fac_f * fac_mu);
    // deterministic per-point gather over incident edges
    let force: Vec<Point2> = par_map(points.len(), |i| {
        let mut f = Point2::default();
        for &e in &springs.incident[i] {
            let e = e as usize;
            let [a, b] = springs.edges[e];
            let l = len[e];
            if l <= 0.0 {
                continue;
            }
            let mag = spring_force(l, l0[e], cfg.spring_k);
            if mag == 0.0 {
                continue;
            }
            let (from, to) = (b as usize, a as usize);
            let dir = if i == to {
                (points[to] - points[from]) / l
            } else {
                (points[from] - points[to]) / l
            };
            f += dir * mag;
        }
        f
    });
    Ok(SpringStep {
        fac_mu,
        l0,
        len,
        force,
    })
}

/// One forward-Euler spring step: proposed positions for every point.
/// Boundary constraints are applied downstream by the position treatment.
pub fn distmesh_step(
    state: &MeshState,
    springs: &SpringSystem,
    model: &SizingModel,
    grid: &GeometryGrid,
    cfg: &Config,
) -> Result<Vec<Point2>> {
    let step = spring_forces(&state.points, springs, model, grid, cfg)?;
    Ok(par_map(state.points.len(), |i| {
        if state.frozen[i] {
            state.points[i]
        } else {
            state.points[i] + step.force[i] * cfg.dt
        }
    }))
}

/// True when any point has drifted from its last-triangulation snapshot by
/// more than its cell's retriangulation threshold.
pub fn needs_retriangulation(state: &MeshState, grid: &GeometryGrid) -> bool {
    (0..state.points.len()).any(|i| {
        let t = grid.t_retria(grid.cell_of(state.points[i]));
        t.is_finite() && state.move_since_retria(i) > t
    })
}

/// Split every triangle in two at the midpoint of its longest edge.
pub fn split_triangles(tris: &[(Point2, Point2, Point2)]) -> Vec<(Point2, Point2, Point2)> {
    let mut out = Vec::with_capacity(tris.len() * 2);
    for &(a, b, c) in tris {
        let lab = a.dist_sq(b);
        let lbc = b.dist_sq(c);
        let lca = c.dist_sq(a);
        if lab >= lbc && lab >= lca {
            let m = (a + b) * 0.5;
            out.push((a, m, c));
            out.push((m, b, c));
        } else if lbc >= lca {
            let m = (b + c) * 0.5;
            out.push((b, m, a));
            out.push((m, c, a));
        } else {
            let m = (c + a) * 0.5;
            out.push((c, m, b));
            out.push((m, a, b));
        }
    }
    out
}

fn quadrature_estimate(
    tris: &[(Point2, Point2, Point2)],
    rho: &impl Fn(Point2) -> f64,
) -> Point2 {
    let mut w_sum = 0.0;
    let mut c_sum = Point2::default();
    for &(a, b, c) in tris {
        let area = 0.5 * ((b - a).cross(c - a)).abs();
        let q = (a + b + c) / 3.0;
        let w = area * rho(q);
        w_sum += w;
        c_sum += q * w;
    }
    if w_sum > 0.0 {
        c_sum / w_sum
    } else {
        // vanishing density: fall back to the unweighted quadrature centroid
        let mut acc = Point2::default();
        for &(a, b, c) in tris {
            acc += (a + b + c) / 3.0;
        }
        acc / tris.len() as f64
    }
}

/// Density-weighted centroid of a Voronoi cell by adaptive triangle
/// quadrature: level 1 fans the cell from its generator, each further level
/// splits every triangle at its longest edge, and refinement stops once two
/// successive estimates agree to the cell-scaled tolerance.
pub fn cvd_centroid(
    cell: &VoronoiCell,
    generator: Point2,
    rho: &impl Fn(Point2) -> f64,
    eps_c: f64,
) -> Result<Point2> {
    if cell.area <= 0.0 || cell.verts.len() < 3 {
        return Err(Error::DegenerateCell(cell.generator as usize));
    }
    let e_thres = cell.l_v() * eps_c;
    let mut tris: Vec<(Point2, Point2, Point2)> = (0..cell.verts.len())
        .map(|k| {
            (
                generator,
                cell.verts[k],
                cell.verts[(k + 1) % cell.verts.len()],
            )
        })
        .collect();
    let mut prev = generator;
    let mut estimate = quadrature_estimate(&tris, rho);
    // level cap keeps the subdivision finite for adversarial densities
    for _ in 0..16 {
        if prev.dist(estimate) < e_thres {
            return Ok(estimate);
        }
        tris = split_triangles(&tris);
        prev = estimate;
        estimate = quadrature_estimate(&tris, rho);
    }
    Ok(estimate)
}

/// Lloyd proposals: each point moves to its cell's weighted centroid. The
/// quadrature tolerance scales with the previous movement so early sloppy
/// iterations stay cheap and converged ones get accurate centroids. A point
/// whose cell degenerated (coincident generators) stays put.
pub fn cvd_step(
    state: &MeshState,
    cells: &[VoronoiCell],
    model: &SizingModel,
    grid: &GeometryGrid,
    cfg: &Config,
) -> Result<Vec<Point2>> {
    Ok(par_map(state.points.len(), |i| {
        if state.frozen[i] {
            return state.points[i];
        }
        let p = state.points[i];
        let h = grid.h(grid.cell_of(p));
        let h = if h.is_finite() && h > 0.0 { h } else { grid.h_avg };
        let eps_c = (state.prev_move[i] / h).max(cfg.fac_end_mvmt);
        cvd_centroid(&cells[i], p, &|q| model.rho_at(grid, q), eps_c).unwrap_or(p)
    }))
}

/// Hybrid phase transition: switch to centroid iterations once every point
/// is in the mesh and the aspect-ratio 1/2-mean has plateaued.
pub fn hybrid_decide(phase: Phase, state: &MeshState, cfg: &Config) -> Phase {
    if phase == Phase::Cvd {
        return Phase::Cvd;
    }
    if state.n_current() == state.n_total && state.history.len() >= 2 {
        let prev = state.history[state.history.len() - 2];
        let now = state.history[state.history.len() - 1];
        if rel_change(prev.half_alpha, now.half_alpha) < cfg.t_switch_quality {
            return Phase::Cvd;
        }
    }
    Phase::Dm
}

/// Why meshing stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Overall and worst-triangle quality stabilized.
    Quality,
    /// Every inner point's last movement fell under its local threshold.
    Movement,
}

/// Check the two termination criteria. Quality-based termination is
/// meaningful only at full resolution (otherwise it would race the point
/// addition trigger on the same statistics).
pub fn check_termination(
    state: &MeshState,
    grid: &GeometryGrid,
    cfg: &Config,
) -> Option<Termination> {
    if state.n_current() == state.n_total && state.history.len() >= 2 {
        let prev = state.history[state.history.len() - 2];
        let now = state.history[state.history.len() - 1];
        if rel_change(prev.half_alpha, now.half_alpha) < cfg.t_end_quality
            && rel_change(prev.half_beta, now.half_beta) < cfg.t_end_quality
            && rel_change(prev.max_alpha, now.max_alpha) < cfg.t_end_alpha_max
        {
            return Some(Termination::Quality);
        }
    }
    let all_inner_still = (0..state.points.len()).all(|i| {
        if state.kinds[i] != crate::points::PointKind::Inner {
            return true;
        }
        let t = grid.t_end(grid.cell_of(state.points[i]));
        !t.is_finite() || state.prev_move[i] < t
    });
    if all_inner_still && !state.points.is_empty() {
        return Some(Termination::Movement);
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Rect;
    use crate::points::{PointKind, QualityRecord};
    use crate::sdf::Shape;
    use crate::voronoi::{compute_diagram, Spans};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn simple_state(points: Vec<Point2>) -> MeshState {
        let n = points.len();
        MeshState {
            snapshot: points.clone(),
            kinds: vec![PointKind::Inner; n],
            frozen: vec![false; n],
            prev_move: vec![0.0; n],
            triangles: Vec::new(),
            history: Vec::new(),
            n_total: n,
            n_init: n,
            needs_triangulation: false,
            points,
        }
    }

    fn unit_setup(n_total: usize) -> (Shape, GeometryGrid, SizingModel, Config) {
        let shape = Shape::circle(Rect::UNIT, Point2::new(0.5, 0.5), 10.0).unwrap();
        let cfg = Config::default();
        let mut grid = GeometryGrid::build(&shape, n_total, &cfg).unwrap();
        let model = SizingModel::constant(&grid);
        let rho = crate::sizing::normalized_rho(&grid, &model);
        grid.compute_adaptive_quantities(&rho, n_total, &cfg).unwrap();
        (shape, grid, model, cfg)
    }

    #[test]
    fn spring_force_is_pure_repulsion() {
        assert_eq!(spring_force(1.0, 1.0, 1.0), 0.0);
        assert_eq!(spring_force(1.5, 1.0, 1.0), 0.0);
        assert!(spring_force(0.5, 1.0, 1.0) > 0.0);
        assert_eq!(spring_force(0.5, 1.0, 1.0), 0.5);
    }

    #[test]
    fn single_compressed_edge_pushes_endpoints_apart() {
        let (_, grid, model, cfg) = unit_setup(100);
        // two points, one explicit edge; constant sizing = 1
        let points = vec![Point2::new(0.4, 0.5), Point2::new(0.6, 0.5)];
        let springs = SpringSystem::from_edges(vec![[0, 1]], 2);
        let step = spring_forces(&points, &springs, &model, &grid, &cfg).unwrap();
        // fac_mu = l / mu = 0.2, l0 = 1.2 * 0.2 = 0.24, f = 0.04
        assert!((step.fac_mu - 0.2).abs() < 1e-15);
        assert!((step.l0[0] - 0.24).abs() < 1e-15);
        let f = spring_force(step.len[0], step.l0[0], cfg.spring_k);
        assert!((f - 0.04).abs() < 1e-15);
        assert!((step.force[0].x + f).abs() < 1e-15);
        assert!((step.force[1].x - f).abs() < 1e-15);
        assert_eq!(step.force[0].y, 0.0);
        // equal and opposite
        assert_eq!(step.force[0].x, -step.force[1].x);
    }

    #[test]
    fn uniform_unit_edges_give_l0_of_fac_f() {
        let (_, grid, model, cfg) = unit_setup(100);
        // equilateral triangle with unit edges, mu = 1
        let points = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.5, 3f64.sqrt() / 2.0),
        ];
        let springs = SpringSystem::from_triangles(&[[0, 1, 2]], 3);
        let step = spring_forces(&points, &springs, &model, &grid, &cfg).unwrap();
        assert!((step.fac_mu - 1.0).abs() < 1e-12);
        for l0 in &step.l0 {
            assert!((l0 - 1.2).abs() < 1e-12);
        }
    }

    #[test]
    fn forces_sum_to_zero_on_random_meshes() {
        let (_, grid, model, cfg) = unit_setup(500);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..5 {
            let points: Vec<Point2> = (0..200)
                .map(|_| Point2::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)))
                .collect();
            let cells = compute_diagram(&points, Rect::UNIT, Spans::Uniform(0.5), 3.3);
            let tris = crate::voronoi::extract_delaunay(&cells, &points);
            let springs = SpringSystem::from_triangles(&tris, points.len());
            let step = spring_forces(&points, &springs, &model, &grid, &cfg).unwrap();
            let sum: Point2 = step
                .force
                .iter()
                .fold(Point2::default(), |acc, f| acc + *f);
            let total: f64 = step.force.iter().map(|f| f.norm()).sum();
            assert!(sum.norm() <= 1e-10 * total.max(1e-300), "net force {sum:?}");
        }
    }

    #[test]
    fn l0_is_invariant_under_sizing_rescale() {
        let shape = Shape::circle(Rect::UNIT, Point2::new(0.5, 0.5), 10.0).unwrap();
        let cfg = Config::default();
        let grid = GeometryGrid::build(&shape, 200, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let points: Vec<Point2> = (0..100)
            .map(|_| Point2::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)))
            .collect();
        let cells = compute_diagram(&points, Rect::UNIT, Spans::Uniform(0.5), 3.3);
        let tris = crate::voronoi::extract_delaunay(&cells, &points);
        let springs = SpringSystem::from_triangles(&tris, points.len());
        let base = SizingModel::from_fn(&grid, |p| 1.0 + p.x);
        let scaled = SizingModel::from_fn(&grid, |p| 37.5 * (1.0 + p.x));
        let a = spring_forces(&points, &springs, &base, &grid, &cfg).unwrap();
        let b = spring_forces(&points, &springs, &scaled, &grid, &cfg).unwrap();
        for (x, y) in a.l0.iter().zip(&b.l0) {
            assert!((x - y).abs() <= 1e-9 * x.abs());
        }
    }

    #[test]
    fn retriangulation_uses_displacement_from_snapshot() {
        let (_, grid, _, _) = unit_setup(100);
        let p = Point2::new(0.5, 0.5);
        let mut state = simple_state(vec![p]);
        let h = grid.h(grid.cell_of(p));
        assert!(!needs_retriangulation(&state, &grid));
        // move by 0.2 h: beyond the 0.1 h threshold
        state.points[0] = p + Point2::new(0.2 * h, 0.0);
        assert!(needs_retriangulation(&state, &grid));
        // +0.06 h then -0.056 h nets 0.004 h: no retriangulation under
        // displacement-from-snapshot semantics (path length would say 0.116 h)
        state.points[0] = p + Point2::new(0.06 * h, 0.0);
        state.points[0] = state.points[0] - Point2::new(0.056 * h, 0.0);
        assert!(!needs_retriangulation(&state, &grid));
    }

    fn square_cell(center: Point2, half: f64) -> VoronoiCell {
        let verts = vec![
            center + Point2::new(-half, -half),
            center + Point2::new(half, -half),
            center + Point2::new(half, half),
            center + Point2::new(-half, half),
        ];
        VoronoiCell {
            generator: 0,
            verts,
            edges: vec![crate::voronoi::EdgeSource::Wall; 4],
            area: 4.0 * half * half,
        }
    }

    #[test]
    fn constant_density_centroid_is_exact_at_level_one() {
        let c = Point2::new(0.5, 0.5);
        let cell = square_cell(c, 0.2);
        let got = cvd_centroid(&cell, c, &|_| 1.0, 1e-12).unwrap();
        assert!(got.dist(c) < 1e-15);
        // off-center generator, constant density: the fan is exact, so the
        // estimate is the polygon centroid
        let g = Point2::new(0.45, 0.42);
        let got = cvd_centroid(&cell, g, &|_| 1.0, 1e-9).unwrap();
        assert!(got.dist(c) < 1e-12, "{got:?}");
    }

    #[test]
    fn linear_density_centroid_matches_analytic_value() {
        // rho = 1 + x over the unit square: centroid (5/9, 1/2)
        let cell = square_cell(Point2::new(0.5, 0.5), 0.5);
        let got = cvd_centroid(&cell, Point2::new(0.5, 0.5), &|p| 1.0 + p.x, 1e-7).unwrap();
        assert!((got.x - 5.0 / 9.0).abs() < 1e-6, "x = {}", got.x);
        assert!((got.y - 0.5).abs() < 1e-6);
    }

    #[test]
    fn centroid_stays_inside_the_cell() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..50 {
            let n = rng.gen_range(3..9);
            // convex polygon: points on an ellipse
            let verts: Vec<Point2> = (0..n)
                .map(|k| {
                    let a = k as f64 / n as f64 * std::f64::consts::TAU;
                    Point2::new(0.5 + 0.3 * a.cos(), 0.5 + 0.2 * a.sin())
                })
                .collect();
            let area = crate::geom::polygon_signed_area(&verts);
            let cell = VoronoiCell {
                generator: 0,
                verts: verts.clone(),
                edges: vec![crate::voronoi::EdgeSource::Wall; n],
                area,
            };
            let g = Point2::new(0.5, 0.5);
            let got = cvd_centroid(&cell, g, &|p| 1.0 + 3.0 * p.x * p.x + p.y, 1e-4).unwrap();
            // inside test via cross products (convex, counterclockwise)
            for k in 0..n {
                let a = verts[k];
                let b = verts[(k + 1) % n];
                assert!((b - a).cross(got - a) > -1e-12);
            }
        }
    }

    #[test]
    fn splitting_conserves_area() {
        let tris = vec![(
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.3, 0.8),
        )];
        let area = |ts: &[(Point2, Point2, Point2)]| {
            ts.iter()
                .map(|&(a, b, c)| 0.5 * ((b - a).cross(c - a)).abs())
                .sum::<f64>()
        };
        let a0 = area(&tris);
        let mut level = tris;
        for _ in 0..6 {
            level = split_triangles(&level);
            assert!((area(&level) - a0).abs() < 1e-12 * a0);
        }
        assert_eq!(level.len(), 64);
    }

    #[test]
    fn lloyd_fixed_point_in_unit_square() {
        let (_, grid, model, cfg) = unit_setup(100);
        let points = vec![Point2::new(0.7, 0.3)];
        let mut state = simple_state(points);
        state.prev_move = vec![0.0];
        let cells = compute_diagram(&state.points, Rect::UNIT, Spans::Uniform(10.0), 3.3);
        let prop = cvd_step(&state, &cells, &model, &grid, &cfg).unwrap();
        // single cell = whole square, constant density: centroid is the middle
        assert!(prop[0].dist(Point2::new(0.5, 0.5)) < 1e-9);
        // a point already at its centroid stays put
        state.points = prop;
        let cells = compute_diagram(&state.points, Rect::UNIT, Spans::Uniform(10.0), 3.3);
        let prop2 = cvd_step(&state, &cells, &model, &grid, &cfg).unwrap();
        assert!(prop2[0].dist(state.points[0]) < 1e-12);
    }

    fn hist(a: (f64, f64, f64), b: (f64, f64, f64)) -> Vec<QualityRecord> {
        vec![
            QualityRecord {
                half_alpha: a.0,
                half_beta: a.1,
                max_alpha: a.2,
            },
            QualityRecord {
                half_alpha: b.0,
                half_beta: b.1,
                max_alpha: b.2,
            },
        ]
    }

    #[test]
    fn hybrid_switch_rules() {
        let cfg = Config::default();
        let mut state = simple_state(vec![Point2::new(0.5, 0.5)]);
        state.n_total = 2; // not all points in the mesh yet
        state.history = hist((1.0, 1.0, 2.0), (1.000001, 1.0, 2.0));
        assert_eq!(hybrid_decide(Phase::Dm, &state, &cfg), Phase::Dm);
        // full resolution + plateau below 0.0015 switches
        state.n_total = 1;
        state.history = hist((1.0, 1.0, 2.0), (1.001, 1.0, 2.0));
        assert_eq!(hybrid_decide(Phase::Dm, &state, &cfg), Phase::Cvd);
        // above the threshold: stay
        state.history = hist((1.0, 1.0, 2.0), (1.002, 1.0, 2.0));
        assert_eq!(hybrid_decide(Phase::Dm, &state, &cfg), Phase::Dm);
        // the switch is a latch
        assert_eq!(hybrid_decide(Phase::Cvd, &state, &cfg), Phase::Cvd);
    }

    #[test]
    fn termination_rules() {
        let (_, grid, _, cfg) = unit_setup(100);
        let mut state = simple_state(vec![Point2::new(0.5, 0.5)]);
        // quality path: all three relative changes under their thresholds
        state.history = hist((1.0, 1.0, 2.0), (1.0005, 1.0005, 2.008));
        state.prev_move = vec![1.0]; // movement clearly over the threshold
        assert_eq!(
            check_termination(&state, &grid, &cfg),
            Some(Termination::Quality)
        );
        // max-alpha change too large: no quality termination, movement too big
        state.history = hist((1.0, 1.0, 2.0), (1.0005, 1.0005, 2.1));
        assert_eq!(check_termination(&state, &grid, &cfg), None);
        // not at full resolution: quality path is gated off
        state.n_total = 2;
        state.history = hist((1.0, 1.0, 2.0), (1.0, 1.0, 2.0));
        assert_eq!(check_termination(&state, &grid, &cfg), None);
        // movement path: frozen-in-place inner points
        state.prev_move = vec![0.0];
        assert_eq!(
            check_termination(&state, &grid, &cfg),
            Some(Termination::Movement)
        );
    }
}
