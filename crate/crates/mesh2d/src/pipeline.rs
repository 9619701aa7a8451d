//! Batch meshing pipeline: assemble shape, grid, sizing and initial points
//! from a [`Config`], then iterate the selected algorithm to termination,
//! optionally writing mesh files, SVG renderings and a statistics report.

use crate::algorithms::{
    check_termination, cvd_step, distmesh_step, hybrid_decide, needs_retriangulation, Phase,
    SpringSystem, Termination,
};
use crate::config::{Algorithm, Config, SizingSpec};
use crate::error::{Error, Result};
use crate::geom::{Point2, Rect};
use crate::grid::GeometryGrid;
use crate::parallel::{par_map, with_pool};
use crate::points::{
    compute_quality, init_points, maybe_add_points, MeshState, PointKind, TriangleInfo,
};
use crate::sdf::Shape;
use crate::sizing::{
    compute_lfs, generate_boundary_points, medial_axis_points, normalized_rho,
    trim_boundary_points, trim_medial_points, SizingModel,
};
use crate::treatment::treat_new_position;
use crate::voronoi::triangulate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use std::path::Path;

/// Everything the meshing loop needs, built once up front.
pub struct Prepared {
    pub shape: Shape,
    pub grid: GeometryGrid,
    pub model: SizingModel,
    pub state: MeshState,
}

/// The automatic sizing construction: boundary approximation points, trim,
/// medial axis, trim, feature sizes, sizing/density on cells.
pub fn auto_sizing(
    shape: &Shape,
    grid: &GeometryGrid,
    cfg: &Config,
    rng: &mut ChaCha8Rng,
    k: f64,
    include_outer: bool,
) -> Result<SizingModel> {
    let dense = generate_boundary_points(shape, grid, cfg, rng)?;
    let s = trim_boundary_points(&dense, shape, grid, cfg);
    if s.len() < 3 {
        return Err(Error::ProjectionStarvation(s.len()));
    }
    let medial = medial_axis_points(&s, grid);
    let medial = trim_medial_points(&medial, grid, cfg);
    let lfs = compute_lfs(&s, &medial, grid.domain())?;
    Ok(SizingModel::auto(grid, s, lfs, k, include_outer))
}

/// Build shape, grid, sizing and initial points from the config.
pub fn prepare(cfg: &Config) -> Result<Prepared> {
    let shape = cfg.shape.build(cfg.domain)?;
    prepare_custom(cfg, shape, |shape, grid, rng, cfg| match cfg.sizing {
        SizingSpec::Constant => Ok(SizingModel::constant(grid)),
        SizingSpec::Auto { k } => {
            let include_outer = cfg.algorithm != Algorithm::DistMesh;
            auto_sizing(shape, grid, cfg, rng, k, include_outer)
        }
    })
}

/// Like [`prepare`] but with a caller-supplied shape and sizing factory, for
/// geometries or sizing fields that have no config syntax.
pub fn prepare_custom<F>(cfg: &Config, shape: Shape, make_model: F) -> Result<Prepared>
where
    F: FnOnce(&Shape, &GeometryGrid, &mut ChaCha8Rng, &Config) -> Result<SizingModel>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut grid = GeometryGrid::build(&shape, cfg.n_total, cfg)?;
    let model = make_model(&shape, &grid, &mut rng, cfg)?;
    let rho_norm = normalized_rho(&grid, &model);
    let n_init = cfg.n_init();
    grid.compute_adaptive_quantities(&rho_norm, n_init, cfg)?;
    grid.build_adf(&shape, n_init, cfg.n_total, cfg);
    let state = init_points(&grid, &rho_norm, n_init, cfg.n_total, &shape, cfg, &mut rng)?;
    Ok(Prepared {
        shape,
        grid,
        model,
        state,
    })
}

/// Summary statistics of the final mesh (the columns of the usual quality
/// tables).
#[derive(Debug, Clone, Default)]
pub struct QualityStats {
    pub n_triangles: usize,
    pub median_alpha: f64,
    pub mean_alpha: f64,
    pub max_alpha: f64,
    pub std_alpha: f64,
    pub median_beta: f64,
    pub mean_beta: f64,
    pub max_beta: f64,
    pub std_beta: f64,
    pub pct_alpha_below_1_2: f64,
    pub pct_alpha_below_2: f64,
}

impl QualityStats {
    pub fn from_infos(infos: &[TriangleInfo]) -> QualityStats {
        if infos.is_empty() {
            return QualityStats::default();
        }
        let n = infos.len();
        let mut alphas: Vec<f64> = infos.iter().map(|t| t.alpha).collect();
        let mut betas: Vec<f64> = infos.iter().map(|t| t.beta).collect();
        alphas.sort_by(|a, b| a.partial_cmp(b).unwrap());
        betas.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = |v: &[f64]| {
            if v.len() % 2 == 1 {
                v[v.len() / 2]
            } else {
                0.5 * (v[v.len() / 2 - 1] + v[v.len() / 2])
            }
        };
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let std = |v: &[f64], m: f64| {
            (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
        };
        let mean_alpha = mean(&alphas);
        let mean_beta = mean(&betas);
        QualityStats {
            n_triangles: n,
            median_alpha: median(&alphas),
            mean_alpha,
            max_alpha: *alphas.last().unwrap(),
            std_alpha: std(&alphas, mean_alpha),
            median_beta: median(&betas),
            mean_beta,
            max_beta: *betas.last().unwrap(),
            std_beta: std(&betas, mean_beta),
            pct_alpha_below_1_2: 100.0 * alphas.iter().filter(|&&a| a < 1.2).count() as f64
                / n as f64,
            pct_alpha_below_2: 100.0 * alphas.iter().filter(|&&a| a < 2.0).count() as f64
                / n as f64,
        }
    }

    /// The statistics report block (one line per column group).
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "triangles {}", self.n_triangles).unwrap();
        writeln!(
            s,
            "median_alpha {} mean_alpha {} max_alpha {} std_alpha {}",
            self.median_alpha, self.mean_alpha, self.max_alpha, self.std_alpha
        )
        .unwrap();
        writeln!(
            s,
            "median_beta {} mean_beta {} max_beta {} std_beta {}",
            self.median_beta, self.mean_beta, self.max_beta, self.std_beta
        )
        .unwrap();
        writeln!(
            s,
            "pct_alpha_below_1.2 {} pct_alpha_below_2 {}",
            self.pct_alpha_below_1_2, self.pct_alpha_below_2
        )
        .unwrap();
        s
    }
}

/// Outcome of a meshing run.
#[derive(Debug, Clone)]
pub struct MeshReport {
    pub iterations: usize,
    pub triangulations: usize,
    /// `None` when the iteration cap stopped the run instead of a criterion.
    pub termination: Option<Termination>,
    pub stats: QualityStats,
}

/// Run the full pipeline described by the config.
pub fn run_pipeline(cfg: &Config) -> Result<(MeshState, MeshReport)> {
    let prepared = prepare(cfg)?;
    run_prepared(prepared, cfg, |_, _| {})
}

/// Run a prepared problem, invoking `observer` after every iteration.
pub fn run_prepared<F>(
    prepared: Prepared,
    cfg: &Config,
    observer: F,
) -> Result<(MeshState, MeshReport)>
where
    F: FnMut(usize, &MeshState) + Send,
{
    with_pool(cfg.threads, || run_loop(prepared, cfg, observer))
}

fn run_loop<F>(
    prepared: Prepared,
    cfg: &Config,
    mut observer: F,
) -> Result<(MeshState, MeshReport)>
where
    F: FnMut(usize, &MeshState),
{
    let Prepared {
        shape,
        mut grid,
        model,
        mut state,
    } = prepared;
    let ctx = |iteration: usize| {
        move |e: Error| Error::Pipeline {
            iteration,
            source: Box::new(e),
        }
    };

    let mut phase = match cfg.algorithm {
        Algorithm::Cvd => Phase::Cvd,
        _ => Phase::Dm,
    };
    let mut springs = SpringSystem::default();
    let mut cells = Vec::new();
    let mut termination = None;
    let mut iterations = 0;
    let mut triangulations = 0;

    if cfg.output_interval == -1 {
        write_outputs(&state, &shape, &grid, &cfg.output_dir, "initial")?;
    }

    for iter in 1..=cfg.max_iters {
        let wrap = ctx(iter);
        let retriangulate = state.needs_triangulation
            || phase == Phase::Cvd
            || needs_retriangulation(&state, &grid);
        if retriangulate {
            let (new_cells, mesh) = triangulate(&state.points, &grid, &shape, cfg);
            state.triangles = mesh.valid_triangles().collect();
            springs = SpringSystem::from_triangles(&state.triangles, state.points.len());
            cells = new_cells;
            state.take_snapshot();
            state.needs_triangulation = false;
            triangulations += 1;
        }

        let proposals = match phase {
            Phase::Dm => distmesh_step(&state, &springs, &model, &grid, cfg).map_err(wrap)?,
            Phase::Cvd => cvd_step(&state, &cells, &model, &grid, cfg).map_err(wrap)?,
        };

        let treated: Vec<(Point2, PointKind)> = par_map(state.points.len(), |i| {
            treat_new_position(
                state.points[i],
                state.kinds[i],
                proposals[i],
                &grid,
                &shape,
                cfg,
            )
        });
        // boundary repairs can collide (several points snapping to the same
        // corner); keep positions pairwise distinct so the Voronoi dual
        // stays sound
        let mut taken: std::collections::HashSet<(u64, u64)> =
            std::collections::HashSet::with_capacity(state.points.len());
        let key = |p: Point2| (p.x.to_bits(), p.y.to_bits());
        for (i, frozen) in state.frozen.iter().enumerate() {
            if *frozen {
                taken.insert(key(state.points[i]));
            }
        }
        for (i, (p, kind)) in treated.into_iter().enumerate() {
            let old = state.points[i];
            let (p, kind) = if state.frozen[i] {
                (old, state.kinds[i])
            } else if taken.insert(key(p)) {
                (p, kind)
            } else if taken.insert(key(old)) {
                (old, state.kinds[i])
            } else {
                // both spots already claimed this round: step off by a hair
                // toward the domain center to break the tie
                let nudged = old + (grid.domain().center() - old) * 1e-12;
                taken.insert(key(nudged));
                (nudged, state.kinds[i])
            };
            state.prev_move[i] = old.dist(p);
            state.points[i] = p;
            state.kinds[i] = kind;
        }

        iterations = iter;
        if !state.triangles.is_empty() {
            let (infos, record) =
                compute_quality(&state.points, &state.triangles).map_err(wrap)?;
            state.history.push(record);
            maybe_add_points(&mut state, &infos, &mut grid, &shape, cfg);
        }
        if cfg.algorithm == Algorithm::Hybrid {
            phase = hybrid_decide(phase, &state, cfg);
        }

        observer(iter, &state);
        if cfg.output_interval > 0 && iter as i64 % cfg.output_interval == 0 {
            write_outputs(&state, &shape, &grid, &cfg.output_dir, &format!("{iter:06}"))?;
        }

        if let Some(t) = check_termination(&state, &grid, cfg) {
            termination = Some(t);
            break;
        }
    }

    // final quality reflects the positions points actually ended at
    let stats = if state.triangles.is_empty() {
        QualityStats::default()
    } else {
        let (infos, _) =
            compute_quality(&state.points, &state.triangles).map_err(ctx(iterations))?;
        QualityStats::from_infos(&infos)
    };
    if cfg.output_interval != 0 {
        write_outputs(&state, &shape, &grid, &cfg.output_dir, "final")?;
        write_stats(&state, &stats, &cfg.output_dir)?;
    }

    Ok((
        state,
        MeshReport {
            iterations,
            triangulations,
            termination,
            stats,
        },
    ))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Write the mesh file and SVG rendering for the current state:
/// `mesh_<tag>.txt` holds a `N_points N_triangles` header, one
/// `x y category` line per point (0 inner, 1 boundary), then one `i j k`
/// line per valid triangle (0-based indices).
pub fn write_outputs(
    state: &MeshState,
    shape: &Shape,
    grid: &GeometryGrid,
    dir: &Path,
    tag: &str,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mesh_path = dir.join(format!("mesh_{tag}.txt"));
    let mut text = String::new();
    writeln!(text, "{} {}", state.points.len(), state.triangles.len()).unwrap();
    for (p, kind) in state.points.iter().zip(&state.kinds) {
        let k = match kind {
            PointKind::Inner => 0,
            PointKind::Boundary => 1,
        };
        writeln!(text, "{} {} {}", p.x, p.y, k).unwrap();
    }
    for t in &state.triangles {
        writeln!(text, "{} {} {}", t[0], t[1], t[2]).unwrap();
    }
    std::fs::write(&mesh_path, text).map_err(io_err(&mesh_path))?;

    let svg_path = dir.join(format!("mesh_{tag}.svg"));
    std::fs::write(&svg_path, render_svg(state, shape, grid.domain()))
        .map_err(io_err(&svg_path))?;
    Ok(())
}

/// Statistics report: per-iteration quality history plus the summary table.
pub fn write_stats(state: &MeshState, stats: &QualityStats, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join("stats.txt");
    let mut text = String::from("# iter half_mean_alpha half_mean_beta max_alpha\n");
    for (i, q) in state.history.iter().enumerate() {
        writeln!(
            text,
            "{} {} {} {}",
            i + 1,
            q.half_alpha,
            q.half_beta,
            q.max_alpha
        )
        .unwrap();
    }
    text.push_str("# summary\n");
    text.push_str(&stats.to_text());
    std::fs::write(&path, text).map_err(io_err(&path))
}

/// Stroke-only SVG of the valid triangles with the input contour overlaid.
fn render_svg(state: &MeshState, shape: &Shape, domain: Rect) -> String {
    let w = domain.width();
    let h = domain.height();
    let stroke = 0.001 * domain.diagonal();
    // flip y so the picture is in the usual orientation
    let fy = |y: f64| domain.ay + domain.by - y;
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{} {} {} {}\">\n",
        domain.ax, domain.ay, w, h
    );
    for t in &state.triangles {
        let a = state.points[t[0] as usize];
        let b = state.points[t[1] as usize];
        let c = state.points[t[2] as usize];
        svg.push_str(&format!(
            "<polygon points=\"{},{} {},{} {},{}\" fill=\"none\" stroke=\"black\" stroke-width=\"{stroke}\"/>\n",
            a.x, fy(a.y), b.x, fy(b.y), c.x, fy(c.y)
        ));
    }
    for seg in shape.collect_segments() {
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"blue\" stroke-width=\"{}\"/>\n",
            seg.p1.x,
            fy(seg.p1.y),
            seg.p2.x,
            fy(seg.p2.y),
            1.5 * stroke
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

/// Points with categories plus triangle index triples, as stored on disk.
pub type MeshFileContents = (Vec<(Point2, PointKind)>, Vec<[u32; 3]>);

/// Read back a mesh file written by [`write_outputs`].
pub fn read_mesh(path: &Path) -> Result<MeshFileContents> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse {
        line: 1,
        msg: "empty mesh file".into(),
    })?;
    let mut it = header.split_whitespace();
    let parse_count = |s: Option<&str>, line: usize| -> Result<usize> {
        s.and_then(|t| t.parse().ok()).ok_or_else(|| Error::Parse {
            line,
            msg: "bad mesh header".into(),
        })
    };
    let np = parse_count(it.next(), 1)?;
    let nt = parse_count(it.next(), 1)?;
    let mut points = Vec::with_capacity(np);
    for k in 0..np {
        let line = lines.next().ok_or_else(|| Error::Parse {
            line: 2 + k,
            msg: "truncated point list".into(),
        })?;
        let vals: Vec<&str> = line.split_whitespace().collect();
        if vals.len() != 3 {
            return Err(Error::Parse {
                line: 2 + k,
                msg: "point line wants `x y category`".into(),
            });
        }
        let x: f64 = vals[0].parse().map_err(|_| Error::Parse {
            line: 2 + k,
            msg: "bad x".into(),
        })?;
        let y: f64 = vals[1].parse().map_err(|_| Error::Parse {
            line: 2 + k,
            msg: "bad y".into(),
        })?;
        let kind = match vals[2] {
            "0" => PointKind::Inner,
            "1" => PointKind::Boundary,
            _ => {
                return Err(Error::Parse {
                    line: 2 + k,
                    msg: "category must be 0 or 1".into(),
                })
            }
        };
        points.push((Point2::new(x, y), kind));
    }
    let mut tris = Vec::with_capacity(nt);
    for k in 0..nt {
        let line = lines.next().ok_or_else(|| Error::Parse {
            line: 2 + np + k,
            msg: "truncated triangle list".into(),
        })?;
        let vals: Vec<u32> = line
            .split_whitespace()
            .map(|t| t.parse::<u32>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Parse {
                line: 2 + np + k,
                msg: "bad triangle index".into(),
            })?;
        if vals.len() != 3 {
            return Err(Error::Parse {
                line: 2 + np + k,
                msg: "triangle line wants `i j k`".into(),
            });
        }
        tris.push([vals[0], vals[1], vals[2]]);
    }
    Ok((points, tris))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::points::QualityRecord;

    #[test]
    fn mesh_file_round_trips_bit_exactly() {
        let dir = std::env::temp_dir().join("mesh2d_roundtrip_test");
        let _ = std::fs::remove_dir_all(&dir);
        let points = vec![
            Point2::new(0.1234567890123456789, 0.987654321),
            Point2::new(1.0 / 3.0, 2.0f64.sqrt()),
            Point2::new(-1e-17, 5e300),
        ];
        let state = MeshState {
            snapshot: points.clone(),
            kinds: vec![PointKind::Inner, PointKind::Boundary, PointKind::Inner],
            frozen: vec![false; 3],
            prev_move: vec![0.0; 3],
            triangles: vec![[0, 1, 2]],
            history: vec![QualityRecord {
                half_alpha: 1.0,
                half_beta: 1.0,
                max_alpha: 1.0,
            }],
            n_total: 3,
            n_init: 3,
            needs_triangulation: false,
            points,
        };
        let shape = Shape::circle(Rect::UNIT, Point2::new(0.5, 0.5), 0.3).unwrap();
        let grid = GeometryGrid::build(&shape, 10, &Config::default()).unwrap();
        write_outputs(&state, &shape, &grid, &dir, "t").unwrap();
        let text = std::fs::read_to_string(dir.join("mesh_t.txt")).unwrap();
        // 1 header + 3 points + 1 triangle = 5 lines
        assert_eq!(text.lines().count(), 5);
        let (points, tris) = read_mesh(&dir.join("mesh_t.txt")).unwrap();
        for ((p, k), (q, kk)) in points.iter().zip(state.points.iter().zip(&state.kinds)) {
            assert_eq!(p.x.to_bits(), q.x.to_bits());
            assert_eq!(p.y.to_bits(), q.y.to_bits());
            assert_eq!(k, kk);
        }
        assert_eq!(tris, state.triangles);
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn empty_triangle_list_still_renders_svg() {
        let state = MeshState {
            points: vec![Point2::new(0.5, 0.5)],
            snapshot: vec![Point2::new(0.5, 0.5)],
            kinds: vec![PointKind::Inner],
            frozen: vec![false],
            prev_move: vec![0.0],
            triangles: Vec::new(),
            history: Vec::new(),
            n_total: 1,
            n_init: 1,
            needs_triangulation: true,
        };
        let shape = Shape::circle(Rect::UNIT, Point2::new(0.5, 0.5), 0.3).unwrap();
        let svg = render_svg(&state, &shape, Rect::UNIT);
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert!(!svg.contains("polygon"));
    }

    #[test]
    fn stats_summary_covers_the_quality_table_columns() {
        let infos = vec![
            TriangleInfo {
                verts: [0, 1, 2],
                alpha: 1.05,
                beta: 1.1,
                r_circum: 1.0,
                r_in: 0.5,
                l_max: 1.0,
                l_min: 0.9,
                circumcenter: Point2::new(0.0, 0.0),
                centroid: Point2::new(0.0, 0.0),
            },
            TriangleInfo {
                verts: [1, 2, 3],
                alpha: 1.5,
                beta: 2.5,
                r_circum: 1.0,
                r_in: 0.4,
                l_max: 1.2,
                l_min: 0.5,
                circumcenter: Point2::new(0.0, 0.0),
                centroid: Point2::new(0.0, 0.0),
            },
        ];
        let stats = QualityStats::from_infos(&infos);
        assert_eq!(stats.n_triangles, 2);
        assert!((stats.median_alpha - 1.275).abs() < 1e-12);
        assert!((stats.mean_alpha - 1.275).abs() < 1e-12);
        assert_eq!(stats.max_alpha, 1.5);
        assert_eq!(stats.max_beta, 2.5);
        assert_eq!(stats.pct_alpha_below_1_2, 50.0);
        assert_eq!(stats.pct_alpha_below_2, 100.0);
        let text = stats.to_text();
        for col in [
            "triangles",
            "median_alpha",
            "mean_alpha",
            "max_alpha",
            "std_alpha",
            "median_beta",
            "mean_beta",
            "max_beta",
            "std_beta",
            "pct_alpha_below_1.2",
            "pct_alpha_below_2",
        ] {
            assert!(text.contains(col), "missing column {col}");
        }
    }
}
