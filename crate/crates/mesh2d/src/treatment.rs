//! Correction of proposed point positions: clamp the move, keep points out
//! of outer cells, accept or repair against the boundary. Outside points
//! whose origin was interior are walked back to the boundary crossing by
//! sphere tracing; points that were already on the boundary are re-projected
//! to the nearest boundary point with a damped Newton iteration. Every
//! failure falls back to the old position, so treatment is total.

use crate::config::Config;
use crate::error::{Error, Result};
use crate::geom::{Point2, Rect};
use crate::grid::{CellKind, GeometryGrid};
use crate::points::PointKind;
use crate::sdf::Shape;

/// Keep a position inside the closed domain box. Projections onto material
/// boundaries that coincide with the box edge can overshoot by up to the
/// boundary tolerance; generators must never leave the box.
pub fn clamp_to_domain(p: Point2, domain: Rect) -> Point2 {
    Point2::new(p.x.clamp(domain.ax, domain.bx), p.y.clamp(domain.ay, domain.by))
}

/// March from `p_old` toward `p_new` in steps of `|sdf|` until within `tol`
/// of the boundary. The field magnitude is a safe step for exact distance
/// fields; combined (min/max) fields may overstep, in which case the
/// crossing is recovered by bisection on the bracketing sub-segment.
pub fn sphere_trace(shape: &Shape, p_old: Point2, p_new: Point2, tol: f64) -> Result<Point2> {
    let dir = p_new - p_old;
    let len = dir.norm();
    if len == 0.0 {
        return if shape.sdf(p_old).abs() <= tol {
            Ok(p_old)
        } else {
            Err(Error::NoConvergence)
        };
    }
    let u = dir / len;
    let mut t = 0.0;
    for _ in 0..100 {
        let x = p_old + u * t;
        let d = shape.sdf(x);
        if d.abs() <= tol {
            return Ok(x);
        }
        let t_next = (t + d.abs()).min(len);
        let d_next = shape.sdf(p_old + u * t_next);
        if d_next > tol {
            // overstepped (inexact field) or hit the segment end while still
            // outside: bisect the bracket for the crossing
            let (mut lo, mut hi) = (t, t_next);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                let dm = shape.sdf(p_old + u * mid);
                if dm.abs() <= tol {
                    return Ok(p_old + u * mid);
                }
                if dm > 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Err(Error::NoConvergence);
        }
        if t_next <= t {
            return Err(Error::NoConvergence);
        }
        t = t_next;
    }
    Err(Error::NoConvergence)
}

/// Project `p_new` onto the boundary by damped Newton on
/// `L(p) = [sdf(p), (p - p_new) x grad sdf(p)]`, whose root is the closest
/// boundary point. Derivatives come from finite differences with step
/// `deps`; iteration stops once `|sdf| <= geps` or after `max_steps`.
pub fn newton_project(
    shape: &Shape,
    p_new: Point2,
    geps: f64,
    deps: f64,
    damping: f64,
    max_steps: u32,
) -> Result<Point2> {
    if shape.sdf(p_new).abs() <= geps {
        return Ok(p_new);
    }
    let h = deps;
    let mut p = p_new;
    for _ in 0..max_steps {
        let f = shape.sdf(p);
        let fpx = shape.sdf(Point2::new(p.x + h, p.y));
        let fmx = shape.sdf(Point2::new(p.x - h, p.y));
        let fpy = shape.sdf(Point2::new(p.x, p.y + h));
        let fmy = shape.sdf(Point2::new(p.x, p.y - h));
        let fx = (fpx - fmx) / (2.0 * h);
        let fy = (fpy - fmy) / (2.0 * h);
        let fxx = (fpx - 2.0 * f + fmx) / (h * h);
        let fyy = (fpy - 2.0 * f + fmy) / (h * h);
        let fxy = (shape.sdf(Point2::new(p.x + h, p.y + h))
            - shape.sdf(Point2::new(p.x + h, p.y - h))
            - shape.sdf(Point2::new(p.x - h, p.y + h))
            + shape.sdf(Point2::new(p.x - h, p.y - h)))
            / (4.0 * h * h);
        let rx = p.x - p_new.x;
        let ry = p.y - p_new.y;
        let l1 = f;
        let l2 = rx * fy - ry * fx;
        // jacobian of (l1, l2) with respect to p
        let j00 = fx;
        let j01 = fy;
        let j10 = fy + rx * fxy - ry * fxx;
        let j11 = -fx - ry * fxy + rx * fyy;
        let det = j00 * j11 - j01 * j10;
        if det.abs() < 1e-300 {
            return Err(Error::NewtonDiverged);
        }
        let dx = (l1 * j11 - l2 * j01) / det;
        let dy = (j00 * l2 - j10 * l1) / det;
        p = Point2::new(p.x - damping * dx, p.y - damping * dy);
        if !p.x.is_finite() || !p.y.is_finite() {
            return Err(Error::NewtonDiverged);
        }
        if shape.sdf(p).abs() <= geps {
            return Ok(p);
        }
    }
    if shape.sdf(p).abs() <= geps {
        Ok(p)
    } else {
        Err(Error::NewtonDiverged)
    }
}

/// Turn a proposed position into a final one:
/// 1. clamp the move to the old cell's movement bound,
/// 2. pull the target out of outer cells by bisection along the move,
/// 3. accept inner-cell targets,
/// 4. accept boundary-cell targets that are inside or on the boundary,
/// 5. otherwise repair: sphere tracing for an interior origin, Newton
///    projection for a boundary origin; on failure stay at the old position.
pub fn treat_new_position(
    p_old: Point2,
    cat_old: PointKind,
    p_new: Point2,
    grid: &GeometryGrid,
    shape: &Shape,
    cfg: &Config,
) -> (Point2, PointKind) {
    let mut target = p_new;
    let move_vec = target - p_old;
    let dist = move_vec.norm();
    let t_pt = grid.t_pt(grid.cell_of(p_old));
    if t_pt.is_finite() && dist > t_pt {
        target = p_old + move_vec * (t_pt / dist);
    }

    if grid.kind_at(target) == CellKind::Outer {
        // shrink the move until the target leaves the outer region
        let full = target - p_old;
        let mut lo = 0.0f64;
        let mut hi = 1.0f64;
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            if grid.kind_at(p_old + full * mid) == CellKind::Outer {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        target = p_old + full * lo;
    }

    let target = clamp_to_domain(target, grid.domain());
    let idx = grid.cell_of(target);
    match grid.kind(idx) {
        CellKind::Inner => (target, PointKind::Inner),
        CellKind::Outer => (p_old, cat_old), // bisection start was non-outer; defensive
        CellKind::Boundary => {
            let geps = grid.geps(idx);
            let adf = grid
                .adf(idx)
                .map(|c| c.query(target))
                .unwrap_or_else(|| shape.sdf(target));
            if adf <= geps {
                let cat = if adf.abs() <= geps {
                    PointKind::Boundary
                } else {
                    PointKind::Inner
                };
                return (target, cat);
            }
            let repaired = match cat_old {
                PointKind::Inner => sphere_trace(shape, p_old, target, geps),
                PointKind::Boundary => newton_project(
                    shape,
                    target,
                    geps,
                    grid.deps(idx),
                    cfg.newton_damping,
                    cfg.t_newton_ct,
                ),
            };
            match repaired {
                Ok(p) => (clamp_to_domain(p, grid.domain()), PointKind::Boundary),
                Err(_) => (p_old, cat_old),
            }
        }
    }
}
