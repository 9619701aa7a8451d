//! Crate-wide error type.

use std::fmt;

#[derive(Debug)]
pub enum Error {
    /// Domain box has non-positive extent.
    DegenerateDomain(String),
    /// A contour shape was queried but holds no segments.
    EmptyContour,
    /// An inner cell received an expected point count of zero.
    ZeroDensityCell(usize),
    /// Fewer than 3 boundary approximation points survived projection.
    ProjectionStarvation(usize),
    /// No medial-axis points remain after trimming.
    EmptyMedialAxis,
    /// A boundary point coincides with the medial axis (lfs underflow).
    DegenerateFeatureSize { point: (f64, f64), lfs: f64 },
    /// ADF query issued for a point outside any boundary cell.
    NotBoundaryCell { x: f64, y: f64 },
    /// Triangle with (numerically) zero area.
    DegenerateTriangle,
    /// Voronoi cell with zero area handed to the centroid quadrature.
    DegenerateCell(usize),
    /// Spring step requested without any valid triangles.
    EmptyTriangulation,
    /// Sphere tracing exceeded its step cap without reaching the boundary.
    NoConvergence,
    /// Damped Newton projection failed to land on the boundary.
    NewtonDiverged,
    /// Config file syntax error.
    Parse { line: usize, msg: String },
    /// Config value out of range.
    Validation(String),
    /// I/O failure, tagged with the offending path.
    Io { path: String, source: std::io::Error },
    /// Error raised inside the meshing loop, tagged with the iteration.
    Pipeline { iteration: usize, source: Box<Error> },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DegenerateDomain(msg) => write!(f, "degenerate domain: {msg}"),
            Error::EmptyContour => write!(f, "contour shape has no segments"),
            Error::ZeroDensityCell(i) => {
                write!(f, "inner cell {i} has zero expected point count")
            }
            Error::ProjectionStarvation(n) => {
                write!(f, "only {n} boundary points survived projection (need >= 3)")
            }
            Error::EmptyMedialAxis => write!(f, "no medial-axis points left after trimming"),
            Error::DegenerateFeatureSize { point, lfs } => write!(
                f,
                "local feature size {lfs:e} at boundary point ({}, {}) is below the floor",
                point.0, point.1
            ),
            Error::NotBoundaryCell { x, y } => {
                write!(f, "point ({x}, {y}) is not in a boundary cell")
            }
            Error::DegenerateTriangle => write!(f, "triangle has zero area"),
            Error::DegenerateCell(i) => write!(f, "voronoi cell of point {i} has zero area"),
            Error::EmptyTriangulation => write!(f, "no valid triangles to build springs from"),
            Error::NoConvergence => write!(f, "sphere tracing exceeded its step cap"),
            Error::NewtonDiverged => write!(f, "newton projection did not reach the boundary"),
            Error::Parse { line, msg } => write!(f, "config parse error at line {line}: {msg}"),
            Error::Validation(msg) => write!(f, "invalid config: {msg}"),
            Error::Io { path, source } => write!(f, "i/o error on {path}: {source}"),
            Error::Pipeline { iteration, source } => {
                write!(f, "meshing iteration {iteration}: {source}")
            }
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            Error::Pipeline { source, .. } => Some(source.as_ref()),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
