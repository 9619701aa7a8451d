//! 2D triangular mesh generation on implicit geometry.
//!
//! The library represents shapes as signed distance fields (primitives,
//! boolean combinations, or closed polyline contours), derives an adaptive
//! element sizing field from the geometry, seeds points proportional to the
//! induced density via error-diffusion dithering, and then iteratively
//! improves point positions with one of three algorithms: spring-based force
//! balancing, centroidal-Voronoi (Lloyd) relaxation with adaptive quadrature,
//! or a hybrid of the two. The triangulation itself is obtained each round as
//! the dual of a bounded Voronoi diagram computed cell by cell with half-plane
//! clipping, which parallelizes over points.
//!
//! The `pipeline` module ties everything together behind a [`Config`]; the
//! `mesh` binary is a thin batch front end over it.

pub mod algorithms;
pub mod config;
pub mod error;
pub mod geom;
pub mod grid;
pub mod parallel;
pub mod pipeline;
pub mod points;
pub mod sdf;
pub mod sizing;
pub mod treatment;
pub mod voronoi;

pub use config::{Algorithm, Config, ShapeSpec, SizingSpec};
pub use error::Error;
pub use geom::{Point2, Rect};
pub use grid::{CellKind, GeometryGrid};
pub use pipeline::{run_pipeline, MeshReport};
pub use points::{MeshState, PointKind, TriangleInfo};
pub use sdf::Shape;
pub use sizing::SizingModel;
