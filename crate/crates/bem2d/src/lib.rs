//! Galerkin boundary elements for the 2D Laplacian on polygonal boundaries:
//! Symm's integral equation with piecewise constants and the stabilized
//! hypersingular equation with continuous piecewise linears, plus the
//! convergence harness measuring local and global error rates.

pub mod acceptance;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod kernels;
pub mod norms;
pub mod operators;
pub mod quadrature;
pub mod solutions;
pub mod solver;

pub use error::{Error, Result};
pub use geometry::{
    canonical_geometry, BoundaryMesh, BoundaryRegion, CanonicalGeometry, Point, Polygon,
};
pub use harness::{
    emit_csv, emit_plot_data, predicted_rates, run_experiment, ConvergenceTable, Equation,
    ExperimentConfig, GeometrySpec,
};
pub use norms::ErrorRecord;
pub use solutions::SingularSolution;
