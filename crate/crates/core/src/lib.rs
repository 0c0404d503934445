//! Adaptive hybrid high-order methods for convex minimization problems with
//! `p`-growth on triangulations of planar domains.
//!
//! Numerical code is generic over the scalar type [`Real`] (`f32` or `f64`);
//! the aliases below fix `f64`, which the benchmarks and the CLI use.

pub mod adaptivity;
pub mod benchmarks;
pub mod companion;
pub mod densities;
pub mod diagnostics;
pub mod hho;
pub mod linalg;
pub mod mesh;
pub mod poly;
pub mod real;
pub mod solver;

pub use real::Real;

pub type Mesh = mesh::Triangulation<f64>;
pub type Space = hho::HhoSpace<f64>;
pub type Problem = solver::DiscreteProblem<f64>;
