//! First Robin p-Laplacian eigenvalue on planar and one-dimensional domains.

pub mod bounds;
pub mod eigensolver;
pub mod functionals;
pub mod geometry;
pub mod harness;
mod quadrature;
