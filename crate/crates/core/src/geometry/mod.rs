//! Test domains, their meshes, and continuous extensions of the outward normal.
//!
//! Everything is embedded in the plane: one-dimensional intervals carry a zero
//! second coordinate, so that normals and vector fields have a single type.

mod chart;
mod curve;
mod domain;
mod extension;
mod mesh;
mod mesh_io;
mod partition;

pub use chart::{Chart, ChartGraph};
pub use curve::{ArcLengthTable, BoundaryCurve};
pub use domain::{DomainKind, DomainSpec, LevelSet};
pub use extension::{
    default_extension, extend_normal_charts, extend_normal_closed_form, mollify, square_certificate, BaseField, FieldFn,
    Mollifier, NormalExtension, Provenance, MOLLIFIER_SAFETY_FACTOR,
};
pub use mesh::{build_mesh, build_mesh_with, BoundaryFacet, BoundaryLayer, BoundaryResolution, Mesh, MeshSizing};
pub use mesh_io::{mesh_to_string, read_mesh, write_mesh};
pub use partition::{BoundarySample, InteriorBump, PartitionOfUnity};

use thiserror::Error;

/// A point (or vector) of the plane.
pub type Point = [f64; 2];

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("mesh too coarse: {facets} boundary facets, at least {required} required")]
    TooCoarse { facets: usize, required: usize },
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("no closed-form normal extension for {0} domains; build one with extend_normal_charts")]
    NoClosedForm(DomainKind),
    #[error("{0} domains have no C1 boundary, so no chart description exists")]
    NotC1(DomainKind),
    #[error("invalid chart: {0}")]
    InvalidChart(String),
    #[error("boundary point ({}, {}) is not covered by any chart", .0[0], .0[1])]
    Uncovered(Point),
    #[error("extension does not reproduce the normal: {0}")]
    NotAnExtension(String),
    #[error("mollified field is useless as a certificate: epsilon = {0} >= 1")]
    CertificateUseless(f64),
    #[error("cannot mollify: {0}")]
    CannotMollify(String),
    #[error("mesh file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[inline]
pub(crate) fn add(a: Point, b: Point) -> Point {
    [a[0] + b[0], a[1] + b[1]]
}

#[inline]
pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub(crate) fn scale(a: Point, s: f64) -> Point {
    [a[0] * s, a[1] * s]
}

#[inline]
pub(crate) fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub(crate) fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub(crate) fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

/// Rotate a counterclockwise tangent by -90 degrees and normalize, giving the
/// outward normal of a positively oriented curve.
#[inline]
pub(crate) fn outward_from_tangent(t: Point) -> Point {
    let n = norm(t);
    [t[1] / n, -t[0] / n]
}

/// Quintic smoothstep on [0, 1], clamped outside.
#[inline]
pub(crate) fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * x * (x * (6.0 * x - 15.0) + 10.0)
}
