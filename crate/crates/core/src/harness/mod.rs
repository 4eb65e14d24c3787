//! Sweeps over the coupling, limit fits, the corner experiment and file output.

pub mod checks;
pub mod config;
pub mod emit;
pub mod sweep;

use std::path::{Path, PathBuf};

pub use checks::{run_suite, CheckReport, Suite};
pub use config::{CertificateSource, FlatConfig, RunConfig, DEFAULT_ALPHAS, MAX_LAYER_METRIC, P_RANGE};
pub use emit::{emit, from_csv, from_json, render, to_csv, to_json, Format, CSV_HEADER};
pub use sweep::{
    alpha_sweep, certificate_for, corner_demo, fit_ratio, sweep_mesh, CornerDemo, CornerVerdict, RatioFit,
    RecordTolerance, Sweep, SweepRecord, CORNER_MARGIN,
};

use crate::bounds::BoundsError;
use crate::eigensolver::SolverError;
use crate::functionals::FunctionalError;
use crate::geometry::GeometryError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("boundary layer unresolved: metric {metric:.3} exceeds {limit}")]
    Unresolved { metric: f64, limit: f64 },
    #[error("fit needs {required} converged records, got {found}")]
    InsufficientRecords { found: usize, required: usize },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Functional(#[from] FunctionalError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

impl HarnessError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.to_path_buf(), source }
    }
}

impl From<csv::Error> for HarnessError {
    fn from(e: csv::Error) -> Self {
        HarnessError::Csv(e.to_string())
    }
}
