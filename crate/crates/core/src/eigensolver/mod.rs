//! Minimization of the Rayleigh quotient.

mod lbfgs;
pub mod oracle;
mod precond;
mod problem;

use serde::{Deserialize, Serialize};

pub use oracle::{
    interval_first_integral_oracle, interval_general_p_oracle, interval_p2_oracle, radial_disk_oracle,
    MIN_ORACLE_CELLS, ORACLE_TOLERANCE,
};
pub use problem::{MeshProblem, QuotientProblem, RadialProblem};

use crate::functionals::{Exponent, FunctionalError, ScalarField};
use crate::geometry::{GeometryError, Mesh};

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error("coupling must be finite and non-negative, got {0}")]
    UnsupportedAlpha(f64),
    #[error("couplings must be strictly ascending")]
    NotAscending,
    #[error("initial field has {found} values, mesh has {expected} vertices")]
    WrongLength { expected: usize, found: usize },
    #[error("initial field is zero or not finite")]
    DegenerateStart,
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),
    #[error("factorization failed: {0}")]
    Factorization(String),
    #[error("oracle needs at least {required} cells, got {cells}")]
    OracleGrid { cells: usize, required: usize },
    #[error("invalid oracle input: {0}")]
    InvalidOracle(String),
    #[error(transparent)]
    Functional(#[from] FunctionalError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Starting field of a solve.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initialization {
    /// `exp(-beta s)` with `beta = alpha^(1/(p-1))` and `s` the distance to the boundary.
    #[default]
    ExponentialTrial,
    Constant,
    WarmStart(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub max_iter: usize,
    /// Stop when `|grad Q| <= tolerance * max(1, |Q|)` on the unit-mass field.
    pub tolerance: f64,
    pub contraction: f64,
    pub armijo: f64,
    /// Stored curvature pairs.
    pub memory: usize,
    /// Iterations between refreshes of the preconditioner weights.
    pub refresh_interval: usize,
    pub initialization: Initialization,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iter: 5000,
            tolerance: 1e-8,
            contraction: 0.5,
            armijo: 1e-4,
            memory: 8,
            refresh_interval: 30,
            initialization: Initialization::ExponentialTrial,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: &str| Err(SolverError::InvalidOptions(m.into()));
        if !(self.tolerance > 0.0) {
            return bad("tolerance must be positive");
        }
        if !(self.contraction > 0.0 && self.contraction < 1.0) {
            return bad("contraction must lie in (0, 1)");
        }
        if !(self.armijo > 0.0 && self.armijo < 0.5) {
            return bad("sufficient-decrease constant must lie in (0, 1/2)");
        }
        if self.max_iter == 0 || self.memory == 0 || self.refresh_interval == 0 {
            return bad("iteration counts must be positive");
        }
        Ok(())
    }

    pub fn with_initialization(mut self, init: Initialization) -> Self {
        self.initialization = init;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult {
    pub lambda: f64,
    /// Minimizer with unit volume mass and nonnegative sum.
    pub field: Vec<f64>,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
    pub p: f64,
    pub alpha: f64,
    pub mesh_h: f64,
}

impl SolveResult {
    pub fn scalar_field<'m>(&self, mesh: &'m Mesh) -> Result<ScalarField<'m>, FunctionalError> {
        ScalarField::new(mesh, self.field.clone())
    }

    pub fn record(&self, domain: Option<String>, field_ref: Option<String>) -> SolveRecord {
        SolveRecord {
            lambda: self.lambda,
            iterations: self.iterations,
            converged: self.converged,
            gradient_norm: self.gradient_norm,
            p: self.p,
            alpha: self.alpha,
            mesh_h: self.mesh_h,
            domain,
            field: field_ref,
        }
    }
}

/// Serializable summary of a solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveRecord {
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
    pub p: f64,
    pub alpha: f64,
    pub mesh_h: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

/// Boundary-layer exponent `alpha^(1/(p-1))`.
pub fn layer_exponent(p: Exponent, alpha: f64) -> f64 {
    alpha.powf(1.0 / (p.get() - 1.0))
}

/// Minimize any discrete quotient from the configured initialization.
pub fn solve_problem<P: QuotientProblem + ?Sized>(problem: &P, opts: &SolverOptions) -> Result<SolveResult, SolverError> {
    opts.validate()?;
    let alpha = problem.alpha();
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(SolverError::UnsupportedAlpha(alpha));
    }
    let p = problem.exponent();
    let init = match &opts.initialization {
        Initialization::ExponentialTrial => problem.trial(layer_exponent(p, alpha)),
        Initialization::Constant => vec![1.0; problem.len()],
        Initialization::WarmStart(u) => u.clone(),
    };
    let min = lbfgs::minimize(problem, init, opts)?;
    let mut field = min.field;
    if field.iter().sum::<f64>() < 0.0 {
        field.iter_mut().for_each(|v| *v = -*v);
    }
    Ok(SolveResult {
        lambda: min.quotient,
        field,
        iterations: min.iterations,
        gradient_norm: min.gradient_norm,
        converged: min.converged,
        p: p.get(),
        alpha,
        mesh_h: 0.0,
    })
}

/// Discrete first eigenvalue on `mesh`.
pub fn solve_lambda(mesh: &Mesh, p: Exponent, alpha: f64, opts: &SolverOptions) -> Result<SolveResult, SolverError> {
    let mut r = solve_problem(&MeshProblem { mesh, p, alpha }, opts)?;
    r.mesh_h = mesh.h();
    Ok(r)
}

/// Solves along ascending couplings, each warm-started from the previous minimizer.
pub fn continuation_sweep(
    mesh: &Mesh,
    p: Exponent,
    alphas: &[f64],
    opts: &SolverOptions,
) -> Result<Vec<Result<SolveResult, SolverError>>, SolverError> {
    if alphas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(SolverError::NotAscending);
    }
    let mut out = Vec::with_capacity(alphas.len());
    let mut previous: Option<Vec<f64>> = None;
    for &alpha in alphas {
        let o = match &previous {
            Some(u) => opts.clone().with_initialization(Initialization::WarmStart(u.clone())),
            None => opts.clone(),
        };
        let r = solve_lambda(mesh, p, alpha, &o);
        if let Ok(res) = &r {
            previous = Some(res.field.clone());
        }
        out.push(r);
    }
    Ok(out)
}
