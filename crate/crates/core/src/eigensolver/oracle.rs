//! Reference values for the interval and the disk.

use super::problem::RadialProblem;
use super::{solve_lambda, solve_problem, SolverError, SolverOptions};
use crate::functionals::Exponent;
use crate::geometry::{build_mesh, DomainSpec};
use crate::quadrature::SEGMENT_GAUSS4;

/// Smallest grid accepted by the fine-grid oracles.
pub const MIN_ORACLE_CELLS: usize = 10_000;

/// Tolerance used by the fine-grid oracles.
pub const ORACLE_TOLERANCE: f64 = 1e-9;

fn check_coupling(alpha: f64) -> Result<(), SolverError> {
    if alpha.is_finite() && alpha >= 0.0 {
        Ok(())
    } else {
        Err(SolverError::UnsupportedAlpha(alpha))
    }
}

fn check_cells(n: usize) -> Result<(), SolverError> {
    if n < MIN_ORACLE_CELLS {
        return Err(SolverError::OracleGrid { cells: n, required: MIN_ORACLE_CELLS });
    }
    Ok(())
}

fn oracle_options() -> SolverOptions {
    SolverOptions { tolerance: ORACLE_TOLERANCE, max_iter: 5000, ..SolverOptions::default() }
}

/// `-k^2` with `k tanh(kL) = alpha`: the first Robin eigenvalue of `-u''` on `(-L, L)`.
pub fn interval_p2_oracle(half_length: f64, alpha: f64) -> Result<f64, SolverError> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(SolverError::UnsupportedAlpha(alpha));
    }
    if !(half_length > 0.0) {
        return Err(SolverError::InvalidOracle("half-length must be positive".into()));
    }
    let f = |k: f64| k * (k * half_length).tanh() - alpha;
    let (mut lo, mut hi) = (0.0_f64, alpha + 1.0 / half_length);
    while hi - lo > 1e-15 * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let k = 0.5 * (lo + hi);
    Ok(-k * k)
}

/// Fine-grid value on `(-L, L)` with `n` cells, Richardson-extrapolated
/// against the uniformly refined grid.
pub fn interval_general_p_oracle(half_length: f64, p: Exponent, alpha: f64, n: usize) -> Result<f64, SolverError> {
    check_coupling(alpha)?;
    check_cells(n)?;
    if alpha == 0.0 {
        return Ok(0.0);
    }
    let coarse = build_mesh(&DomainSpec::interval(half_length), 2.0 * half_length / n as f64)?;
    let fine = coarse.refine();
    let opts = oracle_options();
    let lc = solve_lambda(&coarse, p, alpha, &opts)?;
    let lf = solve_lambda(&fine, p, alpha, &opts)?;
    Ok((4.0 * lf.lambda - lc.lambda) / 3.0)
}

/// Minimum of the radial quotient on the disk of radius `R` over P1 fields on `n` cells.
pub fn radial_disk_oracle(radius: f64, p: Exponent, alpha: f64, n: usize) -> Result<f64, SolverError> {
    check_coupling(alpha)?;
    check_cells(n)?;
    if !(radius > 0.0) {
        return Err(SolverError::InvalidOracle("radius must be positive".into()));
    }
    if alpha == 0.0 {
        return Ok(0.0);
    }
    let problem = RadialProblem::uniform(radius, n, p, alpha);
    Ok(solve_problem(&problem, &oracle_options())?.lambda)
}

/// `int_0^S m (1 - s^(m-1)) / (1 - s^m) ds` on geometrically graded panels
/// toward the origin, where the integrand is only Hölder.
fn profile_integral(m: f64, upper: f64) -> f64 {
    let f = |s: f64| {
        if s <= 0.0 {
            return m;
        }
        let ls = s.ln();
        m * (-((m - 1.0) * ls).exp_m1()) / (-(m * ls).exp_m1())
    };
    let panel = |a: f64, b: f64| {
        let mut total = 0.0;
        const SUB: usize = 8;
        for j in 0..SUB {
            let (x0, x1) = (a + (b - a) * j as f64 / SUB as f64, a + (b - a) * (j + 1) as f64 / SUB as f64);
            for (t, w) in SEGMENT_GAUSS4 {
                total += w * (x1 - x0) * f(x0 + t * (x1 - x0));
            }
        }
        total
    };
    let mut total = 0.0;
    let mut b = upper;
    for _ in 0..80 {
        total += panel(0.5 * b, b);
        b *= 0.5;
    }
    total + panel(0.0, b)
}

/// First eigenvalue of the one-dimensional p-Laplacian on `(-L, L)` from the
/// first integral `(p - 1)|u'|^p - mu |u|^p = -mu`: with `a = u(L)^(-p)` the
/// half-length satisfies `L = ((p-1)/mu)^(1/p) (-ln a + J(a)) / p`.
pub fn interval_first_integral_oracle(half_length: f64, p: Exponent, alpha: f64) -> Result<f64, SolverError> {
    check_coupling(alpha)?;
    if !(half_length > 0.0) {
        return Err(SolverError::InvalidOracle("half-length must be positive".into()));
    }
    if alpha == 0.0 {
        return Ok(0.0);
    }
    let pv = p.get();
    let m = pv / (pv - 1.0);
    let beta_p = alpha.powf(pv / (pv - 1.0));
    // a = exp(-t); mu = (p - 1) beta^p / (1 - a).
    let residual = |t: f64| {
        let one_minus_a = -(-t).exp_m1();
        let mu = (pv - 1.0) * beta_p / one_minus_a;
        let upper = one_minus_a.powf(1.0 / m);
        ((pv - 1.0) / mu).powf(1.0 / pv) * (t + profile_integral(m, upper)) / pv - half_length
    };
    let mut hi = 1.0;
    while residual(hi) < 0.0 {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(SolverError::InvalidOracle("no bracket for the first integral".into()));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if residual(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    Ok(-(pv - 1.0) * beta_p / -(-t).exp_m1())
}
