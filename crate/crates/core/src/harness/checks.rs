//! Seeded property suites behind the `check` command.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::bounds::{delta_star, trace_inequality_residual, trace_tolerance};
use crate::eigensolver::{interval_p2_oracle, solve_lambda, SolverOptions};
use crate::functionals::{divergence_identity_residual, rayleigh_gradient, rayleigh_quotient, Exponent, ScalarField};
use crate::geometry::{build_mesh, default_extension, extend_normal_closed_form, DomainSpec, Mesh};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Gradient,
    Trace,
    Divergence,
    Oracle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub suite: Suite,
    pub seed: u64,
    pub cases: usize,
    pub failures: Vec<String>,
    /// Largest observed value of the suite's error measure.
    pub worst: f64,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn new(suite: Suite, seed: u64) -> Self {
        Self { suite, seed, cases: 0, failures: Vec::new(), worst: 0.0 }
    }

    fn record(&mut self, value: f64, ok: bool, describe: impl FnOnce() -> String) {
        self.cases += 1;
        if value.is_nan() {
            self.worst = f64::NAN;
        } else if !self.worst.is_nan() {
            self.worst = self.worst.max(value);
        }
        if !ok {
            self.failures.push(describe());
        }
    }
}

pub const EXPONENTS: [f64; 3] = [1.5, 2.0, 3.0];
pub const GRADIENT_FIELDS: usize = 20;
pub const GRADIENT_TOLERANCE: f64 = 1e-5;
pub const TRACE_FIELDS: usize = 100;
pub const DIVERGENCE_SLOPE: f64 = 0.9;
/// Residuals below this are at rounding level and carry no rate.
pub const DIVERGENCE_FLOOR: f64 = 1e-12;

pub fn run_suite(suite: Suite, seed: u64) -> Result<CheckReport, HarnessError> {
    match suite {
        Suite::Gradient => gradient_suite(seed),
        Suite::Trace => trace_suite(seed),
        Suite::Divergence => divergence_suite(seed),
        Suite::Oracle => oracle_suite(seed),
    }
}

fn ex(p: f64) -> Exponent {
    Exponent::new(p).expect("suite exponents exceed one")
}

fn random_field<'m>(mesh: &'m Mesh, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> ScalarField<'m> {
    let v = (0..mesh.num_vertices()).map(|_| rng.random_range(lo..hi)).collect();
    ScalarField::new(mesh, v).expect("length matches")
}

/// Central differences against the analytic gradient, in the max norm relative to the gradient.
pub fn finite_difference_error(u: &ScalarField, p: Exponent, alpha: f64) -> Result<f64, HarnessError> {
    let g = rayleigh_gradient(u, p, alpha)?;
    let mesh = u.mesh();
    let mut vals = u.values().to_vec();
    let gmax = g.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut worst = 0.0_f64;
    for i in 0..vals.len() {
        let h = 1e-6 * vals[i].abs().max(1e-3);
        let v0 = vals[i];
        vals[i] = v0 + h;
        let qa = rayleigh_quotient(&ScalarField::new(mesh, vals.clone())?, p, alpha)?;
        vals[i] = v0 - h;
        let qb = rayleigh_quotient(&ScalarField::new(mesh, vals.clone())?, p, alpha)?;
        vals[i] = v0;
        let fd = (qa - qb) / (2.0 * h);
        worst = worst.max((fd - g[i]).abs() / gmax);
    }
    Ok(worst)
}

fn gradient_suite(seed: u64) -> Result<CheckReport, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = CheckReport::new(Suite::Gradient, seed);
    let meshes = [build_mesh(&DomainSpec::interval(1.0), 0.1)?, build_mesh(&DomainSpec::disk(1.0), 0.3)?];
    for mesh in &meshes {
        for p in EXPONENTS {
            for alpha in [0.5, 4.0] {
                for k in 0..GRADIENT_FIELDS {
                    let u = random_field(mesh, &mut rng, 0.5, 1.5);
                    let err = finite_difference_error(&u, ex(p), alpha)?;
                    report.record(err, err <= GRADIENT_TOLERANCE, || {
                        format!("dim {} p {p} alpha {alpha} field {k}: relative error {err:.3e}", mesh.dim())
                    });
                }
            }
        }
    }
    Ok(report)
}

fn trace_suite(seed: u64) -> Result<CheckReport, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = CheckReport::new(Suite::Trace, seed);
    let disk = DomainSpec::disk(1.0);
    let rounded = DomainSpec::smoothed_square(2.0, 0.4);
    let cases = [
        (extend_normal_closed_form(&disk)?, build_mesh(&disk, 0.15)?),
        (default_extension(&rounded, super::config::DEFAULT_CHARTS, super::config::DEFAULT_SIGMA)?, build_mesh(&rounded, 0.15)?),
    ];
    for (ext, mesh) in &cases {
        for p in EXPONENTS {
            let p = ex(p);
            let d = delta_star(p, 4.0, ext.epsilon())?;
            for delta in [d, 0.1 * d] {
                for k in 0..TRACE_FIELDS {
                    let u = random_field(mesh, &mut rng, -1.0, 1.0);
                    let r = trace_inequality_residual(&u, ext, p, delta)?;
                    let tol = trace_tolerance(&u, ext, p);
                    report.record(-r, r >= -tol, || {
                        format!("{} p {p} delta {delta:.4} field {k}: residual {r:.3e} below {:.3e}", ext.domain().kind(), -tol)
                    });
                }
            }
        }
    }
    Ok(report)
}

/// Residuals of the divergence identity for `exp(-x_1)` with `mu = x` on the disk at `h, h/2, h/4`.
pub fn divergence_residuals(p: Exponent, h: f64) -> Result<Vec<(f64, f64)>, HarnessError> {
    let disk = DomainSpec::disk(1.0);
    let ext = extend_normal_closed_form(&disk)?;
    [h, h / 2.0, h / 4.0]
        .iter()
        .map(|&hk| {
            let mesh = build_mesh(&disk, hk)?;
            let u = ScalarField::interpolate(&mesh, |x| (-x[0]).exp())?;
            Ok((mesh.h(), divergence_identity_residual(&u, &ext, p)))
        })
        .collect()
}

/// Smallest log-log slope of consecutive residuals, or `None` when all are at rounding level.
pub fn divergence_slope(residuals: &[(f64, f64)]) -> Option<f64> {
    if residuals.iter().all(|(_, r)| *r <= DIVERGENCE_FLOOR) {
        return None;
    }
    residuals
        .windows(2)
        .map(|w| (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln())
        .min_by(f64::total_cmp)
}

fn divergence_suite(seed: u64) -> Result<CheckReport, HarnessError> {
    let mut report = CheckReport::new(Suite::Divergence, seed);
    for p in EXPONENTS {
        let res = divergence_residuals(ex(p), 0.2)?;
        match divergence_slope(&res) {
            None => report.record(0.0, true, String::new),
            Some(s) => report.record(-s, s >= DIVERGENCE_SLOPE, || format!("p {p}: slope {s:.3} from {res:?}")),
        }
    }
    Ok(report)
}

fn oracle_suite(seed: u64) -> Result<CheckReport, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = CheckReport::new(Suite::Oracle, seed);
    let mesh = build_mesh(&DomainSpec::interval(1.0), 1e-3)?;
    for _ in 0..5 {
        let alpha = rng.random_range(0.5..8.0);
        let r = solve_lambda(&mesh, ex(2.0), alpha, &SolverOptions::default())?;
        let exact = interval_p2_oracle(1.0, alpha)?;
        let rel = ((r.lambda - exact) / exact).abs();
        report.record(rel, r.converged && rel <= 2e-3, || format!("alpha {alpha}: {} vs {exact}", r.lambda));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_pass_and_are_deterministic() {
        for suite in [Suite::Gradient, Suite::Divergence, Suite::Oracle] {
            let a = run_suite(suite, 7).unwrap();
            assert!(a.passed(), "{a:?}");
            assert_eq!(a, run_suite(suite, 7).unwrap());
        }
    }

    #[test]
    fn slope_of_synthetic_residuals() {
        let r = [(0.4, 1e-3), (0.2, 2.5e-4), (0.1, 6.25e-5)];
        assert!((divergence_slope(&r).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(divergence_slope(&[(0.4, 1e-15), (0.2, 1e-14)]), None);
    }
}
