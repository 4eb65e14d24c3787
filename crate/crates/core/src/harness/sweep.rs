use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{CertificateSource, RunConfig, DEFAULT_CHARTS, DEFAULT_SIGMA, MAX_LAYER_METRIC};
use super::HarnessError;
use crate::bounds::{self, BoundsCertificate};
use crate::eigensolver::{continuation_sweep, layer_exponent, solve_lambda, SolveResult, SolverError, SolverOptions};
use crate::functionals::Exponent;
use crate::geometry::{
    build_mesh_with, default_extension, extend_normal_charts, extend_normal_closed_form, mollify, DomainSpec, Mesh,
    MeshSizing, NormalExtension, PartitionOfUnity,
};

/// One coupling of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub alpha: f64,
    #[serde(with = "nullable")]
    pub lambda: f64,
    /// `lambda / alpha^(p/(p-1))`.
    #[serde(with = "nullable")]
    pub ratio: f64,
    pub lower: f64,
    pub upper: f64,
    pub iterations: usize,
    pub converged: bool,
    pub mesh_h: f64,
}

/// Non-finite values travel through JSON as `null`.
mod nullable {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

/// Tolerances attached to a record.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordTolerance {
    /// Layer metric of the mesh at this coupling.
    pub metric: f64,
    pub tol_h: f64,
    /// Geometric slack of the lower bound per unit `1 + alpha`.
    pub tol_geom: f64,
}

impl SweepRecord {
    /// `lower - tol_geom (1 + alpha) <= lambda`.
    pub fn satisfies_lower(&self, tol: &RecordTolerance) -> bool {
        self.lambda >= self.lower - tol.tol_geom * (1.0 + self.alpha)
    }

    /// `lambda <= upper + tol_h`.
    pub fn satisfies_upper(&self, tol: &RecordTolerance) -> bool {
        self.lambda <= self.upper + tol.tol_h
    }
}

/// Records of a sweep together with the mesh and certificate they were computed on.
#[derive(Clone, Debug)]
pub struct Sweep {
    pub records: Vec<SweepRecord>,
    pub tolerances: Vec<RecordTolerance>,
    pub certificate: NormalExtension,
    pub mesh: Mesh,
}

impl Sweep {
    pub fn converged(&self) -> impl Iterator<Item = (&SweepRecord, &RecordTolerance)> {
        self.records.iter().zip(&self.tolerances).filter(|(r, _)| r.converged)
    }
}

const GRADING_ATTEMPTS: usize = 6;

/// Mesh for a sweep with bulk size `h`, optionally graded for the layer of the
/// largest coupling. Refuses meshes whose layer metric exceeds the limit.
pub fn sweep_mesh(domain: &DomainSpec, p: Exponent, alpha_max: f64, h: f64, graded: bool) -> Result<Mesh, HarnessError> {
    let beta = layer_exponent(p, alpha_max);
    let limit = MAX_LAYER_METRIC * (1.0 + 1e-12);
    let mut target = MAX_LAYER_METRIC;
    let mut metric = f64::NAN;
    for _ in 0..GRADING_ATTEMPTS {
        let sizing = if graded { MeshSizing::for_layer(h, beta, target) } else { MeshSizing::uniform(h) };
        let mesh = build_mesh_with(domain, &sizing)?;
        metric = bounds::layer_metric(&mesh, p, alpha_max);
        if metric <= limit {
            return Ok(mesh);
        }
        if !graded {
            break;
        }
        target *= 0.85;
    }
    Err(HarnessError::Unresolved { metric, limit: MAX_LAYER_METRIC })
}

pub fn certificate_for(domain: &DomainSpec, source: &CertificateSource) -> Result<NormalExtension, HarnessError> {
    Ok(match source {
        CertificateSource::Default => default_extension(domain, DEFAULT_CHARTS, DEFAULT_SIGMA)?,
        CertificateSource::ClosedForm => extend_normal_closed_form(domain)?,
        CertificateSource::Charts { charts, sigma } => {
            mollify(&extend_normal_charts(PartitionOfUnity::for_domain(domain, *charts)?)?, *sigma)?
        }
    })
}

fn ratio_scale(p: Exponent, alpha: f64) -> f64 {
    alpha.powf(p.get() / (p.get() - 1.0))
}

/// Solve every coupling of `config`, sorted by coupling. Failed solves are
/// kept as unconverged records with a NaN eigenvalue.
pub fn alpha_sweep(config: &RunConfig) -> Result<Sweep, HarnessError> {
    config.validate()?;
    let p = config.p;
    let mesh = sweep_mesh(&config.domain, p, config.max_alpha(), config.h, config.graded)?;
    let certificate = certificate_for(&config.domain, &config.certificate)?;
    let results = solve_all(&mesh, p, &config.alphas, &config.solver, config.warm)?;
    let mut records = Vec::with_capacity(results.len());
    let mut tolerances = Vec::with_capacity(results.len());
    for (&alpha, result) in config.alphas.iter().zip(results) {
        let cert = BoundsCertificate::new(p, alpha, &certificate)?;
        let metric = bounds::layer_metric(&mesh, p, alpha);
        tolerances.push(RecordTolerance {
            metric,
            tol_h: bounds::tol_h(p, alpha, metric),
            tol_geom: bounds::tol_geom(&mesh, &certificate, p, alpha)?,
        });
        let (lambda, iterations, converged) = match result {
            Ok(r) => (r.lambda, r.iterations, r.converged),
            Err(_) => (f64::NAN, 0, false),
        };
        records.push(SweepRecord {
            alpha,
            lambda,
            ratio: lambda / ratio_scale(p, alpha),
            lower: cert.lower,
            upper: cert.upper,
            iterations,
            converged,
            mesh_h: mesh.h(),
        });
    }
    Ok(Sweep { records, tolerances, certificate, mesh })
}

fn solve_all(
    mesh: &Mesh,
    p: Exponent,
    alphas: &[f64],
    opts: &SolverOptions,
    warm: bool,
) -> Result<Vec<Result<SolveResult, SolverError>>, HarnessError> {
    if warm {
        return Ok(continuation_sweep(mesh, p, alphas, opts)?);
    }
    Ok(alphas.par_iter().map(|&a| solve_lambda(mesh, p, a, opts)).collect())
}

/// `ratio(alpha) = a + b alpha^(-theta)` fitted by least squares.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioFit {
    pub a: f64,
    pub b: f64,
    pub theta: f64,
    /// Root-mean-square residual.
    pub residual: f64,
}

pub const THETA_RANGE: (f64, f64) = (0.05, 3.0);
const THETA_GRID: usize = 296;

fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = my - b * mx;
    let sse = xs.iter().zip(ys).map(|(x, y)| (a + b * x - y).powi(2)).sum();
    (a, b, sse)
}

/// Fit the converged records; `theta` is scanned on a grid over
/// [`THETA_RANGE`] and refined by golden-section search.
pub fn fit_ratio(records: &[SweepRecord]) -> Result<RatioFit, HarnessError> {
    let used: Vec<&SweepRecord> = records.iter().filter(|r| r.converged && r.ratio.is_finite()).collect();
    if used.len() < 3 {
        return Err(HarnessError::InsufficientRecords { found: used.len(), required: 3 });
    }
    let ys: Vec<f64> = used.iter().map(|r| r.ratio).collect();
    let sse = |theta: f64| {
        let xs: Vec<f64> = used.iter().map(|r| r.alpha.powf(-theta)).collect();
        linear_fit(&xs, &ys)
    };
    let step = (THETA_RANGE.1 - THETA_RANGE.0) / (THETA_GRID - 1) as f64;
    let grid = |k: usize| THETA_RANGE.0 + step * k as f64;
    let best = (0..THETA_GRID)
        .min_by(|&i, &j| sse(grid(i)).2.total_cmp(&sse(grid(j)).2))
        .expect("grid is non-empty");
    let (mut lo, mut hi) = (grid(best.saturating_sub(1)), grid((best + 1).min(THETA_GRID - 1)));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut x1, mut x2) = (hi - g * (hi - lo), lo + g * (hi - lo));
    let (mut f1, mut f2) = (sse(x1).2, sse(x2).2);
    for _ in 0..200 {
        if hi - lo <= 1e-13 {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = sse(x1).2;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = sse(x2).2;
        }
    }
    let mut theta = 0.5 * (lo + hi);
    if sse(grid(best)).2 < sse(theta).2 {
        theta = grid(best);
    }
    let (a, b, e) = sse(theta);
    Ok(RatioFit { a, b, theta, residual: (e / ys.len() as f64).sqrt() })
}

/// Required depression of the fitted limit below `1 - p` on the square.
pub const CORNER_MARGIN: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CornerVerdict {
    FailureDemonstrated,
    NotDemonstrated,
    /// Too few converged couplings to fit a limit.
    Unavailable,
}

#[derive(Clone, Debug)]
pub struct CornerDemo {
    pub records: Vec<SweepRecord>,
    pub fit: Option<RatioFit>,
    pub verdict: CornerVerdict,
}

/// Sweep on the square of the given side and compare the fitted limit of
/// the ratio with `1 - p`.
pub fn corner_demo(side: f64, p: f64, alphas: &[f64], h: f64, solver: &SolverOptions) -> Result<CornerDemo, HarnessError> {
    let mut config = RunConfig::new(DomainSpec::square(side), p, alphas.to_vec(), h)?;
    config.solver = solver.clone();
    config.graded = false;
    let sweep = alpha_sweep(&config)?;
    let fit = fit_ratio(&sweep.records).ok();
    let verdict = match fit {
        None => CornerVerdict::Unavailable,
        Some(f) if f.a <= (1.0 - p) - CORNER_MARGIN => CornerVerdict::FailureDemonstrated,
        Some(_) => CornerVerdict::NotDemonstrated,
    };
    Ok(CornerDemo { records: sweep.records, fit, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(alphas: &[f64], f: impl Fn(f64) -> f64) -> Vec<SweepRecord> {
        alphas
            .iter()
            .map(|&alpha| SweepRecord {
                alpha,
                lambda: f(alpha) * alpha * alpha,
                ratio: f(alpha),
                lower: f64::NEG_INFINITY,
                upper: -alpha * alpha,
                iterations: 1,
                converged: true,
                mesh_h: 0.1,
            })
            .collect()
    }

    #[test]
    fn fit_recovers_its_own_model() {
        let recs = synthetic(&[8.0, 16.0, 32.0], |a| -1.0 - 2.0 / a);
        let f = fit_ratio(&recs).unwrap();
        assert!((f.a + 1.0).abs() < 1e-6 && (f.b + 2.0).abs() < 1e-6 && (f.theta - 1.0).abs() < 1e-6, "{f:?}");
        let recs = synthetic(&[2.0, 4.0, 8.0, 16.0, 32.0], |a| -2.0 + 0.5 * a.powf(-0.5));
        let f = fit_ratio(&recs).unwrap();
        assert!((f.a + 2.0).abs() < 1e-6 && (f.theta - 0.5).abs() < 1e-5, "{f:?}");
    }

    #[test]
    fn fit_needs_three_converged_records() {
        let mut recs = synthetic(&[8.0, 16.0, 32.0], |a| -1.0 - 1.0 / a);
        recs[1].converged = false;
        assert!(matches!(fit_ratio(&recs), Err(HarnessError::InsufficientRecords { found: 2, .. })));
    }

    #[test]
    fn single_coupling_gives_no_verdict() {
        let d = corner_demo(1.0, 2.0, &[4.0], 0.04, &SolverOptions::default()).unwrap();
        assert_eq!(d.verdict, CornerVerdict::Unavailable);
        assert_eq!(d.records.len(), 1);
        assert!(d.records[0].ratio < -1.5);
    }

    #[test]
    fn unresolved_layers_are_refused() {
        let p = Exponent::new(2.0).unwrap();
        let ok = sweep_mesh(&DomainSpec::disk(1.0), p, 8.0, 0.2, true).unwrap();
        assert!(bounds::layer_metric(&ok, p, 8.0) <= MAX_LAYER_METRIC);
        let bad = sweep_mesh(&DomainSpec::disk(1.0), p, 8.0, 0.2, false);
        assert!(matches!(bad, Err(HarnessError::Unresolved { .. })));
    }

    #[test]
    fn sweep_records_are_sorted_and_bracketed() {
        let cfg = RunConfig::new(DomainSpec::interval(1.0), 2.0, vec![1.0, 2.0, 4.0], 0.01).unwrap();
        let s = alpha_sweep(&cfg).unwrap();
        assert_eq!(s.records.iter().map(|r| r.alpha).collect::<Vec<_>>(), vec![1.0, 2.0, 4.0]);
        for (r, t) in s.converged() {
            assert!(r.satisfies_lower(t) && r.satisfies_upper(t), "{r:?}");
            assert_eq!(r.ratio, r.lambda / (r.alpha * r.alpha));
        }
        assert_eq!(s.converged().count(), 3);
    }
}
