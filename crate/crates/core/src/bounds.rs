//! Explicit upper and lower bounds for the first eigenvalue and the
//! inequalities behind them.

use serde::{Deserialize, Serialize};

use crate::eigensolver::SolveResult;
use crate::functionals::{self, for_each_facet_point, Exponent, FunctionalError, ScalarField};
use crate::geometry::{GeometryError, Mesh, NormalExtension, Point, Provenance};

/// Discretization constant in `tol_h = C * metric * |upper|`.
pub const TOL_H_CONSTANT: f64 = 5.0;

/// Largest layer metric accepted by [`trial_quotient`].
pub const MAX_TRIAL_METRIC: f64 = 0.5;

/// Base geometric slack, relative to the problem scale.
pub const GEOMETRIC_SLACK: f64 = 1e-8;

#[derive(Debug, thiserror::Error)]
pub enum BoundsError {
    #[error("certificate needs epsilon in [0, 1), got {0}")]
    InvalidCertificate(f64),
    #[error("divergence bound must be non-negative, got {0}")]
    InvalidDivergenceBound(f64),
    #[error("coupling must be finite and non-negative, got {0}")]
    UnsupportedAlpha(f64),
    #[error("split parameter must be positive, got {0}")]
    InvalidDelta(f64),
    #[error("boundary layer unresolved: metric {metric:.3} exceeds {limit}")]
    Unresolved { metric: f64, limit: f64 },
    #[error("trial direction must be nonzero")]
    InvalidDirection,
    #[error(transparent)]
    Functional(#[from] FunctionalError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

fn check_alpha(alpha: f64) -> Result<(), BoundsError> {
    if alpha.is_finite() && alpha >= 0.0 {
        Ok(())
    } else {
        Err(BoundsError::UnsupportedAlpha(alpha))
    }
}

fn check_constants(epsilon: f64, c: f64) -> Result<(), BoundsError> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(BoundsError::InvalidCertificate(epsilon));
    }
    if !(c >= 0.0) {
        return Err(BoundsError::InvalidDivergenceBound(c));
    }
    Ok(())
}

/// `p / (p - 1)`.
fn conj(p: Exponent) -> f64 {
    p.get() / (p.get() - 1.0)
}

/// `(1 - p) alpha^(p/(p-1))`.
pub fn upper_bound_value(p: Exponent, alpha: f64) -> f64 {
    (1.0 - p.get()) * alpha.powf(conj(p))
}

/// `(1 - p) ((1+eps)/(1-eps))^(p/(p-1)) alpha^(p/(p-1)) - c alpha / (1 + eps)`.
pub fn lower_bound_value(p: Exponent, alpha: f64, epsilon: f64, c: f64) -> Result<f64, BoundsError> {
    check_alpha(alpha)?;
    check_constants(epsilon, c)?;
    Ok(leading_term(p, alpha, epsilon) - divergence_term(alpha, c, 1.0 + epsilon))
}

/// The same bound with the divergence term divided by `1 - eps`, which is what the
/// trace inequality gives after dividing by its left-hand factor.
pub fn lower_bound_strict(p: Exponent, alpha: f64, epsilon: f64, c: f64) -> Result<f64, BoundsError> {
    check_alpha(alpha)?;
    check_constants(epsilon, c)?;
    Ok(leading_term(p, alpha, epsilon) - divergence_term(alpha, c, 1.0 - epsilon))
}

fn leading_term(p: Exponent, alpha: f64, epsilon: f64) -> f64 {
    let rho = (1.0 + epsilon) / (1.0 - epsilon);
    (1.0 - p.get()) * rho.powf(conj(p)) * alpha.powf(conj(p))
}

fn divergence_term(alpha: f64, c: f64, denominator: f64) -> f64 {
    if alpha == 0.0 {
        0.0
    } else {
        c * alpha / denominator
    }
}

/// Optimal split parameter `((1+eps)/(1-eps) alpha)^(-1/p)`.
pub fn delta_star(p: Exponent, alpha: f64, epsilon: f64) -> Result<f64, BoundsError> {
    check_alpha(alpha)?;
    check_constants(epsilon, 0.0)?;
    Ok(((1.0 + epsilon) / (1.0 - epsilon) * alpha).powf(-1.0 / p.get()))
}

/// `(upper - lower) / alpha^(p/(p-1))`; tends to `(p-1)(((1+eps)/(1-eps))^(p/(p-1)) - 1)`.
pub fn normalized_gap(p: Exponent, alpha: f64, epsilon: f64, c: f64) -> Result<f64, BoundsError> {
    let lower = lower_bound_value(p, alpha, epsilon, c)?;
    Ok((upper_bound_value(p, alpha) - lower) / alpha.powf(conj(p)))
}

/// The two right-hand terms of `a^(p-1) b <= (p-1)/p delta^(-p/(p-1)) a^p + delta^p b^p / p`.
pub fn young_split(a: f64, b: f64, p: Exponent, delta: f64) -> Result<(f64, f64), BoundsError> {
    if !(delta > 0.0) {
        return Err(BoundsError::InvalidDelta(delta));
    }
    let pv = p.get();
    let first = (pv - 1.0) / pv * delta.powf(-conj(p)) * p.pow_abs(a);
    let second = delta.powf(pv) * p.pow_abs(b) / pv;
    Ok((first, second))
}

/// Bounds for one coupling and one normal extension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsCertificate {
    pub p: f64,
    pub alpha: f64,
    #[serde(skip)]
    pub beta: f64,
    pub epsilon: f64,
    pub c: f64,
    pub delta_star: f64,
    pub upper: f64,
    pub lower: f64,
    pub provenance: Provenance,
    pub safety_factor: f64,
}

impl BoundsCertificate {
    pub fn from_constants(
        p: Exponent,
        alpha: f64,
        epsilon: f64,
        c: f64,
        provenance: Provenance,
        safety_factor: f64,
    ) -> Result<Self, BoundsError> {
        let lower = lower_bound_value(p, alpha, epsilon, c)?;
        Ok(Self {
            p: p.get(),
            alpha,
            beta: alpha.powf(1.0 / (p.get() - 1.0)),
            epsilon,
            c,
            delta_star: delta_star(p, alpha, epsilon)?,
            upper: upper_bound_value(p, alpha),
            lower,
            provenance,
            safety_factor,
        })
    }

    pub fn new(p: Exponent, alpha: f64, ext: &NormalExtension) -> Result<Self, BoundsError> {
        Self::from_constants(p, alpha, ext.epsilon(), ext.c(), ext.provenance(), ext.safety_factor())
    }

    pub fn exponent(&self) -> Exponent {
        Exponent::new(self.p).expect("certificate exponent was validated")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate fields are finite")
    }
}

/// Quotient of the interpolated trial field with its discretization tolerance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrialQuotient {
    pub value: f64,
    pub upper: f64,
    /// `max(beta h_normal, sqrt(beta) h_tangential)` on the boundary.
    pub metric: f64,
    pub tol_h: f64,
}

impl TrialQuotient {
    pub fn satisfies_upper_bound(&self) -> bool {
        self.value <= self.upper + self.tol_h
    }
}

/// `tol_h = 5 metric |upper|`.
pub fn tol_h(p: Exponent, alpha: f64, metric: f64) -> f64 {
    TOL_H_CONSTANT * metric * upper_bound_value(p, alpha).abs()
}

/// Layer-resolution metric of `mesh` for coupling `alpha`.
pub fn layer_metric(mesh: &Mesh, p: Exponent, alpha: f64) -> f64 {
    let beta = alpha.powf(1.0 / (p.get() - 1.0));
    mesh.boundary_resolution().layer_metric(beta)
}

/// Quotient of `exp(-beta x . d)` interpolated on `mesh`, `d` the unit `direction`.
pub fn trial_quotient(mesh: &Mesh, p: Exponent, alpha: f64, direction: Point) -> Result<TrialQuotient, BoundsError> {
    check_alpha(alpha)?;
    let n = direction[0].hypot(direction[1]);
    if !(n > 0.0) || !n.is_finite() {
        return Err(BoundsError::InvalidDirection);
    }
    let d = [direction[0] / n, direction[1] / n];
    let metric = layer_metric(mesh, p, alpha);
    if metric > MAX_TRIAL_METRIC {
        return Err(BoundsError::Unresolved { metric, limit: MAX_TRIAL_METRIC });
    }
    let beta = alpha.powf(1.0 / (p.get() - 1.0));
    let s: Vec<f64> = mesh.vertices().iter().map(|x| x[0] * d[0] + x[1] * d[1]).collect();
    let lo = s.iter().cloned().fold(f64::INFINITY, f64::min);
    let field = ScalarField::new(mesh, s.iter().map(|v| (-beta * (v - lo)).exp()).collect())?;
    let value = functionals::rayleigh_quotient(&field, p, alpha)?;
    Ok(TrialQuotient { value, upper: upper_bound_value(p, alpha), metric, tol_h: tol_h(p, alpha, metric) })
}

/// Right-hand side minus left-hand side of
/// `(1-eps) int |u|^p ds <= (1+eps) delta^p int |grad u|^p + (c + (1+eps)(p-1) delta^(-p/(p-1))) int |u|^p`.
pub fn trace_inequality_residual(
    u: &ScalarField,
    ext: &NormalExtension,
    p: Exponent,
    delta: f64,
) -> Result<f64, BoundsError> {
    if !(delta > 0.0) {
        return Err(BoundsError::InvalidDelta(delta));
    }
    let eps = ext.epsilon();
    check_constants(eps, ext.c())?;
    let b = functionals::breakdown(u, p);
    let rhs = (1.0 + eps) * delta.powf(p.get()) * b.dirichlet
        + (ext.c() + (1.0 + eps) * (p.get() - 1.0) * delta.powf(-conj(p))) * b.mass;
    Ok(rhs - (1.0 - eps) * b.boundary)
}

/// Largest shortfall `(1 - eps - mu_eps . nu_h)_+` over the quadrature points of the
/// boundary facets: how much the mesh boundary departs from the certified one.
pub fn normal_defect(mesh: &Mesh, ext: &NormalExtension) -> f64 {
    let mut worst = 0.0_f64;
    for f in mesh.facets() {
        for_each_facet_point(mesh, f.nodes, f.measure, |_, x, _| {
            let mu = ext.eval(x);
            let dot = mu[0] * f.normal[0] + mu[1] * f.normal[1];
            worst = worst.max(1.0 - ext.epsilon() - dot);
        });
    }
    worst.max(0.0)
}

/// Tolerance for [`trace_inequality_residual`] on a mesh field: the defect of the
/// polygonal boundary times the boundary mass, plus a relative slack.
pub fn trace_tolerance(u: &ScalarField, ext: &NormalExtension, p: Exponent) -> f64 {
    let b = functionals::breakdown(u, p);
    normal_defect(u.mesh(), ext) * b.boundary + GEOMETRIC_SLACK * (b.boundary + b.mass + b.dirichlet)
}

/// Geometric tolerance of the lower bound per unit `1 + alpha`: the bound moves
/// from `eps` to `eps + defect` on the polygonal domain.
pub fn tol_geom(mesh: &Mesh, ext: &NormalExtension, p: Exponent, alpha: f64) -> Result<f64, BoundsError> {
    let eps = ext.epsilon();
    let defect = normal_defect(mesh, ext);
    let shifted = (eps + defect).min(1.0 - 1e-12);
    let base = lower_bound_value(p, alpha, eps, ext.c())?;
    let moved = lower_bound_value(p, alpha, shifted, ext.c())?;
    Ok((base - moved) / (1.0 + alpha) + GEOMETRIC_SLACK)
}

/// Outcome of comparing a solve with its certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichVerdict {
    pub holds: bool,
    pub lambda: f64,
    pub lower: f64,
    pub upper: f64,
    pub tol_h: f64,
    /// `lambda - (lower - tol_h)`, non-negative when the lower bound holds.
    pub lower_margin: f64,
    /// `upper + tol_h - lambda`, non-negative when the upper bound holds.
    pub upper_margin: f64,
    pub reason: Option<String>,
}

/// Check `lower - tol_h <= lambda <= upper + tol_h`. The upper comparison uses
/// `extrapolated` when given (a refinement-extrapolated value).
pub fn sandwich_check(
    result: &SolveResult,
    cert: &BoundsCertificate,
    tol_h: f64,
    extrapolated: Option<f64>,
) -> SandwichVerdict {
    let lambda = result.lambda;
    let upper_lambda = extrapolated.unwrap_or(lambda);
    let lower_margin = lambda - (cert.lower - tol_h);
    let upper_margin = cert.upper + tol_h - upper_lambda;
    let mut reason = None;
    if !result.converged {
        reason = Some("solve did not converge".to_string());
    } else if !(lower_margin >= 0.0) {
        reason = Some(format!("lambda {lambda} below lower bound {} by {}", cert.lower, -lower_margin));
    } else if !(upper_margin >= 0.0) {
        reason = Some(format!("lambda {upper_lambda} above upper bound {} by {}", cert.upper, -upper_margin));
    }
    SandwichVerdict {
        holds: reason.is_none(),
        lambda,
        lower: cert.lower,
        upper: cert.upper,
        tol_h,
        lower_margin,
        upper_margin,
        reason,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_mesh, extend_normal_closed_form, DomainSpec};
    use proptest::prelude::*;

    fn ex(p: f64) -> Exponent {
        Exponent::new(p).unwrap()
    }

    #[test]
    fn upper_bound_examples() {
        assert!((upper_bound_value(ex(2.0), 3.0) + 9.0).abs() < 1e-12);
        assert!((upper_bound_value(ex(3.0), 4.0) + 16.0).abs() < 1e-12);
        assert_eq!(upper_bound_value(ex(1.5), 0.0), 0.0);
    }

    #[test]
    fn lower_bound_examples() {
        assert!((lower_bound_value(ex(2.0), 4.0, 0.0, 2.0).unwrap() + 24.0).abs() < 1e-12);
        for a in [0.5, 3.0, 40.0] {
            let l = lower_bound_value(ex(2.5), a, 0.0, 0.0).unwrap();
            assert!((l - upper_bound_value(ex(2.5), a)).abs() < 1e-12 * l.abs());
        }
        // -2 (11/9)^(3/2) 8^(3/2) - 8/1.1, evaluated term by term.
        let lead = -2.0 * (11.0_f64 / 9.0).powf(1.5) * 8.0_f64.powf(1.5);
        let l = lower_bound_value(ex(3.0), 8.0, 0.1, 1.0).unwrap();
        assert!((l - (lead - 8.0 / 1.1)).abs() < 1e-10);
        assert!(matches!(lower_bound_value(ex(2.0), 1.0, 1.0, 0.0), Err(BoundsError::InvalidCertificate(_))));
        assert!(lower_bound_value(ex(2.0), 1.0, 0.2, -1.0).is_err());
    }

    #[test]
    fn strict_bound_is_below_the_stated_one() {
        let a = lower_bound_value(ex(2.0), 8.0, 0.1, 3.0).unwrap();
        let b = lower_bound_strict(ex(2.0), 8.0, 0.1, 3.0).unwrap();
        assert!(b < a);
        let plain = lower_bound_value(ex(2.0), 8.0, 0.0, 3.0).unwrap();
        assert_eq!(lower_bound_strict(ex(2.0), 8.0, 0.0, 3.0).unwrap(), plain);
    }

    #[test]
    fn stated_bound_can_increase_with_epsilon() {
        let p = ex(2.0);
        let a = lower_bound_value(p, 0.1, 0.0, 10.0).unwrap();
        let b = lower_bound_value(p, 0.1, 0.01, 10.0).unwrap();
        assert!(b > a);
    }

    #[test]
    fn delta_star_balances_the_split() {
        let p = ex(3.0);
        let (a, eps) = (8.0, 0.2);
        let d = delta_star(p, a, eps).unwrap();
        assert!(((1.0 + eps) / (1.0 - eps) * d.powf(3.0) * a - 1.0).abs() < 1e-12);
    }

    #[test]
    fn young_split_examples() {
        let (x, y) = young_split(1.0, 1.0, ex(2.0), 1.0).unwrap();
        assert!((x - 0.5).abs() < 1e-15 && (y - 0.5).abs() < 1e-15);
        let (x, y) = young_split(1.0, 0.0, ex(3.0), 0.7).unwrap();
        assert!(x > 0.0 && y == 0.0);
        assert!(young_split(1.0, 1.0, ex(2.0), 0.0).is_err());
    }

    #[test]
    fn certificate_record_has_the_export_fields() {
        let ext = extend_normal_closed_form(&DomainSpec::disk(1.0)).unwrap();
        let cert = BoundsCertificate::new(ex(2.0), 4.0, &ext).unwrap();
        assert_eq!(cert.lower, -24.0);
        assert_eq!(cert.upper, -16.0);
        let v: serde_json::Value = serde_json::from_str(&cert.to_json()).unwrap();
        let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(|k| k.as_str()).collect();
        keys.sort();
        assert_eq!(keys, ["alpha", "c", "delta_star", "epsilon", "lower", "p", "provenance", "safety_factor", "upper"]);
    }

    #[test]
    fn trial_quotient_on_the_unit_interval() {
        let mesh = build_mesh(&DomainSpec::Interval { center: 0.5, half_length: 0.5 }, 1e-4).unwrap();
        let t = trial_quotient(&mesh, ex(2.0), 2.0, [1.0, 0.0]).unwrap();
        let exact = 4.0 - 8.0 / 2.0_f64.tanh();
        assert!((t.value - exact).abs() < 1e-6, "{}", t.value);
        assert!(t.value < -4.0 && t.satisfies_upper_bound());
    }

    #[test]
    fn trial_quotient_refuses_unresolved_layers() {
        let mesh = build_mesh(&DomainSpec::disk(1.0), 0.1).unwrap();
        assert!(matches!(trial_quotient(&mesh, ex(2.0), 8.0, [1.0, 0.0]), Err(BoundsError::Unresolved { .. })));
        assert!(trial_quotient(&mesh, ex(2.0), 1.0, [0.0, 0.0]).is_err());
    }

    #[test]
    fn trial_quotient_small_coupling_tends_to_the_constant() {
        let mesh = build_mesh(&DomainSpec::disk(1.0), 0.1).unwrap();
        let a = 1e-6;
        let t = trial_quotient(&mesh, ex(2.0), a, [1.0, 0.0]).unwrap();
        let constant = -a * mesh.boundary_measure() / mesh.measure();
        assert!(t.value <= 0.0 && (t.value - constant).abs() < 1e-3 * a);
    }

    #[test]
    fn trace_inequality_for_constants() {
        let spec = DomainSpec::unit_square();
        let mesh = build_mesh(&spec, 0.25).unwrap();
        let ext = crate::geometry::square_certificate(&spec).unwrap();
        let p = ex(2.0);
        let one = ScalarField::constant(&mesh, 1.0).unwrap();
        let d = delta_star(p, 4.0, ext.epsilon()).unwrap();
        let r = trace_inequality_residual(&one, &ext, p, d).unwrap();
        let eps = ext.epsilon();
        let expected = ext.c() + (1.0 + eps) * d.powf(-2.0) - (1.0 - eps) * 4.0;
        assert!((r - expected).abs() < 1e-12);
        assert!(r >= 0.0);
        let zero = ScalarField::constant(&mesh, 0.0).unwrap();
        assert_eq!(trace_inequality_residual(&zero, &ext, p, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn geometric_tolerance_vanishes_for_exact_boundaries() {
        let spec = DomainSpec::Interval { center: 0.0, half_length: 1.0 };
        let mesh = build_mesh(&spec, 0.1).unwrap();
        let ext = extend_normal_closed_form(&spec).unwrap();
        assert_eq!(normal_defect(&mesh, &ext), 0.0);
        assert!((tol_geom(&mesh, &ext, ex(2.0), 4.0).unwrap() - GEOMETRIC_SLACK).abs() < 1e-15);
        let disk = DomainSpec::disk(1.0);
        let coarse = build_mesh(&disk, 0.2).unwrap();
        let fine = build_mesh(&disk, 0.1).unwrap();
        let ext = extend_normal_closed_form(&disk).unwrap();
        let (dc, df) = (normal_defect(&coarse, &ext), normal_defect(&fine, &ext));
        assert!(dc > 0.0 && df < 0.5 * dc, "{dc} {df}");
    }

    #[test]
    fn sandwich_examples() {
        let ext = extend_normal_closed_form(&DomainSpec::interval(1.0)).unwrap();
        let cert = BoundsCertificate::new(ex(2.0), 1.0, &ext).unwrap();
        assert_eq!((cert.lower, cert.upper), (-2.0, -1.0));
        let mut r = SolveResult {
            lambda: -1.4392,
            field: vec![],
            iterations: 1,
            gradient_norm: 0.0,
            converged: true,
            p: 2.0,
            alpha: 1.0,
            mesh_h: 0.1,
        };
        assert!(sandwich_check(&r, &cert, 0.0, None).holds);
        r.lambda = -2.1;
        let v = sandwich_check(&r, &cert, 0.0, None);
        assert!(!v.holds && v.lower_margin < 0.0);
        r.lambda = -1.4;
        r.converged = false;
        assert!(!sandwich_check(&r, &cert, 0.0, None).holds);
        let zero = BoundsCertificate::new(ex(2.0), 0.0, &ext).unwrap();
        r.lambda = 0.0;
        r.converged = true;
        assert!(sandwich_check(&r, &zero, 0.0, None).holds);
    }

    #[test]
    fn gap_decreases_towards_its_limit() {
        let p = ex(2.0);
        let (eps, c) = (0.05, 3.0);
        let gaps: Vec<f64> = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0].iter().map(|&a| normalized_gap(p, a, eps, c).unwrap()).collect();
        assert!(gaps.windows(2).all(|w| w[1] < w[0]));
        let limit = (1.05_f64 / 0.95).powi(2) - 1.0;
        assert!(gaps[5] > limit && gaps[5] - limit < c / 32.0 + 1e-12, "{gaps:?}");
    }

    proptest! {
        #[test]
        fn young_inequality_holds(a in 0.0..10.0_f64, b in 0.0..10.0_f64, p in 1.1..6.0_f64, d in 0.05..5.0_f64) {
            let p = ex(p);
            let (x, y) = young_split(a, b, p, d).unwrap();
            let lhs = a.powf(p.get() - 1.0) * b;
            prop_assert!(x + y - lhs >= -1e-12 * (1.0 + lhs));
        }

        #[test]
        fn lower_never_exceeds_upper(p in 1.1..6.0_f64, a in 0.0..100.0_f64, eps in 0.0..0.95_f64, c in 0.0..20.0_f64) {
            let p = ex(p);
            let l = lower_bound_value(p, a, eps, c).unwrap();
            let u = upper_bound_value(p, a);
            prop_assert!(l <= u + 1e-12 * u.abs());
            prop_assert!(a == 0.0 || u < 0.0);
        }

        #[test]
        fn lower_is_monotone_in_the_constants(p in 1.1..6.0_f64, a in 0.1..100.0_f64, eps in 0.0..0.9_f64, de in 0.0..0.05_f64, c in 0.0..20.0_f64, dc in 0.0..5.0_f64) {
            let p = ex(p);
            let base = lower_bound_value(p, a, eps, c).unwrap();
            prop_assert!(lower_bound_value(p, a, eps, c + dc).unwrap() <= base + 1e-12 * base.abs());
            let strict = lower_bound_strict(p, a, eps, c).unwrap();
            prop_assert!(lower_bound_strict(p, a, eps + de, c).unwrap() <= strict + 1e-12 * strict.abs());
            prop_assert!(lower_bound_strict(p, a, eps, c + dc).unwrap() <= strict + 1e-12 * strict.abs());
        }
    }
}
