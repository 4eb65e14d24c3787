use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::domain::{DomainKind, DomainSpec, LevelSet};
use super::partition::PartitionOfUnity;
use super::{dot, norm, sub, GeometryError, Point};

/// Factor applied to sampled suprema when certifying `epsilon` and `c`.
pub const MOLLIFIER_SAFETY_FACTOR: f64 = 1.1;

/// Quadrature points per axis of the mollifier.
const KERNEL_POINTS: usize = 9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Smooth global formula, `epsilon = 0`.
    ClosedForm,
    /// Chart blend before smoothing; continuous but with no divergence bound.
    ChartBlend,
    /// Chart blend convolved with a bump, constants measured by sampling.
    ChartBlendMollified,
    /// Linear field on a square: `mu . nu = 1` on the sides, `|mu| <= sqrt 2`.
    SquareLinear,
}

/// A user-supplied vector field.
pub type FieldFn = Arc<dyn Fn(Point) -> Point + Send + Sync>;

/// The unsmoothed field `mu`.
#[derive(Clone)]
pub enum BaseField {
    /// `(x - center) * inv_scale`, restricted to the first axis when `dim == 1`.
    Linear { center: Point, inv_scale: f64, dim: usize },
    /// `grad g / sqrt(|grad g|^2 + 4k (1 - g))` with `g = |x / semi_axes|^2` and
    /// `k = 1 / max(a^2, b^2)`: smooth, unit on the ellipse and at most one inside.
    Ellipse { center: Point, semi_axes: [f64; 2] },
    Constant(Point),
    /// Partition-of-unity blend of chart normals, extended outside the closed
    /// domain by radial retraction onto the boundary.
    Charts { pu: Arc<PartitionOfUnity>, level: Arc<LevelSet> },
    Custom(FieldFn),
}

impl std::fmt::Debug for BaseField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BaseField::Linear { center, inv_scale, dim } => {
                f.debug_struct("Linear").field("center", center).field("inv_scale", inv_scale).field("dim", dim).finish()
            }
            BaseField::Ellipse { center, semi_axes } => {
                f.debug_struct("Ellipse").field("center", center).field("semi_axes", semi_axes).finish()
            }
            BaseField::Constant(v) => f.debug_tuple("Constant").field(v).finish(),
            BaseField::Charts { pu, .. } => f.debug_struct("Charts").field("charts", &pu.charts().len()).finish(),
            BaseField::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl BaseField {
    pub fn eval(&self, x: Point) -> Point {
        match self {
            BaseField::Linear { center, inv_scale, dim } => {
                let d = sub(x, *center);
                if *dim == 1 {
                    [d[0] * inv_scale, 0.0]
                } else {
                    [d[0] * inv_scale, d[1] * inv_scale]
                }
            }
            BaseField::Ellipse { center, semi_axes } => {
                let (grad, n, _) = ellipse_parts(*center, *semi_axes, x);
                [grad[0] / n, grad[1] / n]
            }
            BaseField::Constant(v) => *v,
            BaseField::Charts { pu, level } => pu.blend(level.retract(x)).0,
            BaseField::Custom(f) => f(x),
        }
    }

    /// Analytic divergence, where one exists.
    pub fn divergence(&self, x: Point) -> Option<f64> {
        match self {
            BaseField::Linear { inv_scale, dim, .. } => Some(*dim as f64 * inv_scale),
            BaseField::Ellipse { center, semi_axes } => {
                let (grad, n, k) = ellipse_parts(*center, *semi_axes, x);
                let h = [2.0 / (semi_axes[0] * semi_axes[0]), 2.0 / (semi_axes[1] * semi_axes[1])];
                let lap = h[0] + h[1];
                let q = (h[0] - 2.0 * k) * grad[0] * grad[0] + (h[1] - 2.0 * k) * grad[1] * grad[1];
                Some(lap / n - q / (n * n * n))
            }
            BaseField::Constant(_) => Some(0.0),
            BaseField::Charts { .. } | BaseField::Custom(_) => None,
        }
    }
}

fn ellipse_parts(center: Point, semi_axes: [f64; 2], x: Point) -> (Point, f64, f64) {
    let d = sub(x, center);
    let (a2, b2) = (semi_axes[0] * semi_axes[0], semi_axes[1] * semi_axes[1]);
    let g = d[0] * d[0] / a2 + d[1] * d[1] / b2;
    let grad = [2.0 * d[0] / a2, 2.0 * d[1] / b2];
    let k = 1.0 / a2.max(b2);
    let n = (dot(grad, grad) + 4.0 * k * (1.0 - g)).sqrt();
    (grad, n, k)
}

/// Convolution with the normalized bump `(1 - |z|^2 / sigma^2)^2` on the disk of
/// radius `sigma`, discretized by a tensor midpoint rule.
#[derive(Clone, Debug)]
pub struct Mollifier {
    sigma: f64,
    offsets: Vec<Point>,
    weights: Vec<f64>,
    gradient_weights: Vec<Point>,
}

impl Mollifier {
    pub fn new(sigma: f64, dim: usize) -> Result<Self, GeometryError> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(GeometryError::CannotMollify(format!("smoothing length must be positive, got {sigma}")));
        }
        let n = KERNEL_POINTS;
        let node = |i: usize| sigma * (-1.0 + (2.0 * i as f64 + 1.0) / n as f64);
        let mut offsets = Vec::new();
        let mut weights = Vec::new();
        let mut grads = Vec::new();
        let ys: Vec<f64> = if dim == 1 { vec![0.0] } else { (0..n).map(node).collect() };
        for &y in &ys {
            for i in 0..n {
                let z = [node(i), y];
                let r2 = dot(z, z) / (sigma * sigma);
                if r2 >= 1.0 {
                    continue;
                }
                let k = (1.0 - r2) * (1.0 - r2);
                let dk = -4.0 * (1.0 - r2) / (sigma * sigma);
                offsets.push(z);
                weights.push(k);
                grads.push([dk * z[0], dk * z[1]]);
            }
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        // Scale each gradient component so that the divergence of x is reproduced exactly.
        let mut moment = [0.0, 0.0];
        for (g, z) in grads.iter().zip(&offsets) {
            moment[0] -= g[0] * z[0];
            moment[1] -= g[1] * z[1];
        }
        let gradient_weights = grads
            .iter()
            .map(|g| [g[0] / moment[0], if dim == 1 { 0.0 } else { g[1] / moment[1] }])
            .collect();
        Ok(Self { sigma, offsets, weights, gradient_weights })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn apply(&self, field: &BaseField, x: Point) -> Point {
        let mut acc = [0.0, 0.0];
        for (z, w) in self.offsets.iter().zip(&self.weights) {
            let v = field.eval(sub(x, *z));
            acc[0] += w * v[0];
            acc[1] += w * v[1];
        }
        acc
    }

    pub fn divergence(&self, field: &BaseField, x: Point) -> f64 {
        self.offsets
            .iter()
            .zip(&self.gradient_weights)
            .map(|(z, g)| dot(*g, field.eval(sub(x, *z))))
            .sum()
    }

    /// Field value and divergence from a single pass over the stencil.
    pub fn apply_with_divergence(&self, field: &BaseField, x: Point) -> (Point, f64) {
        let mut acc = [0.0, 0.0];
        let mut div = 0.0;
        for ((z, w), g) in self.offsets.iter().zip(&self.weights).zip(&self.gradient_weights) {
            let v = field.eval(sub(x, *z));
            acc[0] += w * v[0];
            acc[1] += w * v[1];
            div += dot(*g, v);
        }
        (acc, div)
    }
}

/// A continuous extension `mu` of the outward normal, its smoothed version
/// `mu_eps` and the constants `epsilon >= sup |mu_eps - mu|`, `c >= sup |div mu_eps|`.
#[derive(Clone, Debug)]
pub struct NormalExtension {
    domain: DomainSpec,
    base: BaseField,
    mollifier: Option<Mollifier>,
    epsilon: f64,
    c: f64,
    measured: Option<(f64, f64)>,
    provenance: Provenance,
    safety_factor: f64,
}

impl NormalExtension {
    /// Build an extension from explicit parts; `epsilon` and `c` are taken as given.
    pub fn from_parts(domain: DomainSpec, base: BaseField, epsilon: f64, c: f64, provenance: Provenance) -> Self {
        Self { domain, base, mollifier: None, epsilon, c, measured: None, provenance, safety_factor: 1.0 }
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn base(&self) -> &BaseField {
        &self.base
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn safety_factor(&self) -> f64 {
        self.safety_factor
    }

    pub fn sigma(&self) -> Option<f64> {
        self.mollifier.as_ref().map(Mollifier::sigma)
    }

    /// Sampled `(sup |mu_eps - mu|, sup |div mu_eps|)` before the safety factor.
    pub fn measured(&self) -> Option<(f64, f64)> {
        self.measured
    }

    /// The unsmoothed field `mu`.
    pub fn base_eval(&self, x: Point) -> Point {
        self.base.eval(x)
    }

    /// The smoothed field `mu_eps` (equal to `mu` for closed forms).
    pub fn eval(&self, x: Point) -> Point {
        match &self.mollifier {
            Some(m) => m.apply(&self.base, x),
            None => self.base.eval(x),
        }
    }

    /// `div mu_eps`; `NaN` for the unsmoothed chart blend, which has no divergence bound.
    pub fn divergence(&self, x: Point) -> f64 {
        match &self.mollifier {
            Some(m) => m.divergence(&self.base, x),
            None => self.base.divergence(x).unwrap_or(f64::NAN),
        }
    }

    pub fn eval_with_divergence(&self, x: Point) -> (Point, f64) {
        match &self.mollifier {
            Some(m) => m.apply_with_divergence(&self.base, x),
            None => (self.base.eval(x), self.base.divergence(x).unwrap_or(f64::NAN)),
        }
    }
}

/// Closed-form extension for the interval, the disk and the ellipse.
pub fn extend_normal_closed_form(spec: &DomainSpec) -> Result<NormalExtension, GeometryError> {
    spec.validate()?;
    let (base, c) = match spec {
        DomainSpec::Interval { center, half_length } => {
            (BaseField::Linear { center: [*center, 0.0], inv_scale: 1.0 / half_length, dim: 1 }, 1.0 / half_length)
        }
        DomainSpec::Disk { center, radius } => {
            (BaseField::Linear { center: *center, inv_scale: 1.0 / radius, dim: 2 }, 2.0 / radius)
        }
        DomainSpec::Ellipse { center, semi_axes } => {
            let base = BaseField::Ellipse { center: *center, semi_axes: *semi_axes };
            let step = semi_axes[0].min(semi_axes[1]) / 200.0;
            let sup = spec
                .sample_closed(step)
                .into_iter()
                .map(|x| base.divergence(x).unwrap().abs())
                .fold(0.0, f64::max);
            let c = MOLLIFIER_SAFETY_FACTOR * sup;
            let mut ext = NormalExtension::from_parts(spec.clone(), base, 0.0, c, Provenance::ClosedForm);
            ext.measured = Some((0.0, sup));
            ext.safety_factor = MOLLIFIER_SAFETY_FACTOR;
            return Ok(ext);
        }
        _ => return Err(GeometryError::NoClosedForm(spec.kind())),
    };
    Ok(NormalExtension::from_parts(spec.clone(), base, 0.0, c, Provenance::ClosedForm))
}

/// Certificate for a square of side `S`: `mu = 2 (x - center) / S` has
/// `mu . nu = 1` on every side and `|mu| <= sqrt 2`, so `epsilon = sqrt 2 - 1`
/// and `c = 4 / S`. Valid, but it does not squeeze as `alpha` grows.
pub fn square_certificate(spec: &DomainSpec) -> Result<NormalExtension, GeometryError> {
    let DomainSpec::Square { center, side } = spec else {
        return Err(GeometryError::InvalidDomain(format!("square certificate requested for a {} domain", spec.kind())));
    };
    spec.validate()?;
    let base = BaseField::Linear { center: *center, inv_scale: 2.0 / side, dim: 2 };
    Ok(NormalExtension::from_parts(spec.clone(), base, 2f64.sqrt() - 1.0, 4.0 / side, Provenance::SquareLinear))
}

/// Blend the chart normals through the partition of unity.
///
/// Checks that the result equals the curve normal on boundary samples and has
/// norm at most one on the closed domain.
pub fn extend_normal_charts(pu: PartitionOfUnity) -> Result<NormalExtension, GeometryError> {
    let domain = pu.domain().clone();
    let level = Arc::new(domain.level_set());
    let base = BaseField::Charts { pu: Arc::new(pu), level };
    let BaseField::Charts { pu, .. } = &base else { unreachable!() };
    let step = 0.004 * domain.boundary_measure();
    for s in pu.boundary_samples(step) {
        let mu = base.eval(s.point);
        let err = norm(sub(mu, s.normal));
        if err > 1e-10 {
            return Err(GeometryError::NotAnExtension(format!(
                "|mu - nu| = {err:.3e} at boundary point ({}, {})",
                s.point[0], s.point[1]
            )));
        }
    }
    let (lo, hi) = domain.bounding_box();
    let step = (hi[0] - lo[0]).max(hi[1] - lo[1]) / 150.0;
    for x in domain.sample_closed(step) {
        let m = norm(base.eval(x));
        if m > 1.0 + 1e-10 {
            return Err(GeometryError::NotAnExtension(format!("|mu| = {m} > 1 at ({}, {})", x[0], x[1])));
        }
    }
    Ok(NormalExtension::from_parts(domain, base, 0.0, f64::INFINITY, Provenance::ChartBlend))
}

/// Smooth a field by convolution and certify `epsilon` and `c` by sampling the
/// closed domain on a grid of step `sigma / 4`.
pub fn mollify(field: &NormalExtension, sigma: f64) -> Result<NormalExtension, GeometryError> {
    if field.mollifier.is_some() {
        return Err(GeometryError::CannotMollify("field is already mollified".into()));
    }
    let dim = field.domain.dim();
    let mollifier = Mollifier::new(sigma, dim)?;
    let mut sup_dist = 0.0_f64;
    let mut sup_div = 0.0_f64;
    for x in field.domain.sample_closed(0.25 * sigma) {
        let (v, div) = mollifier.apply_with_divergence(&field.base, x);
        sup_dist = sup_dist.max(norm(sub(v, field.base.eval(x))));
        sup_div = sup_div.max(div.abs());
    }
    let epsilon = MOLLIFIER_SAFETY_FACTOR * sup_dist;
    if epsilon >= 1.0 {
        return Err(GeometryError::CertificateUseless(epsilon));
    }
    let provenance = match field.provenance {
        Provenance::ChartBlend => Provenance::ChartBlendMollified,
        p => p,
    };
    Ok(NormalExtension {
        domain: field.domain.clone(),
        base: field.base.clone(),
        mollifier: Some(mollifier),
        epsilon,
        c: MOLLIFIER_SAFETY_FACTOR * sup_div,
        measured: Some((sup_dist, sup_div)),
        provenance,
        safety_factor: MOLLIFIER_SAFETY_FACTOR,
    })
}

/// Preferred certificate for a domain: the closed form where one exists, the
/// linear square field for the square, and otherwise mollified chart blends
/// with `charts` charts and smoothing length `sigma`.
pub fn default_extension(spec: &DomainSpec, charts: usize, sigma: f64) -> Result<NormalExtension, GeometryError> {
    match spec.kind() {
        DomainKind::Interval | DomainKind::Disk | DomainKind::Ellipse => extend_normal_closed_form(spec),
        DomainKind::Square => square_certificate(spec),
        DomainKind::SmoothedPolygon | DomainKind::RoughDisk => {
            let pu = PartitionOfUnity::for_domain(spec, charts)?;
            mollify(&extend_normal_charts(pu)?, sigma)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_constants() {
        let d = extend_normal_closed_form(&DomainSpec::disk(1.0)).unwrap();
        assert_eq!((d.epsilon(), d.c()), (0.0, 2.0));
        assert_eq!(d.eval([0.3, -0.2]), [0.3, -0.2]);
        let d2 = extend_normal_closed_form(&DomainSpec::disk(2.0)).unwrap();
        assert_eq!(d2.c(), 1.0);
        assert_eq!(d2.eval([1.0, 0.5]), [0.5, 0.25]);
        let i = extend_normal_closed_form(&DomainSpec::interval(1.0)).unwrap();
        assert_eq!((i.epsilon(), i.c()), (0.0, 1.0));
        assert_eq!(i.eval([0.4, 0.0]), [0.4, 0.0]);
    }

    #[test]
    fn closed_form_refuses_charted_kinds() {
        let err = extend_normal_closed_form(&DomainSpec::smoothed_square(1.0, 0.2)).unwrap_err();
        assert!(err.to_string().contains("extend_normal_charts"));
    }

    #[test]
    fn ellipse_field_is_an_extension() {
        let spec = DomainSpec::ellipse(1.4, 0.6);
        let e = extend_normal_closed_form(&spec).unwrap();
        for (x, n) in spec.sample_boundary(0.05) {
            assert!(norm(sub(e.eval(x), n)) < 1e-12);
        }
        for x in spec.sample_closed(0.05) {
            assert!(norm(e.eval(x)) <= 1.0 + 1e-12);
        }
        // Analytic divergence against central differences.
        let h = 1e-6;
        for x in [[0.3, 0.1], [-1.0, 0.2], [0.0, -0.5]] {
            let fd = (e.eval([x[0] + h, x[1]])[0] - e.eval([x[0] - h, x[1]])[0]
                + e.eval([x[0], x[1] + h])[1]
                - e.eval([x[0], x[1] - h])[1])
                / (2.0 * h);
            assert!((fd - e.divergence(x)).abs() < 1e-6);
        }
    }

    #[test]
    fn mollifier_reproduces_linear_and_constant_fields() {
        let m = Mollifier::new(0.3, 2).unwrap();
        let lin = BaseField::Linear { center: [0.0, 0.0], inv_scale: 1.0, dim: 2 };
        let (v, div) = m.apply_with_divergence(&lin, [0.2, -0.7]);
        assert!(norm(sub(v, [0.2, -0.7])) < 1e-14);
        assert!((div - 2.0).abs() < 1e-13);
        let k = BaseField::Constant([0.0, 1.0]);
        let (v, div) = m.apply_with_divergence(&k, [5.0, 1.0]);
        assert!(norm(sub(v, [0.0, 1.0])) < 1e-15);
        assert!(div.abs() < 1e-14);
    }

    #[test]
    fn mollified_disk_keeps_its_constants() {
        let e = mollify(&extend_normal_closed_form(&DomainSpec::disk(1.0)).unwrap(), 0.1).unwrap();
        assert!(e.epsilon() < 1e-13);
        let (_, c) = e.measured().unwrap();
        assert!((c - 2.0).abs() < 1e-12);
    }

    #[test]
    fn oversized_sigma_is_useless() {
        let wiggle: FieldFn = Arc::new(|x: Point| [(40.0 * x[0]).cos(), 0.0]);
        let field = NormalExtension::from_parts(DomainSpec::disk(1.0), BaseField::Custom(wiggle), 0.0, 0.0, Provenance::ClosedForm);
        assert!(matches!(mollify(&field, 0.5), Err(GeometryError::CertificateUseless(_))));
    }

    #[test]
    fn square_certificate_bounds() {
        let s = square_certificate(&DomainSpec::unit_square()).unwrap();
        assert!((s.epsilon() - (2f64.sqrt() - 1.0)).abs() < 1e-15);
        assert_eq!(s.c(), 4.0);
        assert_eq!(s.eval([1.0, 0.5]), [1.0, 0.0]);
        assert!((norm(s.eval([1.0, 1.0])) - 2f64.sqrt()).abs() < 1e-15);
    }
}
