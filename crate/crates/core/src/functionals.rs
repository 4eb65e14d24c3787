//! The integrals of the Rayleigh quotient for P1 fields, their first variation,
//! and the discrete divergence identity.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Mesh, NormalExtension, Point};
use crate::quadrature::{SEGMENT_GAUSS3, SEGMENT_GAUSS4, TRIANGLE_D4};

/// Mass below which a field counts as zero.
pub const DEGENERATE_MASS: f64 = 1e-300;

/// Largest change of the flux `|g|^(p-1)`, relative to its maximum, caused by
/// the gradient regularization used for `p < 2`.
pub const GRADIENT_REGULARIZATION: f64 = 1e-12;

/// Squared regularization `eta^2` of `(|g|^2 + eta^2)^((p-2)/2)` for `p < 2`,
/// with `eta^(p-1) = GRADIENT_REGULARIZATION gmax^(p-1)`.
pub(crate) fn regularization_floor(p: f64, gmax: f64) -> f64 {
    if p >= 2.0 {
        return 0.0;
    }
    (gmax * GRADIENT_REGULARIZATION.powf(1.0 / (p - 1.0))).powi(2)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FunctionalError {
    #[error("exponent p must be a finite number greater than 1, got {0}")]
    InvalidExponent(f64),
    #[error("field has {found} coefficients but the mesh has {expected} vertices")]
    WrongLength { expected: usize, found: usize },
    #[error("field coefficient {0} is not finite")]
    NonFinite(usize),
    #[error("field is numerically zero (mass {0:e})")]
    Degenerate(f64),
    #[error("field was exported for mesh {expected}, not {found}")]
    ChecksumMismatch { expected: String, found: String },
    #[error("cannot parse field: {0}")]
    Parse(String),
}

/// The exponent `p > 1`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Exponent(f64);

impl Exponent {
    pub fn new(p: f64) -> Result<Self, FunctionalError> {
        if p.is_finite() && p > 1.0 {
            Ok(Self(p))
        } else {
            Err(FunctionalError::InvalidExponent(p))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }

    /// Conjugate exponent `p / (p - 1)`.
    pub fn conjugate(self) -> f64 {
        self.0 / (self.0 - 1.0)
    }

    /// `|x|^p`, with fast paths for the common exponents.
    #[inline]
    pub fn pow_abs(self, x: f64) -> f64 {
        let a = x.abs();
        if self.0 == 2.0 {
            a * a
        } else if self.0 == 3.0 {
            a * a * a
        } else if self.0 == 1.5 {
            a * a.sqrt()
        } else {
            a.powf(self.0)
        }
    }

    /// `|x|^(p-2) x`, the derivative of `|x|^p / p`.
    #[inline]
    pub fn dual(self, x: f64) -> f64 {
        if self.0 == 2.0 {
            x
        } else if self.0 == 3.0 {
            x * x.abs()
        } else if self.0 == 1.5 {
            x.signum() * x.abs().sqrt()
        } else {
            x.signum() * x.abs().powf(self.0 - 1.0)
        }
    }
}

impl TryFrom<f64> for Exponent {
    type Error = FunctionalError;
    fn try_from(p: f64) -> Result<Self, Self::Error> {
        Exponent::new(p)
    }
}

impl From<Exponent> for f64 {
    fn from(p: Exponent) -> f64 {
        p.0
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Vertex values of a piecewise-linear function on a mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField<'m> {
    mesh: &'m Mesh,
    values: Vec<f64>,
}

impl<'m> ScalarField<'m> {
    pub fn new(mesh: &'m Mesh, values: Vec<f64>) -> Result<Self, FunctionalError> {
        if values.len() != mesh.num_vertices() {
            return Err(FunctionalError::WrongLength { expected: mesh.num_vertices(), found: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(FunctionalError::NonFinite(i));
        }
        Ok(Self { mesh, values })
    }

    /// Interpolate a function at the vertices.
    pub fn interpolate(mesh: &'m Mesh, f: impl Fn(Point) -> f64) -> Result<Self, FunctionalError> {
        Self::new(mesh, mesh.vertices().iter().map(|&x| f(x)).collect())
    }

    pub fn constant(mesh: &'m Mesh, c: f64) -> Result<Self, FunctionalError> {
        Self::new(mesh, vec![c; mesh.num_vertices()])
    }

    pub fn mesh(&self) -> &'m Mesh {
        self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self { mesh: self.mesh, values: self.values.iter().map(|v| v * t).collect() }
    }

    /// Plain-text export: a `# mesh <checksum>` header, then one value per line.
    pub fn export(&self) -> String {
        let mut s = format!("# mesh {}\n", self.mesh.checksum());
        for v in &self.values {
            s.push_str(&format!("{v:.16e}\n"));
        }
        s
    }

    pub fn import(mesh: &'m Mesh, text: &str) -> Result<Self, FunctionalError> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| FunctionalError::Parse("empty input".into()))?;
        let found = header
            .strip_prefix("# mesh ")
            .ok_or_else(|| FunctionalError::Parse("missing `# mesh` header".into()))?
            .trim();
        let expected = mesh.checksum();
        if found != expected {
            return Err(FunctionalError::ChecksumMismatch { expected: found.to_owned(), found: expected });
        }
        let values = lines
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.trim().parse::<f64>().map_err(|_| FunctionalError::Parse(format!("bad value `{l}`"))))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(mesh, values)
    }
}

/// The three integrals of the quotient.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalBreakdown {
    pub dirichlet: f64,
    pub boundary: f64,
    pub mass: f64,
}

impl FunctionalBreakdown {
    pub fn quotient(&self, alpha: f64) -> f64 {
        (self.dirichlet - alpha * self.boundary) / self.mass
    }
}

/// Gradient of a P1 field on cell `k`.
#[inline]
pub(crate) fn cell_gradient(mesh: &Mesh, k: usize, u: &[f64]) -> Point {
    let mut g = [0.0, 0.0];
    for (&i, d) in mesh.cell(k).iter().zip(mesh.basis_gradients(k)) {
        g[0] += u[i] * d[0];
        g[1] += u[i] * d[1];
    }
    g
}

/// Physical location and weight (including the measure) of every volume
/// quadrature point of cell `k`, with the barycentric coordinates.
#[inline]
pub(crate) fn for_each_volume_point(mesh: &Mesh, k: usize, mut f: impl FnMut(&[f64], Point, f64)) {
    let cell = mesh.cell(k);
    let v = mesh.vertices();
    let m = mesh.cell_measure(k);
    if mesh.dim() == 1 {
        let (a, b) = (v[cell[0]], v[cell[1]]);
        for (t, w) in SEGMENT_GAUSS3 {
            let x = [a[0] + t * (b[0] - a[0]), 0.0];
            f(&[1.0 - t, t], x, w * m);
        }
    } else {
        let (a, b, c) = (v[cell[0]], v[cell[1]], v[cell[2]]);
        for (l, w) in TRIANGLE_D4 {
            let x = [l[0] * a[0] + l[1] * b[0] + l[2] * c[0], l[0] * a[1] + l[1] * b[1] + l[2] * c[1]];
            f(&l, x, w * m);
        }
    }
}

/// Same for the boundary facets: barycentric pair, location, weight.
#[inline]
pub(crate) fn for_each_facet_point(mesh: &Mesh, nodes: [usize; 2], measure: f64, mut f: impl FnMut([f64; 2], Point, f64)) {
    let v = mesh.vertices();
    if mesh.dim() == 1 {
        f([1.0, 0.0], v[nodes[0]], measure);
        return;
    }
    let (a, b) = (v[nodes[0]], v[nodes[1]]);
    for (t, w) in SEGMENT_GAUSS4 {
        f([1.0 - t, t], [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])], w * measure);
    }
}

pub fn dirichlet_energy(u: &ScalarField, p: Exponent) -> f64 {
    dirichlet_raw(u.mesh, &u.values, p)
}

pub fn boundary_mass(u: &ScalarField, p: Exponent) -> f64 {
    boundary_raw(u.mesh, &u.values, p)
}

pub fn volume_mass(u: &ScalarField, p: Exponent) -> f64 {
    mass_raw(u.mesh, &u.values, p)
}

pub fn breakdown(u: &ScalarField, p: Exponent) -> FunctionalBreakdown {
    FunctionalBreakdown {
        dirichlet: dirichlet_energy(u, p),
        boundary: boundary_mass(u, p),
        mass: volume_mass(u, p),
    }
}

pub fn rayleigh_quotient(u: &ScalarField, p: Exponent, alpha: f64) -> Result<f64, FunctionalError> {
    let b = breakdown(u, p);
    if !(b.mass > DEGENERATE_MASS) {
        return Err(FunctionalError::Degenerate(b.mass));
    }
    Ok(b.quotient(alpha))
}

/// Derivative of the quotient with respect to the vertex values.
pub fn rayleigh_gradient(u: &ScalarField, p: Exponent, alpha: f64) -> Result<Vec<f64>, FunctionalError> {
    let mut grad = vec![0.0; u.values.len()];
    let mut dmass = vec![0.0; u.values.len()];
    let (b, _) = evaluate(u.mesh, &u.values, p, alpha, Some((&mut grad, &mut dmass)));
    if !(b.mass > DEGENERATE_MASS) {
        return Err(FunctionalError::Degenerate(b.mass));
    }
    Ok(grad)
}

pub(crate) fn dirichlet_raw(mesh: &Mesh, u: &[f64], p: Exponent) -> f64 {
    (0..mesh.num_cells())
        .map(|k| {
            let g = cell_gradient(mesh, k, u);
            if p.get() == 2.0 {
                (g[0] * g[0] + g[1] * g[1]) * mesh.cell_measure(k)
            } else {
                p.pow_abs(g[0].hypot(g[1])) * mesh.cell_measure(k)
            }
        })
        .sum()
}

pub(crate) fn mass_raw(mesh: &Mesh, u: &[f64], p: Exponent) -> f64 {
    let mut total = 0.0;
    for k in 0..mesh.num_cells() {
        let cell = mesh.cell(k);
        for_each_volume_point(mesh, k, |l, _, w| {
            let val: f64 = cell.iter().zip(l).map(|(&i, li)| u[i] * li).sum();
            total += w * p.pow_abs(val);
        });
    }
    total
}

pub(crate) fn boundary_raw(mesh: &Mesh, u: &[f64], p: Exponent) -> f64 {
    let mut total = 0.0;
    for f in mesh.facets() {
        for_each_facet_point(mesh, f.nodes, f.measure, |l, _, w| {
            total += w * p.pow_abs(l[0] * u[f.nodes[0]] + l[1] * u[f.nodes[1]]);
        });
    }
    total
}

/// Integrals and, optionally, the gradients of the quotient and of the mass in
/// one pass. Returns the breakdown and the quotient (`NaN` for a degenerate field).
pub(crate) fn evaluate(
    mesh: &Mesh,
    u: &[f64],
    p: Exponent,
    alpha: f64,
    grads: Option<(&mut [f64], &mut [f64])>,
) -> (FunctionalBreakdown, f64) {
    let Some((grad, d_mass)) = grads else {
        let b = FunctionalBreakdown {
            dirichlet: dirichlet_raw(mesh, u, p),
            boundary: boundary_raw(mesh, u, p),
            mass: mass_raw(mesh, u, p),
        };
        let q = if b.mass > DEGENERATE_MASS { b.quotient(alpha) } else { f64::NAN };
        return (b, q);
    };
    let n = u.len();
    let pv = p.get();
    let mut d_dir = vec![0.0; n];
    let mut d_bnd = vec![0.0; n];
    d_mass.iter_mut().for_each(|v| *v = 0.0);
    let mut dirichlet = 0.0;
    let mut mass = 0.0;
    let mut boundary = 0.0;

    let mut eta2 = 0.0;
    if pv < 2.0 {
        let mut gmax = 0.0_f64;
        for k in 0..mesh.num_cells() {
            let g = cell_gradient(mesh, k, u);
            gmax = gmax.max(g[0].hypot(g[1]));
        }
        eta2 = regularization_floor(pv, gmax);
    }
    for k in 0..mesh.num_cells() {
        let cell = mesh.cell(k);
        let m = mesh.cell_measure(k);
        let g = cell_gradient(mesh, k, u);
        let g2 = g[0] * g[0] + g[1] * g[1];
        let flux = if pv == 2.0 {
            dirichlet += g2 * m;
            2.0
        } else if g2 + eta2 > 0.0 {
            dirichlet += p.pow_abs(g2.sqrt()) * m;
            pv * (g2 + eta2).powf(0.5 * (pv - 2.0))
        } else {
            0.0
        };
        for (&i, d) in cell.iter().zip(mesh.basis_gradients(k)) {
            d_dir[i] += flux * (g[0] * d[0] + g[1] * d[1]) * m;
        }
        for_each_volume_point(mesh, k, |l, _, w| {
            let val: f64 = cell.iter().zip(l).map(|(&i, li)| u[i] * li).sum();
            mass += w * p.pow_abs(val);
            let dv = pv * p.dual(val) * w;
            for (&i, li) in cell.iter().zip(l) {
                d_mass[i] += dv * li;
            }
        });
    }
    for f in mesh.facets() {
        let [a, b] = f.nodes;
        for_each_facet_point(mesh, f.nodes, f.measure, |l, _, w| {
            let val = l[0] * u[a] + l[1] * u[b];
            boundary += w * p.pow_abs(val);
            let dv = pv * p.dual(val) * w;
            d_bnd[a] += dv * l[0];
            if b != a {
                d_bnd[b] += dv * l[1];
            }
        });
    }
    let b = FunctionalBreakdown { dirichlet, boundary, mass };
    if !(mass > DEGENERATE_MASS) {
        grad.iter_mut().for_each(|g| *g = f64::NAN);
        return (b, f64::NAN);
    }
    let q = b.quotient(alpha);
    for i in 0..n {
        grad[i] = (d_dir[i] - alpha * d_bnd[i] - q * d_mass[i]) / mass;
    }
    (b, q)
}

/// Absolute residual of the divergence identity for `|u|^p mu_eps` on the mesh:
/// boundary flux through the facets minus the volume integral of the divergence.
pub fn divergence_identity_residual(u: &ScalarField, ext: &NormalExtension, p: Exponent) -> f64 {
    let mesh = u.mesh;
    let vals = &u.values;
    let pv = p.get();
    let mut flux = 0.0;
    for f in mesh.facets() {
        for_each_facet_point(mesh, f.nodes, f.measure, |l, x, w| {
            let v = l[0] * vals[f.nodes[0]] + l[1] * vals[f.nodes[1]];
            let mu = ext.eval(x);
            flux += w * p.pow_abs(v) * (mu[0] * f.normal[0] + mu[1] * f.normal[1]);
        });
    }
    let mut volume = 0.0;
    for k in 0..mesh.num_cells() {
        let cell = mesh.cell(k);
        let g = cell_gradient(mesh, k, vals);
        for_each_volume_point(mesh, k, |l, x, w| {
            let v: f64 = cell.iter().zip(l).map(|(&i, li)| vals[i] * li).sum();
            let (mu, div) = ext.eval_with_divergence(x);
            volume += w * (pv * p.dual(v) * (g[0] * mu[0] + g[1] * mu[1]) + p.pow_abs(v) * div);
        });
    }
    (flux - volume).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_mesh, extend_normal_closed_form, BaseField, DomainSpec, Provenance};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn p(v: f64) -> Exponent {
        Exponent::new(v).unwrap()
    }

    #[test]
    fn exponent_rejects_p_at_most_one() {
        assert!(Exponent::new(1.0).is_err());
        assert!(Exponent::new(f64::NAN).is_err());
        assert!(Exponent::new(1.5).is_ok());
    }

    #[test]
    fn linear_field_on_unit_square() {
        let m = build_mesh(&DomainSpec::unit_square(), 0.25).unwrap();
        let u = ScalarField::interpolate(&m, |x| x[0]).unwrap();
        assert!((dirichlet_energy(&u, p(2.0)) - 1.0).abs() < 1e-13);
        assert!((dirichlet_energy(&u, p(3.0)) - 1.0).abs() < 1e-13);
        let one = ScalarField::constant(&m, 1.0).unwrap();
        assert_eq!(dirichlet_energy(&one, p(2.5)), 0.0);
        assert!((boundary_mass(&one, p(2.0)) - 4.0).abs() < 1e-14);
        assert!((volume_mass(&one, p(1.7)) - 1.0).abs() < 1e-14);
        let two = ScalarField::constant(&m, 2.0).unwrap();
        assert!((boundary_mass(&two, p(2.0)) - 16.0).abs() < 1e-13);
        assert!((rayleigh_quotient(&one, p(3.0), 2.5).unwrap() + 10.0).abs() < 1e-13);
    }

    #[test]
    fn octagon_perimeter() {
        let m = build_mesh(&DomainSpec::disk(1.0), 2.0 * PI / 8.0).unwrap();
        let one = ScalarField::constant(&m, 1.0).unwrap();
        assert!((boundary_mass(&one, p(2.0)) - 16.0 * (PI / 8.0).sin()).abs() < 1e-13);
    }

    #[test]
    fn interval_quadratic_mass() {
        let m = build_mesh(&DomainSpec::Interval { center: 0.5, half_length: 0.5 }, 1e-2).unwrap();
        let u = ScalarField::interpolate(&m, |x| x[0]).unwrap();
        assert!((volume_mass(&u, p(2.0)) - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn trial_quotient_on_unit_interval() {
        // (0, 1) with u = exp(-2x): value 4 - 8 coth 2 in the continuum.
        let m = build_mesh(&DomainSpec::Interval { center: 0.5, half_length: 0.5 }, 1e-4).unwrap();
        let u = ScalarField::interpolate(&m, |x| (-2.0 * x[0]).exp()).unwrap();
        let exact = 4.0 - 8.0 / 2f64.tanh();
        assert!((rayleigh_quotient(&u, p(2.0), 2.0).unwrap() - exact).abs() < 1e-6);
    }

    #[test]
    fn zero_field_is_degenerate() {
        let m = build_mesh(&DomainSpec::unit_square(), 0.5).unwrap();
        let z = ScalarField::constant(&m, 0.0).unwrap();
        assert!(matches!(rayleigh_quotient(&z, p(2.0), 1.0), Err(FunctionalError::Degenerate(_))));
        assert!(ScalarField::new(&m, vec![1.0]).is_err());
        let mut v = vec![1.0; m.num_vertices()];
        v[2] = f64::INFINITY;
        assert!(matches!(ScalarField::new(&m, v), Err(FunctionalError::NonFinite(2))));
    }

    #[test]
    fn neumann_ground_state_is_stationary() {
        let m = build_mesh(&DomainSpec::disk(1.0), 0.2).unwrap();
        let one = ScalarField::constant(&m, 1.0).unwrap();
        let g = rayleigh_gradient(&one, p(2.0), 0.0).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn gradient_matches_finite_differences_on_interval() {
        let m = build_mesh(&DomainSpec::interval(1.0), 0.25).unwrap();
        let vals: Vec<f64> = (0..m.num_vertices()).map(|i| 1.0 + 0.3 * ((i * 7 % 5) as f64) - 0.4).collect();
        let u = ScalarField::new(&m, vals.clone()).unwrap();
        let g = rayleigh_gradient(&u, p(3.0), 1.0).unwrap();
        for i in 0..vals.len() {
            let h = 1e-6;
            let mut a = vals.clone();
            let mut b = vals.clone();
            a[i] += h;
            b[i] -= h;
            let qa = rayleigh_quotient(&ScalarField::new(&m, a).unwrap(), p(3.0), 1.0).unwrap();
            let qb = rayleigh_quotient(&ScalarField::new(&m, b).unwrap(), p(3.0), 1.0).unwrap();
            let fd = (qa - qb) / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-6 * g[i].abs().max(1e-3), "{i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn divergence_identity_on_square() {
        let m = build_mesh(&DomainSpec::unit_square(), 0.1).unwrap();
        let u = ScalarField::interpolate(&m, |x| x[0] + 2.0).unwrap();
        let ext = NormalExtension::from_parts(
            DomainSpec::unit_square(),
            BaseField::Linear { center: [0.0, 0.0], inv_scale: 1.0, dim: 1 },
            0.0,
            1.0,
            Provenance::ClosedForm,
        );
        assert!(divergence_identity_residual(&u, &ext, p(2.0)) < 1e-12);
        let one = ScalarField::constant(&m, 1.0).unwrap();
        let disk = extend_normal_closed_form(&DomainSpec::disk(1.0)).unwrap();
        assert!(divergence_identity_residual(&one, &disk, p(1.5)) < 1e-12);
    }

    #[test]
    fn field_export_round_trip() {
        let m = build_mesh(&DomainSpec::disk(1.0), 0.3).unwrap();
        let u = ScalarField::interpolate(&m, |x| (x[0] * 3.0).sin()).unwrap();
        let back = ScalarField::import(&m, &u.export()).unwrap();
        assert_eq!(back, u);
        let other = build_mesh(&DomainSpec::disk(1.0), 0.25).unwrap();
        assert!(matches!(ScalarField::import(&other, &u.export()), Err(FunctionalError::ChecksumMismatch { .. })));
    }

    proptest! {
        #[test]
        fn integrals_are_p_homogeneous(seed in 0u64..1000, pv in 1.2f64..4.0, t in 0.1f64..5.0) {
            let m = build_mesh(&DomainSpec::ellipse(1.2, 0.7), 0.3).unwrap();
            let vals: Vec<f64> = (0..m.num_vertices()).map(|i| ((i as u64 * 31 + seed * 7 + (i as u64 * i as u64) % 11) % 17) as f64 - 8.0).collect();
            let u = ScalarField::new(&m, vals).unwrap();
            let pe = p(pv);
            let a = breakdown(&u, pe);
            let b = breakdown(&u.scaled(t), pe);
            let s = t.powf(pv);
            prop_assert!((b.dirichlet - s * a.dirichlet).abs() <= 1e-12 * b.dirichlet.abs().max(1e-300));
            prop_assert!((b.boundary - s * a.boundary).abs() <= 1e-12 * b.boundary.abs().max(1e-300));
            prop_assert!((b.mass - s * a.mass).abs() <= 1e-12 * b.mass);
            prop_assert!((a.quotient(2.0) - b.quotient(2.0)).abs() <= 1e-10 * a.quotient(2.0).abs().max(1.0));
        }
    }
}
