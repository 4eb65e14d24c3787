use faer::sparse::Triplet;

use crate::functionals::{self, cell_gradient, for_each_facet_point, for_each_volume_point, Exponent, DEGENERATE_MASS};
use crate::geometry::Mesh;
use crate::quadrature::SEGMENT_GAUSS3;

/// Relative regularization of the preconditioner weights at `u = 0`, `grad u = 0` for `p > 2`.
const PRECONDITIONER_FLOOR: f64 = 1e-4;

/// Largest ratio of a preconditioner weight to its value at the maximum, for `p < 2`.
const PRECONDITIONER_RANGE: f64 = 1e10;

/// Relative floor of the boundary weights for `p < 2`, which enter with a negative sign.
const BOUNDARY_FLOOR: f64 = 1e-2;

/// Squared regularization of the boundary weights given the largest `|u|`.
fn boundary_floor(p: f64, umax: f64) -> f64 {
    if p < 2.0 {
        (BOUNDARY_FLOOR * umax).powi(2).max(f64::MIN_POSITIVE)
    } else {
        weight_floor(p, umax)
    }
}

/// Squared regularization of `(x^2 + floor^2)^((p-2)/2)` given the largest `|x|`.
fn weight_floor(p: f64, max: f64) -> f64 {
    let rel = if p < 2.0 { PRECONDITIONER_RANGE.powf(-1.0 / (2.0 - p)) } else { PRECONDITIONER_FLOOR };
    (rel * max).powi(2).max(f64::MIN_POSITIVE)
}

/// A discrete Rayleigh quotient `(D(u) - alpha B(u)) / M(u)` in the unknowns `u`.
pub trait QuotientProblem {
    fn len(&self) -> usize;

    fn exponent(&self) -> Exponent;

    fn alpha(&self) -> f64;

    /// Quotient and mass. When `grads` is given, the quotient gradient and the
    /// mass gradient are written into it. The quotient is `NaN` for a zero field.
    fn evaluate(&self, u: &[f64], grads: Option<(&mut [f64], &mut [f64])>) -> (f64, f64);

    /// Lower triangle of the symmetric matrix `K_w - alpha B_w + shift M_w`,
    /// where the weights linearize the integrands of `D`, `B` and `M` at `u`.
    fn preconditioner(&self, u: &[f64], shift: f64, out: &mut Vec<Triplet<usize, usize, f64>>);

    /// The boundary-layer profile `exp(-beta s)`, `s` the distance to the boundary.
    fn trial(&self, beta: f64) -> Vec<f64>;
}

fn push_lower(out: &mut Vec<Triplet<usize, usize, f64>>, i: usize, j: usize, v: f64) {
    if i >= j {
        out.push(Triplet::new(i, j, v));
    } else {
        out.push(Triplet::new(j, i, v));
    }
}

/// Weight `p max(1, p - 1) (|g|^2 + eta^2)^((p - 2) / 2)` bounding the second
/// variation of `|g|^p` in every direction.
#[inline]
fn stiffness_weight(p: f64, g2: f64, eta2: f64) -> f64 {
    if p == 2.0 {
        2.0
    } else {
        p * (p - 1.0).max(1.0) * (g2 + eta2).powf(0.5 * (p - 2.0))
    }
}

/// Weight `p max(1, p - 1) (u^2 + zeta^2)^((p - 2) / 2)` for `|u|^p`: the second
/// derivative for `p >= 2` and the secant `p |u|^(p-2)` below.
#[inline]
fn mass_weight(p: f64, u: f64, zeta2: f64) -> f64 {
    if p == 2.0 {
        2.0
    } else {
        p * (p - 1.0).max(1.0) * (u * u + zeta2).powf(0.5 * (p - 2.0))
    }
}

/// The quotient for P1 fields on a mesh.
#[derive(Clone, Copy, Debug)]
pub struct MeshProblem<'m> {
    pub mesh: &'m Mesh,
    pub p: Exponent,
    pub alpha: f64,
}

impl QuotientProblem for MeshProblem<'_> {
    fn len(&self) -> usize {
        self.mesh.num_vertices()
    }

    fn exponent(&self) -> Exponent {
        self.p
    }

    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn evaluate(&self, u: &[f64], grads: Option<(&mut [f64], &mut [f64])>) -> (f64, f64) {
        let (b, q) = functionals::evaluate(self.mesh, u, self.p, self.alpha, grads);
        (q, b.mass)
    }

    fn preconditioner(&self, u: &[f64], shift: f64, out: &mut Vec<Triplet<usize, usize, f64>>) {
        out.clear();
        let mesh = self.mesh;
        let p = self.p.get();
        let mut gmax = 0.0_f64;
        for k in 0..mesh.num_cells() {
            let g = cell_gradient(mesh, k, u);
            gmax = gmax.max(g[0].hypot(g[1]));
        }
        let umax = u.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let eta2 = weight_floor(p, gmax);
        let zeta2 = weight_floor(p, umax);
        let zeta2_b = boundary_floor(p, umax);
        for k in 0..mesh.num_cells() {
            let cell = mesh.cell(k);
            let grads = mesh.basis_gradients(k);
            let g = cell_gradient(mesh, k, u);
            let w = stiffness_weight(p, g[0] * g[0] + g[1] * g[1], eta2) * mesh.cell_measure(k);
            for a in 0..cell.len() {
                for b in 0..=a {
                    let v = w * (grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1]);
                    push_lower(out, cell[a], cell[b], v);
                }
            }
            let mut local = [[0.0; 3]; 3];
            for_each_volume_point(mesh, k, |l, _, wq| {
                let val: f64 = cell.iter().zip(l).map(|(&i, li)| u[i] * li).sum();
                let m = shift * mass_weight(p, val, zeta2) * wq;
                for a in 0..cell.len() {
                    for b in 0..=a {
                        local[a][b] += m * l[a] * l[b];
                    }
                }
            });
            for a in 0..cell.len() {
                for b in 0..=a {
                    push_lower(out, cell[a], cell[b], local[a][b]);
                }
            }
        }
        for f in mesh.facets() {
            let [i, j] = f.nodes;
            let mut local = [[0.0; 2]; 2];
            for_each_facet_point(mesh, f.nodes, f.measure, |l, _, wq| {
                let val = l[0] * u[i] + l[1] * u[j];
                let m = -self.alpha * mass_weight(p, val, zeta2_b) * wq;
                for a in 0..2 {
                    for b in 0..=a {
                        local[a][b] += m * l[a] * l[b];
                    }
                }
            });
            if i == j {
                push_lower(out, i, i, local[0][0]);
            } else {
                push_lower(out, i, i, local[0][0]);
                push_lower(out, j, i, local[1][0]);
                push_lower(out, j, j, local[1][1]);
            }
        }
    }

    fn trial(&self, beta: f64) -> Vec<f64> {
        self.mesh.boundary_distance().iter().map(|d| (-beta * d).exp()).collect()
    }
}

/// The quotient of radial fields on the disk of radius `R`:
/// `(int_0^R |u'|^p r dr - alpha R |u(R)|^p) / int_0^R |u|^p r dr`, in P1 on the
/// given nodes `0 = r_0 < ... < r_n = R`.
#[derive(Clone, Debug)]
pub struct RadialProblem {
    nodes: Vec<f64>,
    p: Exponent,
    alpha: f64,
}

impl RadialProblem {
    pub fn new(nodes: Vec<f64>, p: Exponent, alpha: f64) -> Self {
        assert!(nodes.len() >= 2 && nodes[0] == 0.0, "radial nodes must start at the origin");
        assert!(nodes.windows(2).all(|w| w[1] > w[0]), "radial nodes must increase");
        Self { nodes, p, alpha }
    }

    pub fn uniform(radius: f64, cells: usize, p: Exponent, alpha: f64) -> Self {
        Self::new((0..=cells).map(|i| radius * i as f64 / cells as f64).collect(), p, alpha)
    }

    pub fn radius(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
}

impl QuotientProblem for RadialProblem {
    fn len(&self) -> usize {
        self.nodes.len()
    }

    fn exponent(&self) -> Exponent {
        self.p
    }

    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn evaluate(&self, u: &[f64], grads: Option<(&mut [f64], &mut [f64])>) -> (f64, f64) {
        let p = self.p;
        let pv = p.get();
        let r = &self.nodes;
        let n = r.len();
        let radius = self.radius();
        let mut dirichlet = 0.0;
        let mut mass = 0.0;
        let boundary = radius * p.pow_abs(u[n - 1]);
        let mut d_dir = vec![0.0; if grads.is_some() { n } else { 0 }];
        let mut d_mass = vec![0.0; d_dir.len()];
        let mut eta2 = 0.0;
        if grads.is_some() && pv < 2.0 {
            let gmax = (0..n - 1).map(|k| ((u[k + 1] - u[k]) / (r[k + 1] - r[k])).abs()).fold(0.0, f64::max);
            eta2 = functionals::regularization_floor(pv, gmax);
        }
        for k in 0..n - 1 {
            let l = r[k + 1] - r[k];
            let wr = 0.5 * (r[k + 1] * r[k + 1] - r[k] * r[k]);
            let g = (u[k + 1] - u[k]) / l;
            dirichlet += p.pow_abs(g) * wr;
            if !d_dir.is_empty() {
                let flux = if pv == 2.0 {
                    2.0 * g
                } else if g * g + eta2 > 0.0 {
                    pv * g * (g * g + eta2).powf(0.5 * (pv - 2.0))
                } else {
                    0.0
                };
                d_dir[k] -= flux * wr / l;
                d_dir[k + 1] += flux * wr / l;
            }
            for (t, w) in SEGMENT_GAUSS3 {
                let v = (1.0 - t) * u[k] + t * u[k + 1];
                let wq = w * l * (r[k] + t * l);
                mass += wq * p.pow_abs(v);
                if !d_mass.is_empty() {
                    let dv = pv * p.dual(v) * wq;
                    d_mass[k] += dv * (1.0 - t);
                    d_mass[k + 1] += dv * t;
                }
            }
        }
        if !(mass > DEGENERATE_MASS) {
            if let Some((g, gm)) = grads {
                g.iter_mut().for_each(|v| *v = f64::NAN);
                gm.iter_mut().for_each(|v| *v = f64::NAN);
            }
            return (f64::NAN, mass);
        }
        let q = (dirichlet - self.alpha * boundary) / mass;
        if let Some((g, gm)) = grads {
            for i in 0..n {
                g[i] = (d_dir[i] - q * d_mass[i]) / mass;
                gm[i] = d_mass[i];
            }
            g[n - 1] -= self.alpha * radius * pv * p.dual(u[n - 1]) / mass;
        }
        (q, mass)
    }

    fn preconditioner(&self, u: &[f64], shift: f64, out: &mut Vec<Triplet<usize, usize, f64>>) {
        out.clear();
        let p = self.p.get();
        let r = &self.nodes;
        let n = r.len();
        let gmax = (0..n - 1).map(|k| ((u[k + 1] - u[k]) / (r[k + 1] - r[k])).abs()).fold(0.0, f64::max);
        let umax = u.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let eta2 = weight_floor(p, gmax);
        let zeta2 = weight_floor(p, umax);
        for k in 0..n - 1 {
            let l = r[k + 1] - r[k];
            let wr = 0.5 * (r[k + 1] * r[k + 1] - r[k] * r[k]);
            let g = (u[k + 1] - u[k]) / l;
            let w = stiffness_weight(p, g * g, eta2) * wr / (l * l);
            let mut local = [[w, 0.0], [-w, w]];
            for (t, wg) in SEGMENT_GAUSS3 {
                let v = (1.0 - t) * u[k] + t * u[k + 1];
                let m = shift * mass_weight(p, v, zeta2) * wg * l * (r[k] + t * l);
                local[0][0] += m * (1.0 - t) * (1.0 - t);
                local[1][0] += m * t * (1.0 - t);
                local[1][1] += m * t * t;
            }
            out.push(Triplet::new(k, k, local[0][0]));
            out.push(Triplet::new(k + 1, k, local[1][0]));
            out.push(Triplet::new(k + 1, k + 1, local[1][1]));
        }
        let radius = self.radius();
        out.push(Triplet::new(n - 1, n - 1, -self.alpha * radius * mass_weight(p, u[n - 1], boundary_floor(p, umax))));
    }

    fn trial(&self, beta: f64) -> Vec<f64> {
        let radius = self.radius();
        self.nodes.iter().map(|r| (-beta * (radius - r)).exp()).collect()
    }
}
