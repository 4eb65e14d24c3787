use std::collections::VecDeque;

use super::precond::Preconditioner;
use super::problem::QuotientProblem;
use super::{SolverError, SolverOptions};
use crate::functionals::DEGENERATE_MASS;

/// Largest number of factorization attempts per refresh.
const MAX_SHIFT_ATTEMPTS: usize = 120;
const MAX_LINE_SEARCH: usize = 60;
/// Relative level below which changes of the quotient are treated as rounding.
const NOISE: f64 = 1e-13;
const WOLFE_SLOPE: f64 = 0.9;

#[derive(Clone, Debug)]
pub(crate) struct Minimum {
    pub field: Vec<f64>,
    pub quotient: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Rescale `u` to unit volume mass.
fn normalize<P: QuotientProblem + ?Sized>(problem: &P, u: &mut [f64]) -> bool {
    let (_, mass) = problem.evaluate(u, None);
    if !(mass > DEGENERATE_MASS) || !mass.is_finite() {
        return false;
    }
    let s = mass.powf(-1.0 / problem.exponent().get());
    u.iter_mut().for_each(|v| *v *= s);
    true
}

/// Remove the radial part of `d`, keeping the mass fixed to first order.
fn project(d: &mut [f64], dmass: &[f64], u: &[f64], p: f64) {
    let c = dot(dmass, d) / p;
    d.iter_mut().zip(u).for_each(|(di, ui)| *di -= c * ui);
}

struct Memory {
    pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)>,
    capacity: usize,
    scale: f64,
}

impl Memory {
    fn clear(&mut self) {
        self.pairs.clear();
        self.scale = 1.0;
    }

    /// Two-loop recursion: returns `-H g` with the preconditioner as the base metric.
    fn direction(&self, pre: &Preconditioner, g: &[f64], out: &mut [f64]) {
        let mut q = g.to_vec();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (s, y, rho) in self.pairs.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        pre.apply(&q, out);
        out.iter_mut().for_each(|v| *v *= self.scale);
        for ((s, y, rho), a) in self.pairs.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, out);
            out.iter_mut().zip(s).for_each(|(o, si)| *o += (a - b) * si);
        }
        out.iter_mut().for_each(|v| *v = -*v);
    }
}

/// Preconditioned limited-memory quasi-Newton descent on the unit-mass sphere.
pub(crate) fn minimize<P: QuotientProblem + ?Sized>(
    problem: &P,
    mut u: Vec<f64>,
    opts: &SolverOptions,
) -> Result<Minimum, SolverError> {
    let n = problem.len();
    if u.len() != n {
        return Err(SolverError::WrongLength { expected: n, found: u.len() });
    }
    if u.iter().any(|v| !v.is_finite()) || !normalize(problem, &mut u) {
        return Err(SolverError::DegenerateStart);
    }
    let p = problem.exponent().get();
    let mut g = vec![0.0; n];
    let mut gm = vec![0.0; n];
    let (mut q, _) = problem.evaluate(&u, Some((&mut g, &mut gm)));
    if !q.is_finite() {
        return Err(SolverError::DegenerateStart);
    }

    let mut pre = Preconditioner::new(n);
    let mut memory = Memory { pairs: VecDeque::new(), capacity: opts.memory.max(1), scale: 1.0 };
    let mut d = vec![0.0; n];
    let mut ut = vec![0.0; n];
    let mut gt = vec![0.0; n];
    let mut gmt = vec![0.0; n];
    let mut work = vec![0.0; n];

    let mut decrement = 0.5 * (q.abs() + 1.0);
    let mut shift_gap = f64::INFINITY;
    let mut raised = false;
    let mut since_refresh = usize::MAX;
    let mut force_refresh = true;
    let mut failures = 0usize;
    let mut iterations = 0usize;
    let mut converged = false;

    while iterations < opts.max_iter {
        if norm(&g) <= opts.tolerance * q.abs().max(1.0) {
            converged = true;
            break;
        }
        let target = (4.0 * decrement).clamp(1e-12 * (q.abs() + 1.0), q.abs() + 1.0);
        let stale = since_refresh >= opts.refresh_interval && (p != 2.0 || target < 0.1 * shift_gap);
        let tighten = since_refresh >= 5 && !raised && target < 0.01 * shift_gap;
        if force_refresh || stale || tighten {
            let mut gap = target;
            let mut ok = false;
            for _ in 0..MAX_SHIFT_ATTEMPTS {
                if pre.refresh(problem, &u, gap - q)? {
                    ok = true;
                    break;
                }
                gap *= 2.0;
            }
            raised = gap > target;
            shift_gap = if ok { gap } else { f64::INFINITY };
            memory.clear();
            since_refresh = 0;
            force_refresh = false;
        }

        memory.direction(&pre, &g, &mut d);
        project(&mut d, &gm, &u, p);
        let mut gd = dot(&g, &d);
        if !(gd < 0.0) {
            memory.clear();
            memory.direction(&pre, &g, &mut d);
            project(&mut d, &gm, &u, p);
            gd = dot(&g, &d);
            if !(gd < 0.0) {
                d.iter_mut().zip(&g).for_each(|(di, gi)| *di = -gi);
                project(&mut d, &gm, &u, p);
                gd = dot(&g, &d);
            }
        }
        decrement = 0.5 * gd.abs();

        let mut t = 1.0;
        let mut accepted = false;
        let mut qt = f64::NAN;
        for _ in 0..MAX_LINE_SEARCH {
            ut.iter_mut().zip(u.iter().zip(&d)).for_each(|(o, (ui, di))| *o = ui + t * di);
            if normalize(problem, &mut ut) {
                qt = problem.evaluate(&ut, Some((&mut gt, &mut gmt))).0;
                let slack = 4.0 * f64::EPSILON * q.abs();
                if qt.is_finite() && qt <= q + opts.armijo * t * gd + slack {
                    accepted = true;
                    break;
                }
                // Within the rounding noise of the quotient, accept on the slope instead.
                if qt.is_finite() && qt <= q + NOISE * (1.0 + q.abs()) {
                    let slope = dot(&gt, &d);
                    if slope.abs() <= WOLFE_SLOPE * gd.abs() {
                        accepted = true;
                        break;
                    }
                }
            }
            t *= opts.contraction;
        }
        if !accepted {
            failures += 1;
            if failures > 2 || (since_refresh == 0 && memory.pairs.is_empty() && failures > 1) {
                break;
            }
            force_refresh = true;
            continue;
        }
        failures = 0;

        let s: Vec<f64> = ut.iter().zip(&u).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-14 * norm(&s) * norm(&y) && sy.is_finite() {
            pre.apply(&y, &mut work);
            let ypy = dot(&y, &work);
            if ypy > 0.0 {
                memory.scale = sy / ypy;
            }
            if memory.pairs.len() == memory.capacity {
                memory.pairs.pop_front();
            }
            memory.pairs.push_back((s, y, 1.0 / sy));
        }
        std::mem::swap(&mut u, &mut ut);
        std::mem::swap(&mut g, &mut gt);
        std::mem::swap(&mut gm, &mut gmt);
        q = qt;
        iterations += 1;
        since_refresh = since_refresh.saturating_add(1);
    }
    let gnorm = norm(&g);
    let quotient = problem.evaluate(&u, None).0;
    Ok(Minimum { field: u, quotient, gradient_norm: gnorm, iterations, converged })
}
