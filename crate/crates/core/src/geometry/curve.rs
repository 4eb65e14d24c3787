use std::f64::consts::TAU;

use super::{add, norm, outward_from_tangent, scale, sub, Point};

/// A closed, counterclockwise boundary curve `t -> gamma(t)`, periodic with period 1.
#[derive(Clone, Debug, PartialEq)]
pub enum BoundaryCurve {
    Circle { center: Point, radius: f64 },
    Ellipse { center: Point, semi_axes: [f64; 2] },
    /// Polar graph `r(theta) = R (1 - a |sin theta|^(1 + gamma))`.
    Radial { center: Point, radius: f64, amplitude: f64, exponent: f64 },
    /// Segments and circular arcs parameterized proportionally to arc length.
    Piecewise(Piecewise),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Piece {
    Segment { from: Point, to: Point },
    Arc { center: Point, radius: f64, start: f64, sweep: f64 },
}

impl Piece {
    fn length(&self) -> f64 {
        match *self {
            Piece::Segment { from, to } => norm(sub(to, from)),
            Piece::Arc { radius, sweep, .. } => radius * sweep,
        }
    }

    /// Point and unit tangent at arc length `s` from the piece start.
    fn eval(&self, s: f64) -> (Point, Point) {
        match *self {
            Piece::Segment { from, to } => {
                let d = sub(to, from);
                let l = norm(d);
                let u = scale(d, 1.0 / l);
                (add(from, scale(u, s)), u)
            }
            Piece::Arc { center, radius, start, .. } => {
                let a = start + s / radius;
                let (sn, cs) = a.sin_cos();
                ([center[0] + radius * cs, center[1] + radius * sn], [-sn, cs])
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Piecewise {
    pieces: Vec<Piece>,
    starts: Vec<f64>,
    length: f64,
}

impl Piecewise {
    pub fn new(pieces: Vec<Piece>) -> Self {
        let mut starts = Vec::with_capacity(pieces.len());
        let mut acc = 0.0;
        for p in &pieces {
            starts.push(acc);
            acc += p.length();
        }
        Self { pieces, starts, length: acc }
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let s = t * self.length;
        let k = match self.starts.binary_search_by(|a| a.partial_cmp(&s).unwrap()) {
            Ok(k) => k,
            Err(k) => k.saturating_sub(1),
        };
        let k = k.min(self.pieces.len() - 1);
        (k, (s - self.starts[k]).max(0.0))
    }
}

impl BoundaryCurve {
    pub fn point(&self, t: f64) -> Point {
        let t = t.rem_euclid(1.0);
        match self {
            BoundaryCurve::Circle { center, radius } => {
                let (s, c) = (TAU * t).sin_cos();
                [center[0] + radius * c, center[1] + radius * s]
            }
            BoundaryCurve::Ellipse { center, semi_axes } => {
                let (s, c) = (TAU * t).sin_cos();
                [center[0] + semi_axes[0] * c, center[1] + semi_axes[1] * s]
            }
            BoundaryCurve::Radial { center, .. } => {
                let th = TAU * t;
                let (r, _) = self.radial(th);
                let (s, c) = th.sin_cos();
                [center[0] + r * c, center[1] + r * s]
            }
            BoundaryCurve::Piecewise(pw) => {
                let (k, s) = pw.locate(t);
                pw.pieces[k].eval(s).0
            }
        }
    }

    /// Derivative `d gamma / dt`.
    pub fn derivative(&self, t: f64) -> Point {
        let t = t.rem_euclid(1.0);
        match self {
            BoundaryCurve::Circle { radius, .. } => {
                let (s, c) = (TAU * t).sin_cos();
                [-TAU * radius * s, TAU * radius * c]
            }
            BoundaryCurve::Ellipse { semi_axes, .. } => {
                let (s, c) = (TAU * t).sin_cos();
                [-TAU * semi_axes[0] * s, TAU * semi_axes[1] * c]
            }
            BoundaryCurve::Radial { .. } => {
                let th = TAU * t;
                let (r, dr) = self.radial(th);
                let (s, c) = th.sin_cos();
                [TAU * (dr * c - r * s), TAU * (dr * s + r * c)]
            }
            BoundaryCurve::Piecewise(pw) => {
                let (k, s) = pw.locate(t);
                scale(pw.pieces[k].eval(s).1, pw.length)
            }
        }
    }

    pub fn normal(&self, t: f64) -> Point {
        outward_from_tangent(self.derivative(t))
    }

    /// Radial function and its angular derivative (only for `Radial`).
    fn radial(&self, theta: f64) -> (f64, f64) {
        match *self {
            BoundaryCurve::Radial { radius, amplitude, exponent, .. } => {
                let (s, c) = theta.sin_cos();
                let a = s.abs();
                let r = radius * (1.0 - amplitude * a.powf(1.0 + exponent));
                let dr = -radius * amplitude * (1.0 + exponent) * a.powf(exponent) * s.signum() * c;
                (r, dr)
            }
            _ => unreachable!("radial() on a non-radial curve"),
        }
    }

    pub fn perimeter(&self) -> f64 {
        match self {
            BoundaryCurve::Circle { radius, .. } => TAU * radius,
            BoundaryCurve::Piecewise(pw) => pw.length,
            _ => ArcLengthTable::new(self, 8192).total(),
        }
    }
}

/// Tabulated arc length of a curve, used to place vertices at equal spacing.
#[derive(Clone, Debug)]
pub struct ArcLengthTable {
    params: Vec<f64>,
    lengths: Vec<f64>,
}

const GL4_NODES: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GL4_WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_9,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_9,
];

impl ArcLengthTable {
    pub fn new(curve: &BoundaryCurve, intervals: usize) -> Self {
        let intervals = intervals.max(16);
        let dt = 1.0 / intervals as f64;
        let mut params = Vec::with_capacity(intervals + 1);
        let mut lengths = Vec::with_capacity(intervals + 1);
        params.push(0.0);
        lengths.push(0.0);
        let mut acc = 0.0;
        for k in 0..intervals {
            let t0 = k as f64 * dt;
            let mut seg = 0.0;
            for (x, w) in GL4_NODES.iter().zip(GL4_WEIGHTS) {
                seg += w * norm(curve.derivative(t0 + 0.5 * dt * (1.0 + x)));
            }
            acc += 0.5 * dt * seg;
            params.push(t0 + dt);
            lengths.push(acc);
        }
        Self { params, lengths }
    }

    pub fn total(&self) -> f64 {
        *self.lengths.last().unwrap()
    }

    /// Curve parameter at which the arc length reaches `fraction` of the total.
    pub fn param_at(&self, fraction: f64) -> f64 {
        let target = fraction.rem_euclid(1.0) * self.total();
        let k = match self.lengths.binary_search_by(|a| a.partial_cmp(&target).unwrap()) {
            Ok(k) => return self.params[k],
            Err(k) => k,
        };
        let (l0, l1) = (self.lengths[k - 1], self.lengths[k]);
        let w = (target - l0) / (l1 - l0);
        self.params[k - 1] + w * (self.params[k] - self.params[k - 1])
    }
}
