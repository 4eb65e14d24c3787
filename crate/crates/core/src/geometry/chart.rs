use super::curve::BoundaryCurve;
use super::{add, dot, norm, scale, sub, GeometryError, Point};

/// How a chart describes its piece of boundary as a graph `y2 = phi(y1)`.
#[derive(Clone, Debug, PartialEq)]
pub enum ChartGraph {
    /// `phi = 0`.
    Flat,
    /// A stretch of a parameterized curve around `t_center`, inverted numerically.
    Curve { curve: BoundaryCurve, t_center: f64, t_half_span: f64 },
}

/// Local coordinates `y = (y1, y2)` around `origin`
/// with `e1` tangent and `e2` the outward normal, on the box `|y1| < a1`, `|y2| < a2`.
/// The domain lies below the graph.
#[derive(Clone, Debug, PartialEq)]
pub struct Chart {
    origin: Point,
    e1: Point,
    e2: Point,
    half_widths: [f64; 2],
    graph: ChartGraph,
}

const MAX_NEWTON: usize = 60;

impl Chart {
    pub fn new(origin: Point, e1: Point, e2: Point, half_widths: [f64; 2], graph: ChartGraph) -> Result<Self, GeometryError> {
        if (norm(e1) - 1.0).abs() > 1e-12 || (norm(e2) - 1.0).abs() > 1e-12 || dot(e1, e2).abs() > 1e-12 {
            return Err(GeometryError::InvalidChart("frame is not orthonormal".into()));
        }
        if e1[0] * e2[1] - e1[1] * e2[0] > 0.0 {
            return Err(GeometryError::InvalidChart("frame must be (tangent, outward normal), clockwise".into()));
        }
        if !(half_widths[0] > 0.0 && half_widths[1] > 0.0) {
            return Err(GeometryError::InvalidChart("box half-widths must be positive".into()));
        }
        let chart = Chart { origin, e1, e2, half_widths, graph };
        chart.check_graph()?;
        Ok(chart)
    }

    /// Flat chart, the boundary is the line through `origin` orthogonal to `normal`.
    pub fn flat(origin: Point, normal: Point, half_widths: [f64; 2]) -> Result<Self, GeometryError> {
        let e2 = scale(normal, 1.0 / norm(normal));
        Chart::new(origin, [-e2[1], e2[0]], e2, half_widths, ChartGraph::Flat)
    }

    /// Chart around the curve point `gamma(t_center)` covering parameters
    /// `t_center +- t_half_span`. The box height is chosen to contain the graph
    /// with the required margin.
    pub fn on_curve(curve: &BoundaryCurve, t_center: f64, t_half_span: f64) -> Result<Self, GeometryError> {
        let origin = curve.point(t_center);
        let e2 = curve.normal(t_center);
        let e1 = [-e2[1], e2[0]];
        let local = |t: f64| {
            let d = sub(curve.point(t), origin);
            [dot(d, e1), dot(d, e2)]
        };
        let lo = local(t_center - t_half_span)[0];
        let hi = local(t_center + t_half_span)[0];
        if !(lo < 0.0 && hi > 0.0) {
            return Err(GeometryError::InvalidChart("curve stretch is not a graph over the tangent".into()));
        }
        let a1 = 0.999 * lo.abs().min(hi);
        let mut max_phi = 0.0_f64;
        let samples = 400;
        for k in 0..=samples {
            let t = t_center - t_half_span + 2.0 * t_half_span * k as f64 / samples as f64;
            let y = local(t);
            let dy = curve.derivative(t);
            if dot(dy, e1) <= 0.0 {
                return Err(GeometryError::InvalidChart("curve turns back within the chart".into()));
            }
            if y[0].abs() <= a1 {
                max_phi = max_phi.max(y[1].abs());
            }
        }
        let a2 = (2.05 * max_phi).max(a1);
        let graph = ChartGraph::Curve { curve: curve.clone(), t_center, t_half_span };
        Chart::new(origin, e1, e2, [a1, a2], graph)
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    pub fn frame(&self) -> (Point, Point) {
        (self.e1, self.e2)
    }

    pub fn half_widths(&self) -> [f64; 2] {
        self.half_widths
    }

    pub fn graph(&self) -> &ChartGraph {
        &self.graph
    }

    pub fn to_local(&self, x: Point) -> Point {
        let d = sub(x, self.origin);
        [dot(d, self.e1), dot(d, self.e2)]
    }

    pub fn to_global(&self, y: Point) -> Point {
        add(self.origin, add(scale(self.e1, y[0]), scale(self.e2, y[1])))
    }

    /// Whether `x` lies in the open chart box.
    pub fn contains(&self, x: Point) -> bool {
        let y = self.to_local(x);
        y[0].abs() < self.half_widths[0] && y[1].abs() < self.half_widths[1]
    }

    /// `(phi(y1), phi'(y1))`.
    pub fn phi(&self, y1: f64) -> (f64, f64) {
        match &self.graph {
            ChartGraph::Flat => (0.0, 0.0),
            ChartGraph::Curve { curve, t_center, t_half_span } => {
                let t = self.invert(curve, *t_center, *t_half_span, y1);
                let d = sub(curve.point(t), self.origin);
                let dy = curve.derivative(t);
                (dot(d, self.e2), dot(dy, self.e2) / dot(dy, self.e1))
            }
        }
    }

    /// Solve `(gamma(t) - origin) . e1 = y1` by Newton's method safeguarded with bisection.
    fn invert(&self, curve: &BoundaryCurve, tc: f64, span: f64, y1: f64) -> f64 {
        let g = |t: f64| dot(sub(curve.point(t), self.origin), self.e1) - y1;
        let (mut lo, mut hi) = (tc - span, tc + span);
        let mut t = tc + span * (y1 / self.half_widths[0]).clamp(-1.0, 1.0);
        let scale_t = span.max(1e-300);
        for _ in 0..MAX_NEWTON {
            let f = g(t);
            if f == 0.0 {
                return t;
            }
            if f < 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            let df = dot(curve.derivative(t), self.e1);
            let mut next = t - f / df;
            if !(next > lo && next < hi) || !df.is_finite() || df <= 0.0 {
                next = 0.5 * (lo + hi);
            }
            if (next - t).abs() <= 1e-15 * scale_t.max(t.abs()) {
                return next;
            }
            t = next;
        }
        t
    }

    /// Unit normal `(1 + phi'^2)^(-1/2) (-phi', 1)` in local coordinates.
    pub fn normal_local(&self, y1: f64) -> Point {
        let (_, dphi) = self.phi(y1);
        let s = 1.0 / (1.0 + dphi * dphi).sqrt();
        [-dphi * s, s]
    }

    /// The chart normal field at `x`, constant along `e2`.
    pub fn normal_at(&self, x: Point) -> Point {
        let y = self.to_local(x);
        let n = self.normal_local(y[0]);
        add(scale(self.e1, n[0]), scale(self.e2, n[1]))
    }

    fn check_graph(&self) -> Result<(), GeometryError> {
        let [a1, a2] = self.half_widths;
        let n = 64;
        for k in 0..=n {
            let y1 = a1 * (2.0 * k as f64 / n as f64 - 1.0) * 0.999;
            let (phi, dphi) = self.phi(y1);
            if phi.abs() > 0.5 * a2 {
                return Err(GeometryError::InvalidChart(format!("|phi({y1})| = {} exceeds a2 / 2 = {}", phi.abs(), 0.5 * a2)));
            }
            let step = 1e-6 * a1;
            if y1.abs() + step < a1 {
                let fd = (self.phi(y1 + step).0 - self.phi(y1 - step).0) / (2.0 * step);
                if (fd - dphi).abs() > 1e-5 * (1.0 + dphi.abs()) {
                    return Err(GeometryError::InvalidChart(format!(
                        "phi' = {dphi} disagrees with the finite difference {fd} at y1 = {y1}"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_chart_normal_is_e2() {
        let c = Chart::flat([0.0, 1.0], [0.0, 1.0], [0.5, 0.5]).unwrap();
        assert_eq!(c.normal_at([0.2, 0.9]), [0.0, 1.0]);
        assert!(c.contains([0.2, 0.9]));
        assert!(!c.contains([0.2, 1.6]));
    }

    #[test]
    fn circle_chart_reproduces_the_circle() {
        let curve = BoundaryCurve::Circle { center: [0.0, 0.0], radius: 1.0 };
        let chart = Chart::on_curve(&curve, 0.0, 0.1).unwrap();
        for k in -10..=10 {
            let y1 = 0.9 * chart.half_widths()[0] * k as f64 / 10.0;
            let (phi, _) = chart.phi(y1);
            assert!((phi - ((1.0 - y1 * y1).sqrt() - 1.0)).abs() < 1e-13);
            let x = chart.to_global([y1, phi]);
            let n = chart.normal_at(x);
            assert!(norm(sub(n, x)) < 1e-12);
        }
    }

    #[test]
    fn rejects_non_orthonormal_frame() {
        assert!(Chart::new([0.0, 0.0], [1.0, 0.0], [1.0, 0.0], [1.0, 1.0], ChartGraph::Flat).is_err());
    }

    #[test]
    fn rejects_a_stretch_that_is_not_a_graph() {
        let curve = BoundaryCurve::Circle { center: [0.0, 0.0], radius: 1.0 };
        assert!(Chart::on_curve(&curve, 0.0, 0.3).is_err());
    }
}
