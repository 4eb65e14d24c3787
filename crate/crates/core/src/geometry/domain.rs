use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::curve::{ArcLengthTable, BoundaryCurve, Piece, Piecewise};
use super::{add, cross, dot, norm, scale, sub, GeometryError, Point};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    Interval,
    Disk,
    Ellipse,
    SmoothedPolygon,
    RoughDisk,
    Square,
}

impl DomainKind {
    pub const ALL: [DomainKind; 6] = [
        DomainKind::Interval,
        DomainKind::Disk,
        DomainKind::Ellipse,
        DomainKind::SmoothedPolygon,
        DomainKind::RoughDisk,
        DomainKind::Square,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DomainKind::Interval => "interval",
            DomainKind::Disk => "disk",
            DomainKind::Ellipse => "ellipse",
            DomainKind::SmoothedPolygon => "smoothed_polygon",
            DomainKind::RoughDisk => "rough_disk",
            DomainKind::Square => "square",
        }
    }
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DomainKind {
    type Err = GeometryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.replace('-', "_");
        DomainKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| GeometryError::InvalidDomain(format!("unknown domain kind `{s}`")))
    }
}

/// Declarative description of a test domain.
///
/// `SmoothedPolygon` rounds every corner of a convex polygon (counterclockwise
/// vertices) with a circular arc of the given radius. `RoughDisk` is the polar
/// graph `r = R (1 - a |sin theta|^(1 + gamma))`: C1, with curvature blowing up
/// at `theta = 0, pi` when `gamma < 1`. `Square` has corners and is not C1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainSpec {
    Interval { center: f64, half_length: f64 },
    Disk { center: Point, radius: f64 },
    Ellipse { center: Point, semi_axes: [f64; 2] },
    SmoothedPolygon { vertices: Vec<Point>, rounding_radius: f64 },
    RoughDisk { center: Point, radius: f64, amplitude: f64, holder_exponent: f64 },
    Square { center: Point, side: f64 },
}

/// Corner data of a rounded convex polygon.
struct Rounding {
    /// Arc centers; they form the inner polygon whose r-neighbourhood is the domain.
    centers: Vec<Point>,
    tangent_lengths: Vec<f64>,
    turning: Vec<f64>,
    pieces: Vec<Piece>,
}

impl DomainSpec {
    pub fn interval(half_length: f64) -> Self {
        DomainSpec::Interval { center: 0.0, half_length }
    }

    pub fn disk(radius: f64) -> Self {
        DomainSpec::Disk { center: [0.0, 0.0], radius }
    }

    pub fn ellipse(a: f64, b: f64) -> Self {
        DomainSpec::Ellipse { center: [0.0, 0.0], semi_axes: [a, b] }
    }

    /// Square of the given side centered at the origin.
    pub fn square(side: f64) -> Self {
        DomainSpec::Square { center: [0.0, 0.0], side }
    }

    /// The unit square `[0, 1]^2`.
    pub fn unit_square() -> Self {
        DomainSpec::Square { center: [0.5, 0.5], side: 1.0 }
    }

    /// Square of the given side centered at the origin with rounded corners.
    pub fn smoothed_square(side: f64, rounding_radius: f64) -> Self {
        let h = 0.5 * side;
        DomainSpec::SmoothedPolygon {
            vertices: vec![[-h, -h], [h, -h], [h, h], [-h, h]],
            rounding_radius,
        }
    }

    pub fn rough_disk(radius: f64, amplitude: f64, holder_exponent: f64) -> Self {
        DomainSpec::RoughDisk { center: [0.0, 0.0], radius, amplitude, holder_exponent }
    }

    pub fn kind(&self) -> DomainKind {
        match self {
            DomainSpec::Interval { .. } => DomainKind::Interval,
            DomainSpec::Disk { .. } => DomainKind::Disk,
            DomainSpec::Ellipse { .. } => DomainKind::Ellipse,
            DomainSpec::SmoothedPolygon { .. } => DomainKind::SmoothedPolygon,
            DomainSpec::RoughDisk { .. } => DomainKind::RoughDisk,
            DomainSpec::Square { .. } => DomainKind::Square,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            DomainSpec::Interval { .. } => 1,
            _ => 2,
        }
    }

    /// Whether the boundary is C1 (everything but the square).
    pub fn is_c1(&self) -> bool {
        !matches!(self, DomainSpec::Square { .. })
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(GeometryError::InvalidDomain(format!("{name} must be positive and finite, got {v}")))
            }
        };
        match self {
            DomainSpec::Interval { center, half_length } => {
                if !center.is_finite() {
                    return Err(GeometryError::InvalidDomain("interval center must be finite".into()));
                }
                positive("half-length", *half_length)
            }
            DomainSpec::Disk { radius, .. } => positive("radius", *radius),
            DomainSpec::Ellipse { semi_axes, .. } => {
                positive("semi-axis a", semi_axes[0])?;
                positive("semi-axis b", semi_axes[1])
            }
            DomainSpec::Square { side, .. } => positive("side", *side),
            DomainSpec::RoughDisk { radius, amplitude, holder_exponent, .. } => {
                positive("radius", *radius)?;
                if !(amplitude.is_finite() && *amplitude >= 0.0 && *amplitude < 1.0) {
                    return Err(GeometryError::InvalidDomain(format!(
                        "rough disk amplitude must lie in [0, 1) so the radial function stays positive, got {amplitude}"
                    )));
                }
                if !(*holder_exponent > 0.0 && *holder_exponent <= 1.0) {
                    return Err(GeometryError::InvalidDomain(format!(
                        "Hoelder exponent must lie in (0, 1], got {holder_exponent}"
                    )));
                }
                Ok(())
            }
            DomainSpec::SmoothedPolygon { .. } => self.rounding().map(|_| ()),
        }
    }

    fn rounding(&self) -> Result<Rounding, GeometryError> {
        let DomainSpec::SmoothedPolygon { vertices, rounding_radius } = self else {
            unreachable!("rounding() on a non-polygon");
        };
        let r = *rounding_radius;
        let n = vertices.len();
        if n < 3 {
            return Err(GeometryError::InvalidDomain("a polygon needs at least 3 vertices".into()));
        }
        if vertices.iter().any(|v| !v[0].is_finite() || !v[1].is_finite()) {
            return Err(GeometryError::InvalidDomain("polygon vertices must be finite".into()));
        }
        if !(r.is_finite() && r > 0.0) {
            return Err(GeometryError::InvalidDomain(format!("rounding radius must be positive, got {r}")));
        }
        let edge = |i: usize| sub(vertices[(i + 1) % n], vertices[i]);
        let lengths: Vec<f64> = (0..n).map(|i| norm(edge(i))).collect();
        let shortest = lengths.iter().cloned().fold(f64::INFINITY, f64::min);
        if r >= 0.5 * shortest {
            return Err(GeometryError::InvalidDomain(format!(
                "rounding radius {r} must be strictly less than half the shortest edge ({})",
                0.5 * shortest
            )));
        }
        let mut turning = Vec::with_capacity(n);
        for i in 0..n {
            let a = edge((i + n - 1) % n);
            let b = edge(i);
            let phi = cross(a, b).atan2(dot(a, b));
            if !(phi > 0.0 && phi < PI) {
                return Err(GeometryError::InvalidDomain(
                    "polygon vertices must be counterclockwise and strictly convex".into(),
                ));
            }
            turning.push(phi);
        }
        let tangent_lengths: Vec<f64> = turning.iter().map(|phi| r * (0.5 * phi).tan()).collect();
        for i in 0..n {
            let need = tangent_lengths[i] + tangent_lengths[(i + 1) % n];
            if need >= lengths[i] {
                return Err(GeometryError::InvalidDomain(format!(
                    "rounding radius {r} is too large for edge {i}: the corner arcs would overlap"
                )));
            }
        }
        let unit = |i: usize| scale(edge(i), 1.0 / lengths[i]);
        let mut centers = Vec::with_capacity(n);
        let mut enter = Vec::with_capacity(n);
        let mut leave = Vec::with_capacity(n);
        for i in 0..n {
            let e_in = unit((i + n - 1) % n);
            let e_out = unit(i);
            let a = add(vertices[i], scale(e_out, tangent_lengths[i]));
            let b = sub(vertices[i], scale(e_in, tangent_lengths[i]));
            centers.push(add(a, scale([-e_out[1], e_out[0]], r)));
            enter.push(b);
            leave.push(a);
        }
        let mut pieces = Vec::with_capacity(2 * n);
        for i in 0..n {
            let j = (i + 1) % n;
            pieces.push(Piece::Segment { from: leave[i], to: enter[j] });
            let d = sub(enter[j], centers[j]);
            pieces.push(Piece::Arc { center: centers[j], radius: r, start: d[1].atan2(d[0]), sweep: turning[j] });
        }
        Ok(Rounding { centers, tangent_lengths, turning, pieces })
    }

    /// Counterclockwise boundary curve (planar domains only).
    pub fn boundary_curve(&self) -> Option<BoundaryCurve> {
        match self {
            DomainSpec::Interval { .. } => None,
            DomainSpec::Disk { center, radius } => Some(BoundaryCurve::Circle { center: *center, radius: *radius }),
            DomainSpec::Ellipse { center, semi_axes } => {
                Some(BoundaryCurve::Ellipse { center: *center, semi_axes: *semi_axes })
            }
            DomainSpec::RoughDisk { center, radius, amplitude, holder_exponent } => Some(BoundaryCurve::Radial {
                center: *center,
                radius: *radius,
                amplitude: *amplitude,
                exponent: *holder_exponent,
            }),
            DomainSpec::SmoothedPolygon { .. } => {
                self.rounding().ok().map(|r| BoundaryCurve::Piecewise(Piecewise::new(r.pieces)))
            }
            DomainSpec::Square { center, side } => {
                let h = 0.5 * side;
                let c = [
                    [center[0] - h, center[1] - h],
                    [center[0] + h, center[1] - h],
                    [center[0] + h, center[1] + h],
                    [center[0] - h, center[1] + h],
                ];
                let pieces = (0..4).map(|i| Piece::Segment { from: c[i], to: c[(i + 1) % 4] }).collect();
                Some(BoundaryCurve::Piecewise(Piecewise::new(pieces)))
            }
        }
    }

    /// Point from which the domain is strictly star-shaped.
    pub fn star_center(&self) -> Point {
        match self {
            DomainSpec::Interval { center, .. } => [*center, 0.0],
            DomainSpec::Disk { center, .. }
            | DomainSpec::Ellipse { center, .. }
            | DomainSpec::RoughDisk { center, .. }
            | DomainSpec::Square { center, .. } => *center,
            DomainSpec::SmoothedPolygon { vertices, .. } => {
                let n = vertices.len() as f64;
                let s = vertices.iter().fold([0.0, 0.0], |acc, v| add(acc, *v));
                scale(s, 1.0 / n)
            }
        }
    }

    /// Continuous function that is negative inside, zero on the boundary and
    /// positive outside. Exact signed distance for the interval, disk,
    /// polygon and square; a distance-like surrogate for the others.
    pub fn signed_level(&self, x: Point) -> f64 {
        match self {
            DomainSpec::SmoothedPolygon { .. } => self.level_set().signed_level(x),
            _ => level(self, &[], x),
        }
    }

    pub fn contains(&self, x: Point) -> bool {
        self.signed_level(x) <= 0.0
    }

    /// Radial projection onto the boundary from the star center, identity inside.
    pub fn retract(&self, x: Point) -> Point {
        self.level_set().retract(x)
    }

    /// Level function with its per-domain data precomputed, for repeated evaluation.
    pub fn level_set(&self) -> LevelSet {
        let inner = match self {
            DomainSpec::SmoothedPolygon { .. } => self.rounding().expect("validated polygon").centers,
            _ => Vec::new(),
        };
        LevelSet { spec: self.clone(), inner, center: self.star_center() }
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounding_box(&self) -> (Point, Point) {
        match self {
            DomainSpec::Interval { center, half_length } => ([center - half_length, 0.0], [center + half_length, 0.0]),
            DomainSpec::Disk { center, radius } | DomainSpec::RoughDisk { center, radius, .. } => {
                ([center[0] - radius, center[1] - radius], [center[0] + radius, center[1] + radius])
            }
            DomainSpec::Ellipse { center, semi_axes } => (sub(*center, *semi_axes), add(*center, *semi_axes)),
            DomainSpec::Square { center, side } => {
                let h = 0.5 * side;
                ([center[0] - h, center[1] - h], [center[0] + h, center[1] + h])
            }
            DomainSpec::SmoothedPolygon { vertices, .. } => {
                let mut lo = [f64::INFINITY; 2];
                let mut hi = [f64::NEG_INFINITY; 2];
                for v in vertices {
                    for k in 0..2 {
                        lo[k] = lo[k].min(v[k]);
                        hi[k] = hi[k].max(v[k]);
                    }
                }
                (lo, hi)
            }
        }
    }

    /// Exact measure of the domain (numerical quadrature for the rough disk).
    pub fn measure(&self) -> f64 {
        match self {
            DomainSpec::Interval { half_length, .. } => 2.0 * half_length,
            DomainSpec::Disk { radius, .. } => PI * radius * radius,
            DomainSpec::Ellipse { semi_axes, .. } => PI * semi_axes[0] * semi_axes[1],
            DomainSpec::Square { side, .. } => side * side,
            DomainSpec::RoughDisk { radius, amplitude, holder_exponent, .. } => {
                let n = 20000;
                let dth = TAU / n as f64;
                (0..n)
                    .map(|k| {
                        let th = (k as f64 + 0.5) * dth;
                        let r = radius * (1.0 - amplitude * th.sin().abs().powf(1.0 + holder_exponent));
                        0.5 * r * r * dth
                    })
                    .sum()
            }
            DomainSpec::SmoothedPolygon { vertices, rounding_radius } => {
                let rounding = self.rounding().expect("validated polygon");
                let r = *rounding_radius;
                let n = vertices.len();
                let polygon: f64 = (0..n).map(|i| 0.5 * cross(vertices[i], vertices[(i + 1) % n])).sum();
                let cut: f64 = (0..n)
                    .map(|i| rounding.tangent_lengths[i] * r - 0.5 * r * r * rounding.turning[i])
                    .sum();
                polygon - cut
            }
        }
    }

    /// Exact measure of the boundary (counting measure in 1D).
    pub fn boundary_measure(&self) -> f64 {
        match self {
            DomainSpec::Interval { .. } => 2.0,
            _ => self.boundary_curve().expect("planar domain").perimeter(),
        }
    }

    /// Points of the closed domain on a square grid of the given step, plus
    /// boundary points at roughly the same spacing.
    pub fn sample_closed(&self, step: f64) -> Vec<Point> {
        let (lo, hi) = self.bounding_box();
        let mut out = Vec::new();
        if self.dim() == 1 {
            let n = ((hi[0] - lo[0]) / step).ceil() as usize;
            for i in 0..=n {
                out.push([lo[0] + (hi[0] - lo[0]) * i as f64 / n as f64, 0.0]);
            }
            return out;
        }
        let nx = ((hi[0] - lo[0]) / step).ceil() as usize;
        let ny = ((hi[1] - lo[1]) / step).ceil() as usize;
        for j in 0..=ny {
            for i in 0..=nx {
                let x = [lo[0] + (hi[0] - lo[0]) * i as f64 / nx as f64, lo[1] + (hi[1] - lo[1]) * j as f64 / ny as f64];
                if self.contains(x) {
                    out.push(x);
                }
            }
        }
        out.extend(self.sample_boundary(step).into_iter().map(|(x, _)| x));
        out
    }

    /// Boundary points with outward normals, at roughly the given arc-length spacing.
    pub fn sample_boundary(&self, step: f64) -> Vec<(Point, Point)> {
        match self {
            DomainSpec::Interval { center, half_length } => {
                vec![([center - half_length, 0.0], [-1.0, 0.0]), ([center + half_length, 0.0], [1.0, 0.0])]
            }
            _ => {
                let curve = self.boundary_curve().expect("planar domain");
                let table = ArcLengthTable::new(&curve, 4096);
                let n = ((table.total() / step).ceil() as usize).max(8);
                (0..n)
                    .map(|k| {
                        let t = table.param_at((k as f64 + 0.5) / n as f64);
                        (curve.point(t), curve.normal(t))
                    })
                    .collect()
            }
        }
    }
}

/// Precomputed level function of a domain.
#[derive(Clone, Debug)]
pub struct LevelSet {
    spec: DomainSpec,
    inner: Vec<Point>,
    center: Point,
}

impl LevelSet {
    pub fn signed_level(&self, x: Point) -> f64 {
        level(&self.spec, &self.inner, x)
    }

    pub fn contains(&self, x: Point) -> bool {
        self.signed_level(x) <= 0.0
    }

    /// Radial projection onto the boundary from the star center, identity inside.
    pub fn retract(&self, x: Point) -> Point {
        if self.signed_level(x) <= 0.0 {
            return x;
        }
        let c = self.center;
        let d = sub(x, c);
        if let DomainSpec::Interval { center, half_length } = self.spec {
            return [center + half_length * (x[0] - center).signum(), 0.0];
        }
        if let DomainSpec::Disk { radius, .. } = self.spec {
            return add(c, scale(d, radius / norm(d)));
        }
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for _ in 0..64 {
            let mid = 0.5 * (lo + hi);
            if self.signed_level(add(c, scale(d, mid))) <= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        add(c, scale(d, lo))
    }
}

fn level(spec: &DomainSpec, inner: &[Point], x: Point) -> f64 {
    match spec {
        DomainSpec::Interval { center, half_length } => (x[0] - center).abs() - half_length,
        DomainSpec::Disk { center, radius } => norm(sub(x, *center)) - radius,
        DomainSpec::Ellipse { center, semi_axes } => {
            let d = sub(x, *center);
            let g = (d[0] / semi_axes[0]).powi(2) + (d[1] / semi_axes[1]).powi(2);
            (g.sqrt() - 1.0) * semi_axes[0].min(semi_axes[1])
        }
        DomainSpec::RoughDisk { center, radius, amplitude, holder_exponent } => {
            let d = sub(x, *center);
            let th = d[1].atan2(d[0]);
            let r = radius * (1.0 - amplitude * th.sin().abs().powf(1.0 + holder_exponent));
            norm(d) - r
        }
        DomainSpec::Square { center, side } => {
            let d = sub(x, *center);
            let h = 0.5 * side;
            let q = [d[0].abs() - h, d[1].abs() - h];
            let outside = norm([q[0].max(0.0), q[1].max(0.0)]);
            outside + q[0].max(q[1]).min(0.0)
        }
        DomainSpec::SmoothedPolygon { rounding_radius, .. } => convex_signed_distance(inner, x) - rounding_radius,
    }
}

/// Signed distance to a convex polygon with counterclockwise vertices.
fn convex_signed_distance(poly: &[Point], x: Point) -> f64 {
    let n = poly.len();
    let mut inside = true;
    let mut min_line = f64::INFINITY;
    let mut min_seg = f64::INFINITY;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let e = sub(b, a);
        let l = norm(e);
        let w = sub(x, a);
        let signed = cross(e, w) / l;
        if signed < 0.0 {
            inside = false;
        }
        min_line = min_line.min(signed);
        let t = (dot(w, e) / (l * l)).clamp(0.0, 1.0);
        min_seg = min_seg.min(norm(sub(w, scale(e, t))));
    }
    if inside {
        -min_line
    } else {
        min_seg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nonpositive_lengths() {
        assert!(DomainSpec::disk(0.0).validate().is_err());
        assert!(DomainSpec::interval(-1.0).validate().is_err());
        assert!(DomainSpec::ellipse(1.0, f64::NAN).validate().is_err());
        assert!(DomainSpec::square(1.0).validate().is_ok());
    }

    #[test]
    fn rounding_radius_must_fit() {
        let err = DomainSpec::smoothed_square(1.0, 0.5).validate().unwrap_err();
        assert!(err.to_string().contains("half the shortest edge"), "{err}");
        assert!(DomainSpec::smoothed_square(1.0, 0.49).validate().is_ok());
        // Acute corners need longer tangent segments than the half-edge rule allows for.
        let tri = DomainSpec::SmoothedPolygon { vertices: vec![[0.0, 0.0], [1.0, 0.0], [0.5, 0.866]], rounding_radius: 0.45 };
        assert!(tri.validate().unwrap_err().to_string().contains("overlap"));
    }

    #[test]
    fn clockwise_polygon_is_rejected() {
        let cw = DomainSpec::SmoothedPolygon {
            vertices: vec![[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]],
            rounding_radius: 0.1,
        };
        assert!(cw.validate().is_err());
    }

    #[test]
    fn rough_disk_amplitude_checked() {
        assert!(DomainSpec::rough_disk(1.0, 1.0, 0.5).validate().is_err());
        assert!(DomainSpec::rough_disk(1.0, 0.2, 0.0).validate().is_err());
        assert!(DomainSpec::rough_disk(1.0, 0.2, 0.5).validate().is_ok());
    }

    #[test]
    fn smoothed_square_measures() {
        let d = DomainSpec::smoothed_square(1.0, 0.2);
        let r: f64 = 0.2;
        assert!((d.measure() - (1.0 - (4.0 - PI) * r * r)).abs() < 1e-14);
        assert!((d.boundary_measure() - (4.0 - 8.0 * r + TAU * r)).abs() < 1e-12);
    }

    #[test]
    fn signed_level_vanishes_on_boundary() {
        for spec in [
            DomainSpec::disk(1.3),
            DomainSpec::ellipse(1.5, 0.7),
            DomainSpec::smoothed_square(2.0, 0.3),
            DomainSpec::rough_disk(1.0, 0.15, 0.5),
            DomainSpec::square(1.0),
        ] {
            for (x, n) in spec.sample_boundary(0.05) {
                assert!(spec.signed_level(x).abs() < 1e-12, "{spec:?} at {x:?}");
                assert!(spec.signed_level(add(x, scale(n, 0.01))) > 0.0);
                assert!(spec.signed_level(sub(x, scale(n, 0.01))) < 0.0);
            }
        }
    }

    #[test]
    fn retraction_lands_on_boundary() {
        let spec = DomainSpec::smoothed_square(1.0, 0.2);
        let y = spec.retract([2.0, 0.7]);
        assert!(spec.signed_level(y).abs() < 1e-12);
        assert_eq!(spec.retract([0.1, 0.1]), [0.1, 0.1]);
    }

    #[test]
    fn kind_round_trips_through_strings() {
        for k in DomainKind::ALL {
            assert_eq!(k.name().parse::<DomainKind>().unwrap(), k);
        }
        assert_eq!("rough-disk".parse::<DomainKind>().unwrap(), DomainKind::RoughDisk);
    }
}
