use super::chart::Chart;
use super::curve::ArcLengthTable;
use super::domain::DomainSpec;
use super::{smoothstep, GeometryError, Point};

/// A boundary point with its outward unit normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundarySample {
    pub point: Point,
    pub normal: Point,
}

/// Weight of the interior patch: zero within `outer` of the boundary, one
/// beyond `inner`, quintic in between.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InteriorBump {
    pub outer: f64,
    pub inner: f64,
}

impl InteriorBump {
    fn raw(&self, depth: f64) -> f64 {
        smoothstep((depth - self.outer) / (self.inner - self.outer))
    }
}

/// Profile of a chart weight along one box coordinate `s = |y_k| / a_k`.
fn box_profile(s: f64) -> f64 {
    if s <= 0.5 {
        1.0
    } else {
        1.0 - smoothstep((s - 0.5) / 0.4)
    }
}

/// Partition of unity on the closed domain made of an interior bump `psi_0`
/// and one weight per boundary chart, normalized by their pointwise sum.
#[derive(Clone, Debug)]
pub struct PartitionOfUnity {
    domain: DomainSpec,
    charts: Vec<Chart>,
    interior: InteriorBump,
}

impl PartitionOfUnity {
    /// `count` charts centered at equally spaced boundary points, each covering
    /// three quarters of the spacing on either side.
    pub fn for_domain(domain: &DomainSpec, count: usize) -> Result<Self, GeometryError> {
        domain.validate()?;
        if !domain.is_c1() {
            return Err(GeometryError::NotC1(domain.kind()));
        }
        let Some(curve) = domain.boundary_curve() else {
            return Err(GeometryError::InvalidDomain("charts are only built for planar domains".into()));
        };
        if count < 3 {
            return Err(GeometryError::InvalidChart("at least 3 charts are needed to cover a closed curve".into()));
        }
        let table = ArcLengthTable::new(&curve, 8192);
        let mut charts = Vec::with_capacity(count);
        for k in 0..count {
            let f = k as f64 / count as f64;
            let t = table.param_at(f);
            let spread = 0.75 / count as f64;
            let t_lo = table.param_at(f - spread);
            let t_hi = table.param_at(f + spread);
            let unwrap = |a: f64| if a > t { a - 1.0 } else { a };
            let lo = unwrap(t_lo);
            let hi = if t_hi < t { t_hi + 1.0 } else { t_hi };
            let span = (t - lo).min(hi - t);
            charts.push(Chart::on_curve(&curve, t, span)?);
        }
        Self::new(domain.clone(), charts)
    }

    pub fn new(domain: DomainSpec, charts: Vec<Chart>) -> Result<Self, GeometryError> {
        let a2_min = charts.iter().map(|c| c.half_widths()[1]).fold(f64::INFINITY, f64::min);
        let interior = InteriorBump { outer: 0.1 * a2_min, inner: 0.35 * a2_min };
        let pu = PartitionOfUnity { domain, charts, interior };
        pu.check_coverage()?;
        Ok(pu)
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn charts(&self) -> &[Chart] {
        &self.charts
    }

    pub fn interior(&self) -> InteriorBump {
        self.interior
    }

    /// Unnormalized weight of chart `j` at `x`; zero outside its box.
    pub fn chart_raw(&self, j: usize, x: Point) -> f64 {
        let c = &self.charts[j];
        let y = c.to_local(x);
        let [a1, a2] = c.half_widths();
        box_profile(y[0].abs() / a1) * box_profile(y[1].abs() / a2)
    }

    pub fn interior_raw(&self, x: Point) -> f64 {
        self.interior.raw(-self.domain.signed_level(x))
    }

    /// Normalized weights `[psi_0, psi_1, ..., psi_m]`; all zero where no
    /// patch is active (only possible outside the closed domain).
    pub fn weights(&self, x: Point) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.charts.len() + 1);
        w.push(self.interior_raw(x));
        w.extend((0..self.charts.len()).map(|j| self.chart_raw(j, x)));
        let total: f64 = w.iter().sum();
        if total > 0.0 {
            w.iter_mut().for_each(|v| *v /= total);
        }
        w
    }

    /// Blend of the chart normals `sum_j psi_j nu_j`, together with the weight
    /// sum over the charts.
    pub(crate) fn blend(&self, x: Point) -> (Point, f64) {
        let mut total = self.interior_raw(x);
        let mut acc = [0.0, 0.0];
        let mut chart_total = 0.0;
        for (j, c) in self.charts.iter().enumerate() {
            let r = self.chart_raw(j, x);
            if r > 0.0 {
                let n = c.normal_at(x);
                acc[0] += r * n[0];
                acc[1] += r * n[1];
                chart_total += r;
            }
        }
        total += chart_total;
        if total > 0.0 {
            ([acc[0] / total, acc[1] / total], chart_total / total)
        } else {
            ([0.0, 0.0], 0.0)
        }
    }

    /// Boundary samples at roughly `step` spacing.
    pub fn boundary_samples(&self, step: f64) -> Vec<BoundarySample> {
        self.domain.sample_boundary(step).into_iter().map(|(point, normal)| BoundarySample { point, normal }).collect()
    }

    fn check_coverage(&self) -> Result<(), GeometryError> {
        let step = self.interior.outer.min(0.01 * self.domain.boundary_measure());
        for s in self.boundary_samples(step) {
            if !self.charts.iter().any(|c| c.contains(s.point)) {
                return Err(GeometryError::Uncovered(s.point));
            }
        }
        for x in self.domain.sample_closed(self.interior.outer) {
            let w = self.weights(x);
            if w.iter().sum::<f64>() == 0.0 {
                return Err(GeometryError::Uncovered(x));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform_points(spec: &DomainSpec, n: usize, seed: u64) -> Vec<Point> {
        let (lo, hi) = spec.bounding_box();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let x = [rng.random_range(lo[0]..=hi[0]), rng.random_range(lo[1]..=hi[1])];
            if spec.contains(x) {
                out.push(x);
            }
        }
        out
    }

    #[test]
    fn weights_sum_to_one_on_the_closed_domain() {
        for spec in [DomainSpec::disk(1.0), DomainSpec::smoothed_square(2.0, 0.35), DomainSpec::rough_disk(1.0, 0.1, 0.5)] {
            let pu = PartitionOfUnity::for_domain(&spec, 16).unwrap();
            let mut pts = uniform_points(&spec, 1000, 7);
            pts.extend(pu.boundary_samples(0.05).iter().map(|s| s.point));
            for x in pts {
                let w = pu.weights(x);
                assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(w.iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }

    #[test]
    fn chart_weights_vanish_outside_their_boxes() {
        let spec = DomainSpec::ellipse(1.25, 0.8);
        let pu = PartitionOfUnity::for_domain(&spec, 12).unwrap();
        for x in uniform_points(&spec, 2000, 3) {
            let w = pu.weights(x);
            for (j, c) in pu.charts().iter().enumerate() {
                if !c.contains(x) {
                    assert_eq!(w[j + 1], 0.0);
                }
            }
            if spec.signed_level(x) > -pu.interior().outer {
                assert_eq!(w[0], 0.0);
            }
        }
    }

    #[test]
    fn four_charts_cover_the_disk() {
        assert!(PartitionOfUnity::for_domain(&DomainSpec::disk(1.0), 4).is_ok());
    }

    #[test]
    fn square_has_no_charts() {
        assert!(matches!(PartitionOfUnity::for_domain(&DomainSpec::unit_square(), 8), Err(GeometryError::NotC1(_))));
    }
}
