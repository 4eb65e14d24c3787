//! Fixed quadrature rules on reference cells.

/// Degree-4 rule on the triangle: barycentric coordinates and weights summing to one.
pub const TRIANGLE_D4: [([f64; 3], f64); 6] = {
    const A: f64 = 0.445_948_490_915_964_886_32;
    const WA: f64 = 0.223_381_589_678_011_465_70;
    const B: f64 = 0.091_576_213_509_770_743_46;
    const WB: f64 = 0.109_951_743_655_321_867_64;
    [
        ([A, A, 1.0 - 2.0 * A], WA),
        ([A, 1.0 - 2.0 * A, A], WA),
        ([1.0 - 2.0 * A, A, A], WA),
        ([B, B, 1.0 - 2.0 * B], WB),
        ([B, 1.0 - 2.0 * B, B], WB),
        ([1.0 - 2.0 * B, B, B], WB),
    ]
};

/// Three-point Gauss rule on [0, 1]: (position, weight), exact to degree 5.
pub const SEGMENT_GAUSS3: [(f64, f64); 3] = [
    (0.112_701_665_379_258_31, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887_298_334_620_741_69, 5.0 / 18.0),
];

/// Four-point Gauss-Legendre rule on [0, 1], exact to degree 7.
pub const SEGMENT_GAUSS4: [(f64, f64); 4] = [
    (0.069_431_844_202_973_71, 0.173_927_422_568_726_93),
    (0.330_009_478_207_571_87, 0.326_072_577_431_273_07),
    (0.669_990_521_792_428_13, 0.326_072_577_431_273_07),
    (0.930_568_155_797_026_29, 0.173_927_422_568_726_93),
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_rule_integrates_quartics() {
        // Integral of l0^i l1^j l2^k over the reference triangle (area 1/2) is i! j! k! / (i + j + k + 2)!.
        let fact = |n: u32| (1..=n).product::<u32>().max(1) as f64;
        for i in 0..=4u32 {
            for j in 0..=(4 - i) {
                let k = 4 - i - j;
                let q: f64 = TRIANGLE_D4
                    .iter()
                    .map(|(l, w)| w * l[0].powi(i as i32) * l[1].powi(j as i32) * l[2].powi(k as i32))
                    .sum::<f64>()
                    * 0.5;
                let exact = fact(i) * fact(j) * fact(k) / fact(i + j + k + 2);
                assert!((q - exact).abs() < 1e-15, "{i} {j} {k}");
            }
        }
    }

    #[test]
    fn segment_rules_integrate_their_degree() {
        for d in 0..=7 {
            let g4: f64 = SEGMENT_GAUSS4.iter().map(|(x, w)| w * x.powi(d)).sum();
            assert!((g4 - 1.0 / (d as f64 + 1.0)).abs() < 1e-15);
            if d <= 5 {
                let g3: f64 = SEGMENT_GAUSS3.iter().map(|(x, w)| w * x.powi(d)).sum();
                assert!((g3 - 1.0 / (d as f64 + 1.0)).abs() < 1e-15);
            }
        }
    }
}
