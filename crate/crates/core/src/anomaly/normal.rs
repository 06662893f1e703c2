//! Standard normal distribution and two-sided p-value ↔ σ conversions.

#![allow(clippy::excessive_precision)]

use std::f64::consts::SQRT_2;

use libm::erfc;

/// Φ(x).
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// 1 − Φ(x), accurate deep into the upper tail.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

// AS241 coefficients, highest degree first.
const CENTRAL_NUM: [f64; 8] = [
    2.509_080_928_730_122_7e3,
    3.343_057_558_358_812_8e4,
    6.726_577_092_700_870_1e4,
    4.592_195_393_154_987_1e4,
    1.373_169_376_550_946_1e4,
    1.971_590_950_306_551_4e3,
    1.331_416_678_917_843_8e2,
    3.387_132_872_796_366_6,
];
const CENTRAL_DEN: [f64; 8] = [
    5.226_495_278_852_854_6e3,
    2.872_908_573_572_194_3e4,
    3.930_789_580_009_271_1e4,
    2.121_379_430_158_659_6e4,
    5.394_196_021_424_751_1e3,
    6.871_870_074_920_579_1e2,
    4.231_333_070_160_091_1e1,
    1.0,
];
const NEAR_NUM: [f64; 8] = [
    7.745_450_142_783_414_1e-4,
    2.272_384_498_926_918_5e-2,
    2.417_807_251_774_506_1e-1,
    1.270_458_252_452_368_4,
    3.647_848_324_763_204_6,
    5.769_497_221_460_691_4,
    4.630_337_846_156_545_3,
    1.423_437_110_749_683_6,
];
const NEAR_DEN: [f64; 8] = [
    1.050_750_071_644_416_8e-9,
    5.475_938_084_995_344_9e-4,
    1.519_866_656_361_645_7e-2,
    1.481_039_764_274_800_7e-1,
    6.897_673_349_851_000_0e-1,
    1.676_384_830_183_803_8,
    2.053_191_626_637_758_8,
    1.0,
];
const FAR_NUM: [f64; 8] = [
    2.010_334_399_292_288_1e-7,
    2.711_555_568_743_487_6e-5,
    1.242_660_947_388_078_4e-3,
    2.653_218_952_657_612_3e-2,
    2.965_605_718_285_048_9e-1,
    1.784_826_539_917_291_3,
    5.463_784_911_164_114_4,
    6.657_904_643_501_103_8,
];
const FAR_DEN: [f64; 8] = [
    2.044_263_103_389_939_8e-15,
    1.421_511_758_316_445_9e-7,
    1.846_318_317_510_054_7e-5,
    7.868_691_311_456_132_6e-4,
    1.487_536_129_085_061_5e-2,
    1.369_298_809_227_358_1e-1,
    5.998_322_065_558_879_4e-1,
    1.0,
];

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().fold(0.0, |acc, c| acc * x + c)
}

/// Φ⁻¹(p) by Wichura's AS241 (PPND16), relative accuracy about 1e-16.
pub fn normal_quantile(p: f64) -> f64 {
    if p.is_nan() || !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * horner(&CENTRAL_NUM, r) / horner(&CENTRAL_DEN, r);
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let r = (-tail.ln()).sqrt();
    let x = if r <= 5.0 {
        let r = r - 1.6;
        horner(&NEAR_NUM, r) / horner(&NEAR_DEN, r)
    } else {
        let r = r - 5.0;
        horner(&FAR_NUM, r) / horner(&FAR_DEN, r)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

/// Two-sided tail probability of a signed z: `2·(1 − Φ(|z|))`.
pub fn two_sided_p(z: f64) -> f64 {
    (2.0 * normal_sf(z.abs())).min(1.0)
}

/// Inverse of [`two_sided_p`]: `Φ⁻¹(1 − p/2)`, evaluated as `−Φ⁻¹(p/2)`.
pub fn sigma_from_two_sided_p(p: f64) -> f64 {
    if p >= 1.0 {
        return 0.0;
    }
    if p <= 0.0 {
        return f64::INFINITY;
    }
    (-normal_quantile(0.5 * p)).max(0.0)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use statrs::distribution::{ContinuousCDF, Normal};

    #[test]
    fn known_quantiles() {
        assert_eq!(normal_quantile(0.5), 0.0);
        assert!((normal_quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-14);
        assert!((normal_quantile(1e-10) + 6.361_340_902_404_056).abs() < 1e-12);
        assert!((normal_quantile(1e-300) + 37.047_096_299_361_2).abs() < 1e-9);
    }

    #[test]
    fn agrees_with_independent_inverse() {
        let reference = Normal::standard();
        for k in 1..2000 {
            let p = k as f64 / 2000.0;
            assert!((normal_quantile(p) - reference.inverse_cdf(p)).abs() < 1e-10, "p={p}");
        }
    }

    #[test]
    fn cdf_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15, "{:e}", normal_cdf(1.0) - 0.841_344_746_068_542_9);
        assert!((normal_sf(6.0) - 9.865_876_450_376_981e-10).abs() < 1e-22);
    }

    #[test]
    fn four_sigma_two_sided() {
        let p = two_sided_p(4.0);
        assert!((p - 6.334_248_366_623_984e-5).abs() < 1e-17, "{:e}", p - 6.334_248_366_623_984e-5);
        assert!((sigma_from_two_sided_p(p) - 4.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn quantile_inverts_cdf(x in -8.0f64..3.0) {
            let p = normal_cdf(x);
            prop_assume!(p > 0.0 && p < 1.0);
            prop_assert!((normal_quantile(p) - x).abs() < 1e-9 * (1.0 + x.abs()));
        }

        #[test]
        fn sigma_round_trip(z in 0.0f64..30.0) {
            let back = sigma_from_two_sided_p(two_sided_p(z));
            prop_assert!((back - z).abs() < 1e-9 * (1.0 + z));
        }
    }
}
