//! Standard normal density, distribution function and quantile.
//!
//! The quantile uses Wichura's AS241 (PPND16) rational approximations, whose
//! relative error is about 1e-16 across the double precision range.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_677_939_946_059_934_381_868;

/// Bound on |z| beyond which `Φ(z)` is 0 or 1 in double precision (up to
/// subnormals).
pub const GAUSSIAN_Z_LIMIT: f64 = 38.5;

#[inline]
pub fn norm_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

#[inline]
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

#[inline]
pub fn norm_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z * FRAC_1_SQRT_2)
}

#[inline]
fn poly(c: &[f64; 8], x: f64) -> f64 {
    let mut acc = c[7];
    for k in (0..7).rev() {
        acc = acc * x + c[k];
    }
    acc
}

const A: [f64; 8] = [
    3.387_132_872_796_366_608_0,
    1.331_416_678_917_843_774_5e2,
    1.971_590_950_306_551_442_7e3,
    1.373_169_376_550_946_112_5e4,
    4.592_195_393_154_987_145_7e4,
    6.726_577_092_700_870_085_3e4,
    3.343_057_558_358_812_810_5e4,
    2.509_080_928_730_122_672_7e3,
];
const B: [f64; 8] = [
    1.0,
    4.231_333_070_160_091_125_2e1,
    6.871_870_074_920_579_083_0e2,
    5.394_196_021_424_751_107_7e3,
    2.121_379_430_158_659_586_7e4,
    3.930_789_580_009_271_061_0e4,
    2.872_908_573_572_194_267_4e4,
    5.226_495_278_852_854_561_0e3,
];
const C: [f64; 8] = [
    1.423_437_110_749_683_577_34,
    4.630_337_846_156_545_295_90,
    5.769_497_221_460_691_405_50,
    3.647_848_324_763_204_605_04,
    1.270_458_252_452_368_382_58,
    2.417_807_251_774_506_117_70e-1,
    2.272_384_498_926_918_458_33e-2,
    7.745_450_142_783_414_076_40e-4,
];
const D: [f64; 8] = [
    1.0,
    2.053_191_626_637_758_821_87,
    1.676_384_830_183_803_849_40,
    6.897_673_349_851_000_045_50e-1,
    1.481_039_764_274_800_745_90e-1,
    1.519_866_656_361_645_719_66e-2,
    5.475_938_084_995_344_946_00e-4,
    1.050_750_071_644_416_843_24e-9,
];
const E: [f64; 8] = [
    6.657_904_643_501_103_777_20,
    5.463_784_911_164_114_369_90,
    1.784_826_539_917_291_335_80,
    2.965_605_718_285_048_912_30e-1,
    2.653_218_952_657_612_309_30e-2,
    1.242_660_947_388_078_438_60e-3,
    2.711_555_568_743_487_578_15e-5,
    2.010_334_399_292_288_132_65e-7,
];
const F: [f64; 8] = [
    1.0,
    5.998_322_065_558_879_376_90e-1,
    1.369_298_809_227_358_053_10e-1,
    1.487_536_129_085_061_485_25e-2,
    7.868_691_311_456_132_591_00e-4,
    1.846_318_317_510_054_681_80e-5,
    1.421_511_758_316_445_888_70e-7,
    2.044_263_103_389_939_785_64e-15,
];

// Lower half only: 0 < u <= 1/2.
#[inline]
fn ppf_lower(u: f64) -> f64 {
    let q = u - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180_625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let r = (-u.ln()).sqrt();
    let z = if r <= 5.0 {
        let r = r - 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        let r = r - 5.0;
        poly(&E, r) / poly(&F, r)
    };
    -z
}

/// Standard normal quantile without argument checks.
///
/// Returns `-inf`/`+inf` at 0 and 1 and NaN outside `[0, 1]`. Antisymmetry
/// `norm_ppf(1-u) == -norm_ppf(u)` holds exactly because the upper half is
/// computed by reflection.
#[inline]
pub fn norm_ppf(u: f64) -> f64 {
    if !(0.0..=1.0).contains(&u) {
        return f64::NAN;
    }
    if u == 0.0 {
        return f64::NEG_INFINITY;
    }
    if u == 1.0 {
        return f64::INFINITY;
    }
    if u > 0.5 {
        -ppf_lower(1.0 - u)
    } else {
        ppf_lower(u)
    }
}

/// Inverse survival function `Φ⁻¹(1-v)` evaluated without forming `1-v`.
#[inline]
pub fn norm_isf(v: f64) -> f64 {
    -norm_ppf(v)
}

/// Checked standard normal quantile.
pub fn gaussian_inv_cdf(u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Domain(format!(
            "gaussian quantile needs 0 < u < 1, got {u}"
        )));
    }
    Ok(norm_ppf(u))
}

/// Stateless Gaussian reference distribution.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GaussianRef;

impl super::ContinuousDist for GaussianRef {
    fn cdf(&self, x: f64) -> f64 {
        norm_cdf(x)
    }
    fn sf(&self, x: f64) -> f64 {
        norm_sf(x)
    }
    fn pdf(&self, x: f64) -> f64 {
        norm_pdf(x)
    }
    fn quantile(&self, u: f64) -> Result<f64> {
        gaussian_inv_cdf(u)
    }
    fn isf(&self, v: f64) -> Result<f64> {
        gaussian_inv_cdf(v).map(|z| -z)
    }
    fn to_x(&self, s: f64) -> (f64, f64) {
        (s, 1.0)
    }
    fn from_x(&self, x: f64) -> f64 {
        x
    }
    fn s_bounds(&self) -> (f64, f64) {
        (-GAUSSIAN_Z_LIMIT, GAUSSIAN_Z_LIMIT)
    }
}

/// `∫_z^∞ (s-z)^p φ(s) ds` for small integer `p`, by the recursion
/// `I_p = (p-1) I_{p-2} - z I_{p-1}` with `I_0 = 1-Φ(z)`, `I_1 = φ(z) - z(1-Φ(z))`.
///
/// The recursion loses accuracy for large z through cancellation, so this
/// is only used for moderate arguments; callers needing tails should
/// integrate numerically.
pub fn gaussian_tail_moment_recursive(p: u32, z: f64) -> f64 {
    let i0 = norm_sf(z);
    if p == 0 {
        return i0;
    }
    let mut prev = i0;
    let mut cur = norm_pdf(z) - z * i0;
    for k in 2..=p {
        let next = (k as f64 - 1.0) * prev - z * cur;
        prev = cur;
        cur = next;
    }
    cur
}

/// `√(2/π)`, the mean of the half-normal distribution.
pub fn half_normal_mean() -> f64 {
    (2.0 / PI).sqrt()
}
