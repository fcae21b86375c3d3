//! Hot-path evaluation of approximate inverse distribution functions.
//!
//! All evaluators work on batches (`&[f64]` in, `&mut [f64]` out). The inner
//! loops avoid data-dependent control flow: the reflection about ½ is a
//! `min`, the sign correction is a bit flip and the interval index comes
//! from the exponent bits, clamped with `min`.

mod ncchi2;
mod uniform;

pub use ncchi2::{eval_ncchi2, eval_ncchi2_varying, NcChi2Slice};
pub use uniform::{word_to_unit, UniformStream};

use crate::error::{Error, Result};
use crate::exact_dist::norm_ppf;
use crate::fit::{ConstantTable, DyadicPolyTable};

const F64_MANTISSA_BITS: u32 = 52;
const F64_BIAS: i64 = 1023;
const F32_MANTISSA_BITS: u32 = 23;
const F32_BIAS: i32 = 127;

/// Interval index of `v ∈ (0, ½]` in a decay-rate-½ table with `max_index`
/// intervals, read from the exponent bits.
///
/// `v = 2^-n` maps to `n - 1`, so `½` maps to the zero entry. Anything below
/// `2^-(max_index+1)`, subnormals included, lands in the last interval.
#[inline(always)]
pub fn dyadic_index(v: f64, max_index: usize) -> usize {
    let biased = (v.to_bits() >> F64_MANTISSA_BITS) as i64;
    let idx = ((F64_BIAS - 1) - biased).max(0) as usize;
    idx.min(max_index)
}

/// Single-precision counterpart of [`dyadic_index`].
#[inline(always)]
pub fn dyadic_index_f32(v: f32, max_index: usize) -> usize {
    let biased = (v.to_bits() >> F32_MANTISSA_BITS) as i32;
    let idx = ((F32_BIAS - 1) - biased).max(0) as usize;
    idx.min(max_index)
}

/// A batch inverse distribution function.
pub trait InverseCdf: Sync {
    fn eval_batch(&self, u: &[f64], out: &mut [f64]);

    /// Scalar convenience wrapper, mainly for tests.
    fn eval(&self, u: f64) -> f64 {
        let mut out = [0.0];
        self.eval_batch(&[u], &mut out);
        out[0]
    }

    fn eval_vec(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        self.eval_batch(u, &mut out);
        out
    }
}

/// `values[⌊2^q u⌋]` for every element.
pub fn eval_constant(table: &ConstantTable, u: &[f64], out: &mut [f64]) {
    assert_eq!(
        u.len(),
        out.len(),
        "input and output batches differ in length"
    );
    let values = table.values();
    let n = values.len() as f64;
    let last = values.len() - 1;
    for (o, &x) in out.iter_mut().zip(u) {
        debug_assert!(x > 0.0 && x < 1.0, "u={x} outside (0, 1)");
        *o = values[((n * x) as usize).min(last)];
    }
}

#[inline(always)]
pub(crate) fn horner_row(rows: &[Vec<f64>], i: usize, v: f64) -> f64 {
    let (last, rest) = rows.split_last().expect("at least one coefficient row");
    let mut z = last[i];
    for row in rest.iter().rev() {
        z = z * v + row[i];
    }
    z
}

/// Evaluates an antisymmetric dyadic table: reflect to `v = min(u, 1 - u)`,
/// evaluate the half-table, and negate when `u >= ½`.
///
/// Tables with decay rate ½ use the exponent-bit index. Other decay rates
/// fall back to an arithmetic index, which is correct but not branch-free.
pub fn eval_dyadic(table: &DyadicPolyTable, u: &[f64], out: &mut [f64]) {
    assert_eq!(
        u.len(),
        out.len(),
        "input and output batches differ in length"
    );
    let rows = table.coeffs();
    let k = table.n_intervals();
    if table.decay_rate() == 0.5 {
        for (o, &x) in out.iter_mut().zip(u) {
            debug_assert!(x > 0.0 && x < 1.0, "u={x} outside (0, 1)");
            // Predicate u < ½ as a mask: 0 below ½, the sign bit otherwise.
            let flip = ((x >= 0.5) as u64) << 63;
            let v = x.min(1.0 - x);
            let z = horner_row(rows, dyadic_index(v, k), v);
            *o = f64::from_bits(z.to_bits() ^ flip);
        }
    } else {
        for (o, &x) in out.iter_mut().zip(u) {
            let flip = ((x >= 0.5) as u64) << 63;
            let v = x.min(1.0 - x);
            let z = horner_row(rows, table.index_of(v), v);
            *o = f64::from_bits(z.to_bits() ^ flip);
        }
    }
}

/// A dyadic table held in single precision, mirroring a 32-bit kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadicPolyTableF32 {
    n_intervals: usize,
    coeffs: Vec<Vec<f32>>,
}

impl DyadicPolyTableF32 {
    /// Rounds a decay-rate-½ table to single precision. The interval count
    /// must stay within the normal `f32` range.
    pub fn from_f64(table: &DyadicPolyTable) -> Result<Self> {
        if table.decay_rate() != 0.5 {
            return Err(Error::Config(
                "single-precision tables require decay rate 1/2".into(),
            ));
        }
        if table.n_intervals() > 120 {
            return Err(Error::Config(
                "single-precision tables support at most 120 intervals".into(),
            ));
        }
        let coeffs = table
            .coeffs()
            .iter()
            .map(|row| row.iter().map(|&c| c as f32).collect())
            .collect();
        Ok(Self {
            n_intervals: table.n_intervals(),
            coeffs,
        })
    }

    pub fn n_intervals(&self) -> usize {
        self.n_intervals
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }
}

/// Single-precision [`eval_dyadic`].
pub fn eval_dyadic_f32(table: &DyadicPolyTableF32, u: &[f32], out: &mut [f32]) {
    assert_eq!(
        u.len(),
        out.len(),
        "input and output batches differ in length"
    );
    let rows = &table.coeffs;
    let k = table.n_intervals;
    let (last, rest) = rows.split_last().expect("at least one coefficient row");
    for (o, &x) in out.iter_mut().zip(u) {
        let flip = ((x >= 0.5) as u32) << 31;
        let v = x.min(1.0 - x);
        let i = dyadic_index_f32(v, k);
        let mut z = last[i];
        for row in rest.iter().rev() {
            z = z * v + row[i];
        }
        *o = f32::from_bits(z.to_bits() ^ flip);
    }
}

impl InverseCdf for ConstantTable {
    fn eval_batch(&self, u: &[f64], out: &mut [f64]) {
        eval_constant(self, u, out)
    }
}

impl InverseCdf for DyadicPolyTable {
    fn eval_batch(&self, u: &[f64], out: &mut [f64]) {
        eval_dyadic(self, u, out)
    }
}

impl InverseCdf for DyadicPolyTableF32 {
    fn eval_batch(&self, u: &[f64], out: &mut [f64]) {
        let u32: Vec<f32> = u.iter().map(|&x| x as f32).collect();
        let mut o32 = vec![0f32; u.len()];
        eval_dyadic_f32(self, &u32, &mut o32);
        for (o, z) in out.iter_mut().zip(o32) {
            *o = z as f64;
        }
    }
}

/// The exact Gaussian quantile as a batch evaluator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExactGaussian;

impl InverseCdf for ExactGaussian {
    fn eval_batch(&self, u: &[f64], out: &mut [f64]) {
        assert_eq!(
            u.len(),
            out.len(),
            "input and output batches differ in length"
        );
        for (o, &x) in out.iter_mut().zip(u) {
            *o = norm_ppf(x);
        }
    }
}

/// The Gaussian samplers the simulation layer can choose between.
#[derive(Debug, Clone, PartialEq)]
pub enum GaussianSampler {
    Exact,
    Constant(ConstantTable),
    Dyadic(DyadicPolyTable),
    DyadicF32(DyadicPolyTableF32),
}

impl GaussianSampler {
    pub fn is_exact(&self) -> bool {
        matches!(self, GaussianSampler::Exact)
    }

    pub fn label(&self) -> String {
        match self {
            GaussianSampler::Exact => "exact".into(),
            GaussianSampler::Constant(t) => {
                format!("constant-{}-q{}", t.construction().name(), t.q())
            }
            GaussianSampler::Dyadic(t) => format!("dyadic-m{}-k{}", t.degree(), t.n_intervals()),
            GaussianSampler::DyadicF32(t) => {
                format!("dyadic32-m{}-k{}", t.degree(), t.n_intervals())
            }
        }
    }
}

impl InverseCdf for GaussianSampler {
    fn eval_batch(&self, u: &[f64], out: &mut [f64]) {
        match self {
            GaussianSampler::Exact => ExactGaussian.eval_batch(u, out),
            GaussianSampler::Constant(t) => eval_constant(t, u, out),
            GaussianSampler::Dyadic(t) => eval_dyadic(t, u, out),
            GaussianSampler::DyadicF32(t) => t.eval_batch(u, out),
        }
    }
}

/// An exact Gaussian and its approximation driven by one uniform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianSamplePair {
    pub z_exact: f64,
    pub z_approx: f64,
}

/// Draws `n` coupled pairs: `Φ⁻¹(U)` and `table(U)` from the same `U`.
pub fn sample_coupled(
    stream: &mut UniformStream,
    table: &dyn InverseCdf,
    n: usize,
) -> Vec<GaussianSamplePair> {
    let u = stream.take_vec(n);
    let approx = table.eval_vec(&u);
    u.iter()
        .zip(approx)
        .map(|(&x, z_approx)| GaussianSamplePair {
            z_exact: norm_ppf(x),
            z_approx,
        })
        .collect()
}

/// The pair produced by one given uniform.
pub fn coupled_pair(u: f64, table: &dyn InverseCdf) -> GaussianSamplePair {
    GaussianSamplePair {
        z_exact: norm_ppf(u),
        z_approx: table.eval(u),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::{fit_constant, fit_dyadic_table, fit_gaussian_dyadic, Construction, FnTarget};
    use proptest::prelude::*;

    // Index by repeated comparison against exact powers of two.
    fn reference_index(v: f64, k: usize) -> usize {
        let mut n = 1usize;
        while v < 2f64.powi(-(n as i32)) {
            n += 1;
        }
        // Now 2^-n <= v < 2^-(n-1): the interval [2^-n, 2^-(n-1)) has index n - 1.
        (n - 1).min(k)
    }

    #[test]
    fn dyadic_index_examples() {
        assert_eq!(dyadic_index(0.5, 15), 0);
        assert_eq!(dyadic_index(0.3, 15), 1);
        assert_eq!(dyadic_index(2f64.powi(-30), 15), 15);
        assert_eq!(dyadic_index(0.25, 15), 1);
        assert_eq!(dyadic_index(0.2499999, 15), 2);
        assert_eq!(dyadic_index(f64::MIN_POSITIVE / 8.0, 15), 15);
        assert_eq!(dyadic_index_f32(0.5, 15), 0);
        assert_eq!(dyadic_index_f32(0.3, 15), 1);
        assert_eq!(dyadic_index_f32(2f32.powi(-30), 15), 15);
    }

    #[test]
    fn exponent_index_matches_reference() {
        let mut s = UniformStream::new(3, 0);
        for _ in 0..100_000 {
            // Log-uniform spread over (2^-60, ½).
            let v = 0.5 * s.next_u().powi(40);
            let expect = reference_index(v, 40);
            assert_eq!(dyadic_index(v, 40), expect, "v={v:e}");
            assert_eq!(dyadic_index(v, 15), expect.min(15));
        }
        for n in 1..60 {
            assert_eq!(dyadic_index(2f64.powi(-n), 100), (n - 1) as usize);
        }
    }

    #[test]
    fn constant_examples() {
        let t = fit_constant(3, Construction::L1).unwrap();
        let v = t.values();
        assert_eq!(t.eval(0.0001), v[0]);
        assert_eq!(t.eval(0.5), v[4]);
        let t = fit_constant(10, Construction::Central).unwrap();
        assert_eq!(t.eval(0.73), t.values()[747]);
    }

    #[test]
    fn dyadic_median_and_symmetry() {
        let t = fit_gaussian_dyadic(3, 15, 0.5).unwrap();
        assert_eq!(t.eval(0.5), 0.0);
        let mut s = UniformStream::new(5, 1);
        for _ in 0..10_000 {
            let u = s.next_u();
            assert_eq!(t.eval(u), -t.eval(1.0 - u), "u={u}");
        }
    }

    #[test]
    fn dyadic_value_within_interval_sup_error() {
        let t = fit_gaussian_dyadic(1, 15, 0.5).unwrap();
        let k = dyadic_index(0.3, 15);
        let (a, b) = t.interval_bounds(k);
        let c = t.interval_coeffs(k);
        let sup = (0..=2000)
            .map(|i| a + (b - a) * i as f64 / 2000.0)
            .map(|u| (c[0] + c[1] * u - norm_ppf(u)).abs())
            .fold(0.0, f64::max);
        assert!((t.eval(0.3) - norm_ppf(0.3)).abs() <= sup);
        assert!((norm_ppf(0.3) + 0.5244).abs() < 1e-4);
    }

    #[test]
    fn monotone_on_grid() {
        let c = fit_constant(8, Construction::L1).unwrap();
        let grid: Vec<f64> = (0..10_000).map(|i| (i as f64 + 0.5) / 10_000.0).collect();
        let z = c.eval_vec(&grid);
        assert!(z.windows(2).all(|w| w[0] <= w[1]));
        // Even-degree dyadic fits are monotone across the whole grid.
        for m in [2, 4] {
            let z = fit_gaussian_dyadic(m, 15, 0.5).unwrap().eval_vec(&grid);
            assert!(z.windows(2).all(|w| w[0] <= w[1]), "m={m}");
        }
    }

    #[test]
    fn odd_degree_steps_down_only_at_median() {
        // The least-squares line on [¼, ½) overshoots Φ⁻¹ at ½, so the
        // reflected table drops from +ε to -ε there and nowhere else.
        let grid: Vec<f64> = (0..10_000).map(|i| (i as f64 + 0.5) / 10_000.0).collect();
        for m in [1, 3] {
            let z = fit_gaussian_dyadic(m, 15, 0.5).unwrap().eval_vec(&grid);
            let drops: Vec<usize> = (1..z.len()).filter(|&i| z[i] < z[i - 1]).collect();
            assert_eq!(drops, vec![5000], "m={m}");
        }
    }

    #[test]
    fn batch_is_pure() {
        let t = fit_gaussian_dyadic(3, 15, 0.5).unwrap();
        let u = UniformStream::new(1, 2).take_vec(4096);
        assert_eq!(t.eval_vec(&u), t.eval_vec(&u));
    }

    #[test]
    fn general_decay_rate_matches_scalar() {
        let t = fit_dyadic_table(1, 10, 0.3, &FnTarget(norm_ppf)).unwrap();
        let u = UniformStream::new(8, 0).take_vec(1000);
        for (&x, z) in u.iter().zip(t.eval_vec(&u)) {
            let v = x.min(1.0 - x);
            let expect = if x < 0.5 {
                t.eval_half(v)
            } else {
                -t.eval_half(v)
            };
            assert_eq!(z, expect);
        }
    }

    #[test]
    fn single_precision_tracks_double() {
        let t = fit_gaussian_dyadic(3, 15, 0.5).unwrap();
        let t32 = DyadicPolyTableF32::from_f64(&t).unwrap();
        assert_eq!(t32.eval(0.5), 0.0);
        let u = UniformStream::new(4, 4).take_vec(10_000);
        for (&x, z) in u.iter().zip(t32.eval_vec(&u)) {
            let x32 = x as f32 as f64;
            assert!((z - t.eval(x32)).abs() < 2e-5 * (1.0 + z.abs()), "u={x}");
        }
    }

    #[test]
    fn coupled_examples() {
        let rad = fit_constant(1, Construction::Rademacher).unwrap();
        let p = coupled_pair(0.7, &rad);
        assert!((p.z_exact - 0.5244005127080407).abs() < 1e-12);
        assert_eq!(p.z_approx, 1.0);
        let t = fit_gaussian_dyadic(1, 15, 0.5).unwrap();
        assert_eq!(
            coupled_pair(0.5, &t),
            GaussianSamplePair {
                z_exact: 0.0,
                z_approx: 0.0
            }
        );
    }

    #[test]
    fn coupled_correlation() {
        let t = fit_gaussian_dyadic(1, 15, 0.5).unwrap();
        let mut s = UniformStream::new(2024, 0);
        let pairs = sample_coupled(&mut s, &t, 100_000);
        let n = pairs.len() as f64;
        let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for p in &pairs {
            sx += p.z_exact;
            sy += p.z_approx;
            sxx += p.z_exact * p.z_exact;
            syy += p.z_approx * p.z_approx;
            sxy += p.z_exact * p.z_approx;
        }
        let cov = sxy / n - sx * sy / n / n;
        let corr = cov / ((sxx / n - (sx / n).powi(2)) * (syy / n - (sy / n).powi(2))).sqrt();
        assert!(corr > 0.99, "corr={corr}");
    }

    #[test]
    fn sampler_enum_dispatch() {
        let d = fit_gaussian_dyadic(1, 15, 0.5).unwrap();
        let s = GaussianSampler::Dyadic(d.clone());
        assert_eq!(s.eval(0.2), d.eval(0.2));
        assert_eq!(GaussianSampler::Exact.eval(0.2), norm_ppf(0.2));
        assert_eq!(s.label(), "dyadic-m1-k15");
    }

    proptest! {
        #[test]
        fn exact_antisymmetry(w in 1u64..(1u64 << 52)) {
            // Every u = w 2^-53 with w < 2^52 has an exactly representable 1 - u.
            let u = w as f64 * 2f64.powi(-53);
            let t = fit_gaussian_dyadic(2, 12, 0.5).unwrap();
            prop_assert_eq!(t.eval(u), -t.eval(1.0 - u));
        }

        #[test]
        fn index_within_range(bits in 1u64..0x3FE0_0000_0000_0001u64, k in 2usize..40) {
            let v = f64::from_bits(bits);
            prop_assume!(v > 0.0 && v <= 0.5);
            prop_assert_eq!(dyadic_index(v, k), reference_index(v, k));
        }
    }
}
