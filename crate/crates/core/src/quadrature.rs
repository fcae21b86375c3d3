//! Globally adaptive Gauss–Kronrod (10/21 point) quadrature for scalar and
//! small vector-valued integrands.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_292_098_640,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for the odd-indexed Kronrod nodes 1, 3, 5, 7, 9.
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 0.0,
            max_subdivisions: 2000,
        }
    }
}

impl QuadOptions {
    pub fn rel(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct QuadResult {
    pub values: Vec<f64>,
    /// Estimated absolute error, summed over components.
    pub error: f64,
    /// Integral of the absolute integrand, summed over components.
    pub abs_integral: f64,
    pub evaluations: usize,
    pub converged: bool,
}

struct Segment {
    a: f64,
    b: f64,
    values: Vec<f64>,
    abs: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod_segment<F>(f: &mut F, a: f64, b: f64, dim: usize, buf: &mut [f64]) -> Segment
where
    F: FnMut(f64, &mut [f64]),
{
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut kron = vec![0.0; dim];
    let mut gauss = vec![0.0; dim];
    let mut abs = 0.0;

    f(centre, buf);
    for d in 0..dim {
        kron[d] += WGK[10] * buf[d];
        abs += WGK[10] * buf[d].abs();
    }
    for (j, &x) in XGK.iter().enumerate().take(10) {
        for sign in [-1.0, 1.0] {
            f(centre + sign * half * x, buf);
            for d in 0..dim {
                kron[d] += WGK[j] * buf[d];
                abs += WGK[j] * buf[d].abs();
                if j % 2 == 1 {
                    gauss[d] += WG[j / 2] * buf[d];
                }
            }
        }
    }
    let mut error = 0.0;
    for d in 0..dim {
        kron[d] *= half;
        gauss[d] *= half;
        error += (kron[d] - gauss[d]).abs();
    }
    Segment {
        a,
        b,
        values: kron,
        abs: abs * half.abs(),
        error,
    }
}

/// Integrates a `dim`-component integrand over `[a, b]`.
///
/// The integrand writes its components into the provided slice. Convergence
/// is declared when the summed error estimate falls below
/// `max(abs_tol, rel_tol * ∫|f|)`.
pub fn integrate_vec<F>(mut f: F, a: f64, b: f64, dim: usize, opts: QuadOptions) -> QuadResult
where
    F: FnMut(f64, &mut [f64]),
{
    let mut buf = vec![0.0; dim];
    if a == b {
        return QuadResult {
            values: vec![0.0; dim],
            error: 0.0,
            abs_integral: 0.0,
            evaluations: 0,
            converged: true,
        };
    }
    let first = kronrod_segment(&mut f, a, b, dim, &mut buf);
    let mut evaluations = 21;
    let mut total = first.values.clone();
    let mut total_err = first.error;
    let mut total_abs = first.abs;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    let mut subdivisions = 1;

    let tolerance = |abs: f64| opts.abs_tol.max(opts.rel_tol * abs);
    while total_err > tolerance(total_abs) {
        if subdivisions >= opts.max_subdivisions {
            return QuadResult {
                values: total,
                error: total_err,
                abs_integral: total_abs,
                evaluations,
                converged: false,
            };
        }
        let worst = heap.pop().expect("heap is never empty here");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
            // Interval can no longer be split in floating point.
            heap.push(worst);
            return QuadResult {
                values: total,
                error: total_err,
                abs_integral: total_abs,
                evaluations,
                converged: false,
            };
        }
        let left = kronrod_segment(&mut f, worst.a, mid, dim, &mut buf);
        let right = kronrod_segment(&mut f, mid, worst.b, dim, &mut buf);
        evaluations += 42;
        for d in 0..dim {
            total[d] += left.values[d] + right.values[d] - worst.values[d];
        }
        total_err += left.error + right.error - worst.error;
        total_abs += left.abs + right.abs - worst.abs;
        heap.push(left);
        heap.push(right);
        subdivisions += 1;
    }
    // Re-sum to shed the drift accumulated by incremental updates.
    let mut values = vec![0.0; dim];
    let mut error = 0.0;
    for seg in heap.iter() {
        for d in 0..dim {
            values[d] += seg.values[d];
        }
        error += seg.error;
    }
    QuadResult {
        values,
        error,
        abs_integral: total_abs,
        evaluations,
        converged: true,
    }
}

/// Scalar convenience wrapper around [`integrate_vec`].
pub fn integrate<F>(mut f: F, a: f64, b: f64, opts: QuadOptions) -> QuadResult
where
    F: FnMut(f64) -> f64,
{
    integrate_vec(|x, out| out[0] = f(x), a, b, 1, opts)
}
