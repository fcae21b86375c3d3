//! Relative throughput of the samplers.
//!
//! Absolute timings depend on the machine, so every row also reports the
//! speed relative to the exact quantile measured in the same run.

use std::hint::black_box;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::exact_dist::NcChi2Ref;
use crate::fit::NcChi2Table;
use crate::sampler::{ExactGaussian, InverseCdf, NcChi2Slice, UniformStream};

/// Batch size of the cache-resident regime.
pub const CACHE_BATCH: usize = 4096;
/// Coefficient of variation above which a timing is reported as noisy.
pub const NOISY_CV: f64 = 0.10;
/// The exact non-central χ² quantile is timed on at most this many points.
pub const NCCHI2_EXACT_POINTS: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub sampler: String,
    /// `cache` (small batches reused) or `stream` (one large batch).
    pub regime: String,
    pub samples: usize,
    pub ns_per_sample: f64,
    pub cv: f64,
    /// Exact-quantile time divided by this sampler's time.
    pub speedup_vs_exact: f64,
    pub noisy: bool,
}

/// Median and coefficient of variation of ns/sample over `reps` runs of
/// `run`, which processes `samples` values per call.
pub fn time_it(samples: usize, reps: usize, mut run: impl FnMut()) -> (f64, f64) {
    run();
    let mut t: Vec<f64> = (0..reps.max(1))
        .map(|_| {
            let s = Instant::now();
            run();
            s.elapsed().as_secs_f64() * 1e9 / samples as f64
        })
        .collect();
    let mean = t.iter().sum::<f64>() / t.len() as f64;
    let var = t.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (t.len().max(2) - 1) as f64;
    t.sort_by(|a, b| a.partial_cmp(b).expect("finite timings"));
    (t[t.len() / 2], var.sqrt() / mean)
}

fn row(sampler: &str, regime: &str, samples: usize, (ns, cv): (f64, f64)) -> BenchRow {
    BenchRow {
        sampler: sampler.to_string(),
        regime: regime.to_string(),
        samples,
        ns_per_sample: ns,
        cv,
        speedup_vs_exact: f64::NAN,
        noisy: cv > NOISY_CV,
    }
}

fn time_sampler(
    f: &dyn InverseCdf,
    u: &[f64],
    out: &mut [f64],
    regime: &str,
    reps: usize,
) -> (f64, f64) {
    if regime == "cache" {
        let k = CACHE_BATCH.min(u.len());
        let rounds = u.len() / k;
        time_it(rounds * k, reps, || {
            for _ in 0..rounds {
                f.eval_batch(black_box(&u[..k]), &mut out[..k]);
            }
            black_box(&out[..k]);
        })
    } else {
        time_it(u.len(), reps, || {
            f.eval_batch(black_box(u), out);
            black_box(&*out);
        })
    }
}

struct Copy;

impl InverseCdf for Copy {
    fn eval_batch(&self, u: &[f64], out: &mut [f64]) {
        out.copy_from_slice(u);
    }
}

/// Times a read-write baseline, the exact Gaussian quantile and each
/// sampler in both regimes.
pub fn bench_gaussian(
    samplers: &[(String, &dyn InverseCdf)],
    batch: usize,
    reps: usize,
    seed: u64,
) -> Vec<BenchRow> {
    let u = UniformStream::new(seed, 0).take_vec(batch.max(CACHE_BATCH));
    let mut out = vec![0.0; u.len()];
    let mut rows = Vec::new();
    for regime in ["cache", "stream"] {
        let exact = row(
            "exact",
            regime,
            u.len(),
            time_sampler(&ExactGaussian, &u, &mut out, regime, reps),
        );
        let mut group = vec![row(
            "read_write",
            regime,
            u.len(),
            time_sampler(&Copy, &u, &mut out, regime, reps),
        )];
        for (name, s) in samplers {
            group.push(row(
                name,
                regime,
                u.len(),
                time_sampler(*s, &u, &mut out, regime, reps),
            ));
        }
        group.push(exact);
        let e = group.last().expect("exact row").ns_per_sample;
        for r in &mut group {
            r.speedup_vs_exact = e / r.ns_per_sample;
        }
        rows.extend(group);
    }
    rows
}

/// Times the exact non-central χ² quantile (on at most
/// [`NCCHI2_EXACT_POINTS`] points) against a table at one λ.
pub fn bench_ncchi2(
    table: &NcChi2Table,
    lambda: f64,
    batch: usize,
    reps: usize,
    seed: u64,
) -> Result<Vec<BenchRow>> {
    let slice = NcChi2Slice::new(table, lambda)?;
    let dist = NcChi2Ref::new(table.nu(), lambda)?;
    let u = UniformStream::new(seed, 0).take_vec(batch.max(CACHE_BATCH));
    let mut out = vec![0.0; u.len()];
    let ne = u.len().min(NCCHI2_EXACT_POINTS);
    let mut failures = 0usize;
    let exact = time_it(ne, reps.min(3), || {
        for (o, &x) in out[..ne].iter_mut().zip(&u[..ne]) {
            *o = dist.quantile(x).unwrap_or_else(|_| {
                failures += 1;
                f64::NAN
            });
        }
        black_box(&out[..ne]);
    });
    if failures > 0 {
        log::warn!("{failures} exact quantile evaluations failed during timing");
    }
    let mut rows = vec![row("ncchi2_exact", "stream", ne, exact)];
    let label = format!("ncchi2-m{}-k{}", table.degree(), table.n_intervals());
    for regime in ["cache", "stream"] {
        rows.push(row(
            "read_write",
            regime,
            u.len(),
            time_sampler(&Copy, &u, &mut out, regime, reps),
        ));
        rows.push(row(
            &label,
            regime,
            u.len(),
            time_sampler(&slice, &u, &mut out, regime, reps),
        ));
    }
    for r in &mut rows {
        r.speedup_vs_exact = exact.0 / r.ns_per_sample;
    }
    Ok(rows)
}
