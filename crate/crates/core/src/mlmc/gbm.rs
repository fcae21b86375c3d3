//! Coupled GBM path simulation (Euler–Maruyama and Milstein).

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{LevelStats, StatKind, Welford};
use super::{batches, stream_id, GbmParams, LevelSpec, Payoff, Scheme, MIN_PILOT};
use crate::error::{Error, Result};
use crate::sampler::{ExactGaussian, GaussianSampler, InverseCdf, UniformStream};

/// An approximate Gaussian together with its assumed cost advantage
/// `ĉ/c̃` over the exact quantile.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSource {
    pub label: String,
    pub sampler: GaussianSampler,
    pub cost_ratio: f64,
}

/// Terminal payoffs of one path: exact fine and coarse, approximate fine
/// and coarse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathOutputs {
    pub pf_exact: f64,
    pub pc_exact: f64,
    pub pf_approx: f64,
    pub pc_approx: f64,
}

struct BatchPaths {
    xf: Vec<f64>,
    xc: Vec<f64>,
    xtf: Vec<Vec<f64>>,
    xtc: Vec<Vec<f64>>,
    exact_seconds: f64,
    source_seconds: Vec<f64>,
}

#[inline]
fn advance(x: &mut [f64], dw: &[f64], h: f64, p: &GbmParams, milstein: bool) {
    let half_s2 = 0.5 * p.sigma * p.sigma;
    for (xi, &w) in x.iter_mut().zip(dw) {
        let mut dx = p.mu * *xi * h + p.sigma * *xi * w;
        if milstein {
            // ½ b b' (ΔW² - h) with b = σx, b' = σ.
            dx += half_s2 * *xi * (w * w - h);
        }
        *xi += dx;
    }
}

fn run_batch(
    p: &GbmParams,
    spec: &LevelSpec,
    sources: &[&dyn InverseCdf],
    stream: &mut UniformStream,
    b: usize,
) -> BatchPaths {
    let nf = spec.n_steps_fine();
    let h = spec.dt_fine(p.t_end);
    let sq = h.sqrt();
    let milstein = spec.scheme == Scheme::Milstein;
    let ns = sources.len();
    let mut xf = vec![p.x0; b];
    let mut xc = vec![p.x0; b];
    let mut xtf = vec![vec![p.x0; b]; ns];
    let mut xtc = vec![vec![p.x0; b]; ns];
    let mut u = vec![0.0; b];
    let mut dw = vec![0.0; b];
    let mut dwc = vec![0.0; b];
    let mut dwt = vec![vec![0.0; b]; ns];
    let mut dwtc = vec![vec![0.0; b]; ns];
    let mut exact_seconds = 0.0;
    let mut source_seconds = vec![0.0; ns];
    for n in 0..nf {
        stream.fill(&mut u);
        let t = Instant::now();
        ExactGaussian.eval_batch(&u, &mut dw);
        exact_seconds += t.elapsed().as_secs_f64();
        for (s, src) in sources.iter().enumerate() {
            let t = Instant::now();
            src.eval_batch(&u, &mut dwt[s]);
            source_seconds[s] += t.elapsed().as_secs_f64();
        }
        dw.iter_mut().for_each(|w| *w *= sq);
        dwt.iter_mut()
            .for_each(|v| v.iter_mut().for_each(|w| *w *= sq));
        advance(&mut xf, &dw, h, p, milstein);
        for s in 0..ns {
            advance(&mut xtf[s], &dwt[s], h, p, milstein);
        }
        if spec.level > 0 {
            // Coarse increments are pairwise sums of the fine ones.
            dwc.iter_mut().zip(&dw).for_each(|(c, w)| *c += w);
            for s in 0..ns {
                dwtc[s].iter_mut().zip(&dwt[s]).for_each(|(c, w)| *c += w);
            }
            if n % 2 == 1 {
                advance(&mut xc, &dwc, 2.0 * h, p, milstein);
                dwc.iter_mut().for_each(|c| *c = 0.0);
                for s in 0..ns {
                    advance(&mut xtc[s], &dwtc[s], 2.0 * h, p, milstein);
                    dwtc[s].iter_mut().for_each(|c| *c = 0.0);
                }
            }
        }
    }
    BatchPaths {
        xf,
        xc,
        xtf,
        xtc,
        exact_seconds,
        source_seconds,
    }
}

fn check_gbm_spec(p: &GbmParams, spec: &LevelSpec) -> Result<()> {
    p.validate()?;
    spec.validate()?;
    if !matches!(spec.scheme, Scheme::EulerMaruyama | Scheme::Milstein) {
        return Err(Error::Config(format!(
            "scheme {} does not apply to GBM",
            spec.scheme.name()
        )));
    }
    Ok(())
}

/// Simulates `n_paths` coupled paths from `stream` and returns the four
/// terminal payoffs of each. The coarse payoffs are 0 on level 0.
pub fn simulate_gbm_coupled(
    params: &GbmParams,
    spec: &LevelSpec,
    payoff: Payoff,
    source: &dyn InverseCdf,
    stream: &mut UniformStream,
    n_paths: usize,
) -> Result<Vec<PathOutputs>> {
    check_gbm_spec(params, spec)?;
    let out = run_batch(params, spec, &[source], stream, n_paths);
    let coarse = |x: f64| {
        if spec.level == 0 {
            0.0
        } else {
            payoff.apply(x)
        }
    };
    Ok((0..n_paths)
        .map(|i| PathOutputs {
            pf_exact: payoff.apply(out.xf[i]),
            pc_exact: coarse(out.xc[i]),
            pf_approx: payoff.apply(out.xtf[0][i]),
            pc_approx: coarse(out.xtc[0][i]),
        })
        .collect())
}

/// All statistics of one level for one set of approximations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelEstimate {
    pub level: u32,
    pub dt_fine: f64,
    pub stats: Vec<LevelStats>,
}

impl LevelEstimate {
    pub fn get(&self, kind: StatKind, source: &str) -> Option<&LevelStats> {
        self.stats
            .iter()
            .find(|s| s.kind == kind && s.source == source)
    }
}

#[derive(Clone)]
struct Accum {
    plain: Welford,
    two: Welford,
    src_plain: Vec<Welford>,
    src_two: Vec<Welford>,
    four: Vec<Welford>,
    exact_seconds: f64,
    source_seconds: Vec<f64>,
}

impl Accum {
    fn new(ns: usize) -> Self {
        Self {
            plain: Welford::default(),
            two: Welford::default(),
            src_plain: vec![Welford::default(); ns],
            src_two: vec![Welford::default(); ns],
            four: vec![Welford::default(); ns],
            exact_seconds: 0.0,
            source_seconds: vec![0.0; ns],
        }
    }

    fn merge(&mut self, o: &Accum) {
        self.plain.merge(&o.plain);
        self.two.merge(&o.two);
        for s in 0..self.four.len() {
            self.src_plain[s].merge(&o.src_plain[s]);
            self.src_two[s].merge(&o.src_two[s]);
            self.four[s].merge(&o.four[s]);
            self.source_seconds[s] += o.source_seconds[s];
        }
        self.exact_seconds += o.exact_seconds;
    }
}

/// Pilot estimate of every level statistic for GBM.
///
/// Paths are simulated in batches of `batch_size`; batch `b` reads stream
/// `(level << 32) | b` of `seed`, and batch summaries are merged in batch
/// order, so the result is independent of the thread count.
#[allow(clippy::too_many_arguments)]
pub fn estimate_level(
    params: &GbmParams,
    spec: &LevelSpec,
    payoff: Payoff,
    sources: &[GaussianSource],
    n_paths: usize,
    seed: u64,
    batch_size: usize,
) -> Result<LevelEstimate> {
    check_gbm_spec(params, spec)?;
    if n_paths < MIN_PILOT {
        return Err(Error::Config(format!(
            "pilot needs at least {MIN_PILOT} paths, got {n_paths}"
        )));
    }
    if batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    let ns = sources.len();
    let samplers: Vec<&dyn InverseCdf> = sources
        .iter()
        .map(|s| &s.sampler as &dyn InverseCdf)
        .collect();
    let level = spec.level;
    let parts: Vec<Accum> = batches(n_paths, batch_size)
        .into_par_iter()
        .map(|(b, size)| {
            let mut stream = UniformStream::new(seed, stream_id(level, b));
            let out = run_batch(params, spec, &samplers, &mut stream, size);
            let mut acc = Accum::new(ns);
            acc.exact_seconds = out.exact_seconds;
            acc.source_seconds = out.source_seconds.clone();
            for i in 0..size {
                let pf = payoff.apply(out.xf[i]);
                let pc = if level == 0 {
                    0.0
                } else {
                    payoff.apply(out.xc[i])
                };
                acc.plain.push(pf);
                acc.two.push(pf - pc);
                for s in 0..ns {
                    let tf = payoff.apply(out.xtf[s][i]);
                    let tc = if level == 0 {
                        0.0
                    } else {
                        payoff.apply(out.xtc[s][i])
                    };
                    acc.src_plain[s].push(tf);
                    acc.src_two[s].push(tf - tc);
                    acc.four[s].push((pf - pc) - (tf - tc));
                }
            }
            acc
        })
        .collect();
    let mut total = Accum::new(ns);
    for p in &parts {
        total.merge(p);
    }
    let n = n_paths as f64;
    let draws = spec.n_steps_fine() as f64;
    let exact_cost = total.exact_seconds / n;
    let mut stats = vec![
        LevelStats::from_welford(
            level,
            StatKind::Plain,
            "exact",
            &total.plain,
            exact_cost,
            draws,
        ),
        LevelStats::from_welford(
            level,
            StatKind::TwoWay,
            "exact",
            &total.two,
            exact_cost,
            draws,
        ),
    ];
    for (s, src) in sources.iter().enumerate() {
        let c = total.source_seconds[s] / n;
        stats.push(LevelStats::from_welford(
            level,
            StatKind::Plain,
            &src.label,
            &total.src_plain[s],
            c,
            draws,
        ));
        stats.push(LevelStats::from_welford(
            level,
            StatKind::TwoWay,
            &src.label,
            &total.src_two[s],
            c,
            draws,
        ));
        stats.push(LevelStats::from_welford(
            level,
            StatKind::FourWay,
            &src.label,
            &total.four[s],
            c + exact_cost,
            draws,
        ));
    }
    Ok(LevelEstimate {
        level,
        dt_fine: spec.dt_fine(params.t_end),
        stats,
    })
}
