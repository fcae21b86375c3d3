//! Coupled CIR path simulation: exact non-central χ² transitions against
//! table approximations, and truncated Euler–Maruyama fine/coarse pairs.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{LevelStats, StatKind, Welford};
use super::{batches, stream_id, CirParams, LevelSpec, Payoff, Scheme, MIN_PILOT};
use crate::error::{Error, Result};
use crate::exact_dist::{cir_transition_params, norm_ppf, NcChi2Ref};
use crate::fit::NcChi2Table;
use crate::sampler::{eval_ncchi2_varying, UniformStream};

/// A non-central χ² table used in place of the exact transition, with its
/// assumed cost advantage `ĉ/c̃`.
#[derive(Debug, Clone, PartialEq)]
pub struct CirSource {
    pub label: String,
    pub table: NcChi2Table,
    pub cost_ratio: f64,
}

/// Terminal payoffs of one path. For the exact scheme `p_fine` is the
/// exact path, `p_coarse` is unused (0) and `p_approx` holds one entry per
/// table; for truncated Euler–Maruyama `p_fine`/`p_coarse` are the fine and
/// coarse paths and `p_approx` is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CirPathOutputs {
    pub p_fine: f64,
    pub p_coarse: f64,
    pub p_approx: Vec<f64>,
}

struct ExactBatch {
    x: Vec<f64>,
    xt: Vec<Vec<f64>>,
    exact_seconds: f64,
    source_seconds: Vec<f64>,
}

fn run_exact_batch(
    p: &CirParams,
    spec: &LevelSpec,
    tables: &[&NcChi2Table],
    stream: &mut UniformStream,
    b: usize,
) -> Result<ExactBatch> {
    let h = spec.dt_fine(p.t_end);
    // λ is linear in the previous state: λ = x · λ(1).
    let unit = cir_transition_params(1.0, p.kappa, p.theta, p.sigma, h)?;
    let (nu, scale, lam_per_x) = (unit.nu, unit.scale, unit.lambda);
    let ns = tables.len();
    let mut x = vec![p.x0; b];
    let mut xt = vec![vec![p.x0; b]; ns];
    let mut u = vec![0.0; b];
    let mut lam = vec![0.0; b];
    let mut out = vec![0.0; b];
    let mut guess = vec![0.0; b];
    let mut exact_seconds = 0.0;
    let mut source_seconds = vec![0.0; ns];
    for step in 0..spec.n_steps_fine() {
        stream.fill(&mut u);
        let t = Instant::now();
        lam.iter_mut()
            .zip(&x)
            .for_each(|(l, &xi)| *l = xi * lam_per_x);
        // The first table supplies Newton starting points for the oracle.
        if let Some(t0) = tables.first() {
            eval_ncchi2_varying(t0, &u, &lam, &mut guess)?;
        }
        for i in 0..b {
            let d = NcChi2Ref::new(nu, lam[i])?;
            let g = if ns > 0 && guess[i] > 0.0 {
                Some(guess[i])
            } else {
                None
            };
            let q = d.quantile_from(u[i], g).map_err(|e| {
                Error::Numerical(format!(
                    "step {step}, path {i}, u={}, lambda={}: {e}",
                    u[i], lam[i]
                ))
            })?;
            x[i] = scale * q;
        }
        exact_seconds += t.elapsed().as_secs_f64();
        for (s, table) in tables.iter().enumerate() {
            let t = Instant::now();
            lam.iter_mut()
                .zip(&xt[s])
                .for_each(|(l, &xi)| *l = xi * lam_per_x);
            eval_ncchi2_varying(table, &u, &lam, &mut out)?;
            // Approximate quantiles can dip just below 0 in the far lower tail.
            xt[s]
                .iter_mut()
                .zip(&out)
                .for_each(|(xi, &o)| *xi = (scale * o).max(0.0));
            source_seconds[s] += t.elapsed().as_secs_f64();
        }
    }
    Ok(ExactBatch {
        x,
        xt,
        exact_seconds,
        source_seconds,
    })
}

fn run_euler_batch(
    p: &CirParams,
    spec: &LevelSpec,
    stream: &mut UniformStream,
    b: usize,
) -> (Vec<f64>, Vec<f64>, f64) {
    let h = spec.dt_fine(p.t_end);
    let sq = h.sqrt();
    let mut xf = vec![p.x0; b];
    let mut xc = vec![p.x0; b];
    let mut dwc = vec![0.0; b];
    let mut u = vec![0.0; b];
    let mut seconds = 0.0;
    let step = |x: &mut f64, dw: f64, h: f64| {
        *x += p.kappa * (p.theta - *x) * h + p.sigma * x.abs().sqrt() * dw;
    };
    for n in 0..spec.n_steps_fine() {
        stream.fill(&mut u);
        let t = Instant::now();
        u.iter_mut().for_each(|v| *v = sq * norm_ppf(*v));
        seconds += t.elapsed().as_secs_f64();
        for i in 0..b {
            step(&mut xf[i], u[i], h);
            dwc[i] += u[i];
        }
        if spec.level > 0 && n % 2 == 1 {
            for i in 0..b {
                step(&mut xc[i], dwc[i], 2.0 * h);
                dwc[i] = 0.0;
            }
        }
    }
    (xf, xc, seconds)
}

fn check_cir_spec(p: &CirParams, spec: &LevelSpec) -> Result<()> {
    p.validate()?;
    spec.validate()?;
    if !matches!(spec.scheme, Scheme::CirExact | Scheme::CirEulerTruncated) {
        return Err(Error::Config(format!(
            "scheme {} does not apply to CIR",
            spec.scheme.name()
        )));
    }
    Ok(())
}

fn check_tables(p: &CirParams, tables: &[&NcChi2Table]) -> Result<()> {
    let nu = p.nu();
    if let Some(t) = tables.iter().find(|t| (t.nu() - nu).abs() > 1e-12 * nu) {
        return Err(Error::Config(format!(
            "table fitted for nu={} but the process has nu={nu}",
            t.nu()
        )));
    }
    Ok(())
}

/// Simulates `n_paths` coupled CIR paths from `stream`.
pub fn simulate_cir_coupled(
    params: &CirParams,
    spec: &LevelSpec,
    payoff: Payoff,
    tables: &[&NcChi2Table],
    stream: &mut UniformStream,
    n_paths: usize,
) -> Result<Vec<CirPathOutputs>> {
    check_cir_spec(params, spec)?;
    match spec.scheme {
        Scheme::CirExact => {
            check_tables(params, tables)?;
            let out = run_exact_batch(params, spec, tables, stream, n_paths)?;
            Ok((0..n_paths)
                .map(|i| CirPathOutputs {
                    p_fine: payoff.apply(out.x[i]),
                    p_coarse: 0.0,
                    p_approx: out.xt.iter().map(|x| payoff.apply(x[i])).collect(),
                })
                .collect())
        }
        _ => {
            let (xf, xc, _) = run_euler_batch(params, spec, stream, n_paths);
            Ok((0..n_paths)
                .map(|i| CirPathOutputs {
                    p_fine: payoff.apply(xf[i]),
                    p_coarse: if spec.level == 0 {
                        0.0
                    } else {
                        payoff.apply(xc[i])
                    },
                    p_approx: Vec::new(),
                })
                .collect())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CirLevelEstimate {
    pub level: u32,
    pub dt_fine: f64,
    pub stats: Vec<LevelStats>,
}

impl CirLevelEstimate {
    pub fn get(&self, kind: StatKind, source: &str) -> Option<&LevelStats> {
        self.stats
            .iter()
            .find(|s| s.kind == kind && s.source == source)
    }
}

/// Source label of the truncated Euler–Maruyama statistics.
pub const EULER_LABEL: &str = "euler_truncated";

/// Pilot statistics of one CIR level.
///
/// With the exact scheme: the plain exact payoff (source `exact`) and, per
/// table, the plain approximate payoff and the two-way correction
/// `P̂ - P̃` at equal resolution. With truncated Euler–Maruyama: the plain
/// fine payoff and the fine-minus-coarse correction.
#[allow(clippy::too_many_arguments)]
pub fn estimate_cir_level(
    params: &CirParams,
    spec: &LevelSpec,
    payoff: Payoff,
    sources: &[CirSource],
    n_paths: usize,
    seed: u64,
    batch_size: usize,
) -> Result<CirLevelEstimate> {
    check_cir_spec(params, spec)?;
    if n_paths < MIN_PILOT {
        return Err(Error::Config(format!(
            "pilot needs at least {MIN_PILOT} paths, got {n_paths}"
        )));
    }
    if batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    let level = spec.level;
    let n = n_paths as f64;
    let draws = spec.n_steps_fine() as f64;
    let plan = batches(n_paths, batch_size);
    match spec.scheme {
        Scheme::CirExact => {
            let tables: Vec<&NcChi2Table> = sources.iter().map(|s| &s.table).collect();
            check_tables(params, &tables)?;
            let ns = tables.len();
            type Part = (Welford, Vec<Welford>, Vec<Welford>, f64, Vec<f64>);
            let parts: Vec<Part> = plan
                .into_par_iter()
                .map(|(b, size)| -> Result<Part> {
                    let mut stream = UniformStream::new(seed, stream_id(level, b));
                    let out = run_exact_batch(params, spec, &tables, &mut stream, size)
                        .map_err(|e| Error::Numerical(format!("level {level}, batch {b}: {e}")))?;
                    let mut plain = Welford::default();
                    let mut approx = vec![Welford::default(); ns];
                    let mut corr = vec![Welford::default(); ns];
                    for i in 0..size {
                        let pe = payoff.apply(out.x[i]);
                        plain.push(pe);
                        for s in 0..ns {
                            let pa = payoff.apply(out.xt[s][i]);
                            approx[s].push(pa);
                            corr[s].push(pe - pa);
                        }
                    }
                    Ok((plain, approx, corr, out.exact_seconds, out.source_seconds))
                })
                .collect::<Result<_>>()?;
            let mut plain = Welford::default();
            let mut approx = vec![Welford::default(); ns];
            let mut corr = vec![Welford::default(); ns];
            let mut exact_s = 0.0;
            let mut src_s = vec![0.0; ns];
            for (p, a, c, es, ss) in &parts {
                plain.merge(p);
                for s in 0..ns {
                    approx[s].merge(&a[s]);
                    corr[s].merge(&c[s]);
                    src_s[s] += ss[s];
                }
                exact_s += es;
            }
            let mut stats = vec![LevelStats::from_welford(
                level,
                StatKind::Plain,
                "exact",
                &plain,
                exact_s / n,
                draws,
            )];
            for (s, src) in sources.iter().enumerate() {
                let c = src_s[s] / n;
                stats.push(LevelStats::from_welford(
                    level,
                    StatKind::Plain,
                    &src.label,
                    &approx[s],
                    c,
                    draws,
                ));
                stats.push(LevelStats::from_welford(
                    level,
                    StatKind::TwoWay,
                    &src.label,
                    &corr[s],
                    c + exact_s / n,
                    draws,
                ));
            }
            Ok(CirLevelEstimate {
                level,
                dt_fine: spec.dt_fine(params.t_end),
                stats,
            })
        }
        _ => {
            let parts: Vec<(Welford, Welford, f64)> = plan
                .into_par_iter()
                .map(|(b, size)| {
                    let mut stream = UniformStream::new(seed, stream_id(level, b));
                    let (xf, xc, secs) = run_euler_batch(params, spec, &mut stream, size);
                    let (mut plain, mut two) = (Welford::default(), Welford::default());
                    for i in 0..size {
                        let pf = payoff.apply(xf[i]);
                        let pc = if level == 0 { 0.0 } else { payoff.apply(xc[i]) };
                        plain.push(pf);
                        two.push(pf - pc);
                    }
                    (plain, two, secs)
                })
                .collect();
            let (mut plain, mut two, mut secs) = (Welford::default(), Welford::default(), 0.0);
            for (p, t, s) in &parts {
                plain.merge(p);
                two.merge(t);
                secs += s;
            }
            Ok(CirLevelEstimate {
                level,
                dt_fine: spec.dt_fine(params.t_end),
                stats: vec![
                    LevelStats::from_welford(
                        level,
                        StatKind::Plain,
                        EULER_LABEL,
                        &plain,
                        secs / n,
                        draws,
                    ),
                    LevelStats::from_welford(
                        level,
                        StatKind::TwoWay,
                        EULER_LABEL,
                        &two,
                        secs / n,
                        draws,
                    ),
                ],
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::fit_ncchi2;
    use std::sync::OnceLock;

    fn table() -> &'static NcChi2Table {
        static T: OnceLock<NcChi2Table> = OnceLock::new();
        T.get_or_init(|| fit_ncchi2(2.0, 16, 1, 15).unwrap())
    }

    #[test]
    fn exact_mean_matches_closed_form() {
        let p = CirParams::default();
        let spec = LevelSpec::new(1, Scheme::CirExact);
        let src = [CirSource {
            label: "lin".into(),
            table: table().clone(),
            cost_ratio: 300.0,
        }];
        let est = estimate_cir_level(&p, &spec, Payoff::Identity, &src, 4000, 1, 1000).unwrap();
        let plain = est.get(StatKind::Plain, "exact").unwrap();
        // E X_T = θ + (x0 - θ) e^{-κT} = 1.
        assert!(
            (plain.mean - 1.0).abs() < 3.0 * plain.std_error,
            "{plain:?}"
        );
        // Var X_T = x0 σ²/κ (e^{-κT} - e^{-2κT}) + θσ²/(2κ)(1 - e^{-κT})².
        let e = (-0.5f64).exp();
        let var = 2.0 * (e - e * e) + (1.0 - e).powi(2);
        assert!(
            (plain.variance / var - 1.0).abs() < 0.1,
            "{} vs {var}",
            plain.variance
        );
        let corr = est.get(StatKind::TwoWay, "lin").unwrap();
        assert!(corr.variance < plain.variance * 2f64.powi(-10));
    }

    #[test]
    fn euler_fine_and_coarse_agree_in_mean() {
        let p = CirParams::default();
        let spec = LevelSpec::new(3, Scheme::CirEulerTruncated);
        let est = estimate_cir_level(&p, &spec, Payoff::Identity, &[], 5000, 2, 1000).unwrap();
        let two = est.get(StatKind::TwoWay, EULER_LABEL).unwrap();
        let plain = est.get(StatKind::Plain, EULER_LABEL).unwrap();
        assert!(two.variance < plain.variance / 4.0);
    }

    #[test]
    fn coupled_paths_have_one_entry_per_table() {
        let p = CirParams::default();
        let spec = LevelSpec::new(0, Scheme::CirExact);
        let mut s = UniformStream::new(3, 0);
        let out = simulate_cir_coupled(&p, &spec, Payoff::Identity, &[table()], &mut s, 8).unwrap();
        assert!(out.iter().all(|o| o.p_approx.len() == 1 && o.p_fine >= 0.0));
    }

    #[test]
    fn mismatched_table_rejected() {
        let p = CirParams {
            sigma: 0.5,
            ..Default::default()
        };
        let spec = LevelSpec::new(0, Scheme::CirExact);
        let src = [CirSource {
            label: "x".into(),
            table: table().clone(),
            cost_ratio: 1.0,
        }];
        assert!(matches!(
            estimate_cir_level(&p, &spec, Payoff::Identity, &src, 200, 1, 100),
            Err(Error::Config(_))
        ));
    }
}
