//! TOML experiment files and the pilot-run driver behind `arv mlmc`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::allocation::{
    default_cost_ratio, optimal_allocation, optimal_allocation_nested, speedup_bound,
    speedup_report, CHI2_COST_RATIO,
};
use super::cir::{estimate_cir_level, CirSource, EULER_LABEL};
use super::gbm::{estimate_level, GaussianSource};
use super::stats::{LevelStats, StatKind};
use super::{CirParams, GbmParams, LevelSpec, Payoff, Scheme, DEFAULT_BATCH, DEFAULT_N0};
use crate::error::{Error, Result};
use crate::fit::{
    fit_constant, fit_gaussian_dyadic, fit_ncchi2, import_table, AnyTable, Construction,
    NcChi2Table,
};
use crate::sampler::{DyadicPolyTableF32, GaussianSampler};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProcessConfig {
    Gbm {
        scheme: Scheme,
        #[serde(default)]
        params: GbmParams,
    },
    Cir {
        scheme: Scheme,
        #[serde(default)]
        params: CirParams,
    },
}

/// One approximation to compare against the exact sampler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceConfig {
    Rademacher {
        label: Option<String>,
        cost_ratio: Option<f64>,
    },
    Constant {
        q: u32,
        #[serde(default = "default_construction")]
        construction: Construction,
        label: Option<String>,
        cost_ratio: Option<f64>,
    },
    Dyadic {
        degree: usize,
        #[serde(default = "default_intervals")]
        intervals: usize,
        #[serde(default)]
        single_precision: bool,
        label: Option<String>,
        cost_ratio: Option<f64>,
    },
    Ncchi2 {
        degree: usize,
        #[serde(default = "default_intervals")]
        intervals: usize,
        #[serde(default = "default_knots")]
        knots: usize,
        label: Option<String>,
        cost_ratio: Option<f64>,
    },
    /// A table file written by `arv fit`; relative paths resolve against the
    /// experiment file's directory.
    Table {
        path: PathBuf,
        label: Option<String>,
        cost_ratio: Option<f64>,
    },
}

fn default_construction() -> Construction {
    Construction::L1
}
fn default_intervals() -> usize {
    15
}
fn default_knots() -> usize {
    crate::fit::ncchi2::DEFAULT_KNOTS
}
fn default_pilot() -> usize {
    100_000
}
fn default_max_level() -> u32 {
    8
}
fn default_n0() -> usize {
    DEFAULT_N0
}
fn default_batch() -> usize {
    DEFAULT_BATCH
}
fn default_epsilon() -> f64 {
    1e-3
}

/// How per-path costs enter the allocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostModel {
    /// One unit per approximate draw and `cost_ratio` units per exact draw.
    /// Machine independent.
    #[default]
    Draws,
    /// Measured wall time of the random number generation.
    Wall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub process: ProcessConfig,
    #[serde(default)]
    pub payoff: Payoff,
    pub seed: u64,
    #[serde(default)]
    pub min_level: u32,
    #[serde(default = "default_max_level")]
    pub max_level: u32,
    #[serde(default = "default_n0")]
    pub n0: usize,
    #[serde(default = "default_pilot")]
    pub pilot_paths: usize,
    #[serde(default = "default_batch")]
    pub batch: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub cost_model: CostModel,
    #[serde(default)]
    pub sources: Vec<SourceConfig>,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self =
            toml::from_str(s).map_err(|e| Error::Config(format!("experiment file: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_level > self.max_level {
            return Err(Error::Config(format!(
                "min_level {} exceeds max_level {}",
                self.min_level, self.max_level
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        match &self.process {
            ProcessConfig::Gbm { scheme, params } => {
                params.validate()?;
                if !matches!(scheme, Scheme::EulerMaruyama | Scheme::Milstein) {
                    return Err(Error::Config(format!(
                        "scheme {} does not apply to GBM",
                        scheme.name()
                    )));
                }
                if self
                    .sources
                    .iter()
                    .any(|s| matches!(s, SourceConfig::Ncchi2 { .. }))
                {
                    return Err(Error::Config(
                        "non-central chi-squared sources need a CIR process".into(),
                    ));
                }
            }
            ProcessConfig::Cir { scheme, params } => {
                params.validate()?;
                if !matches!(scheme, Scheme::CirExact | Scheme::CirEulerTruncated) {
                    return Err(Error::Config(format!(
                        "scheme {} does not apply to CIR",
                        scheme.name()
                    )));
                }
                if self.sources.iter().any(|s| {
                    matches!(
                        s,
                        SourceConfig::Rademacher { .. }
                            | SourceConfig::Constant { .. }
                            | SourceConfig::Dyadic { .. }
                    )
                }) {
                    return Err(Error::Config("Gaussian sources need a GBM process".into()));
                }
            }
        }
        Ok(())
    }

    fn spec(&self, level: u32) -> LevelSpec {
        let scheme = match self.process {
            ProcessConfig::Gbm { scheme, .. } | ProcessConfig::Cir { scheme, .. } => scheme,
        };
        LevelSpec {
            level,
            n0: self.n0,
            scheme,
        }
    }
}

fn load_table(path: &Path, base: Option<&Path>) -> Result<AnyTable> {
    let p = match base {
        Some(b) if path.is_relative() => b.join(path),
        _ => path.to_path_buf(),
    };
    import_table(&p)
}

fn gaussian_source(cfg: &SourceConfig, base: Option<&Path>) -> Result<GaussianSource> {
    let (sampler, label, ratio) = match cfg {
        SourceConfig::Rademacher { label, cost_ratio } => (
            GaussianSampler::Constant(fit_constant(1, Construction::Rademacher)?),
            label,
            cost_ratio,
        ),
        SourceConfig::Constant {
            q,
            construction,
            label,
            cost_ratio,
        } => (
            GaussianSampler::Constant(fit_constant(*q, *construction)?),
            label,
            cost_ratio,
        ),
        SourceConfig::Dyadic {
            degree,
            intervals,
            single_precision,
            label,
            cost_ratio,
        } => {
            let t = fit_gaussian_dyadic(*degree, *intervals, 0.5)?;
            let s = if *single_precision {
                GaussianSampler::DyadicF32(DyadicPolyTableF32::from_f64(&t)?)
            } else {
                GaussianSampler::Dyadic(t)
            };
            (s, label, cost_ratio)
        }
        SourceConfig::Table {
            path,
            label,
            cost_ratio,
        } => {
            let s = match load_table(path, base)? {
                AnyTable::Constant(t) => GaussianSampler::Constant(t),
                AnyTable::Dyadic(t) => GaussianSampler::Dyadic(t),
                AnyTable::NcChi2(_) => {
                    return Err(Error::Config(format!(
                        "{} holds a chi-squared table; GBM needs a Gaussian one",
                        path.display()
                    )))
                }
            };
            (s, label, cost_ratio)
        }
        SourceConfig::Ncchi2 { .. } => unreachable!("rejected by validate"),
    };
    let label = label.clone().unwrap_or_else(|| match cfg {
        SourceConfig::Rademacher { .. } => "rademacher".to_string(),
        _ => sampler.label(),
    });
    let cost_ratio = ratio.unwrap_or_else(|| default_cost_ratio(&sampler));
    Ok(GaussianSource {
        label,
        sampler,
        cost_ratio,
    })
}

fn cir_source(cfg: &SourceConfig, nu: f64, base: Option<&Path>) -> Result<CirSource> {
    let (table, label, ratio): (NcChi2Table, _, _) = match cfg {
        SourceConfig::Ncchi2 {
            degree,
            intervals,
            knots,
            label,
            cost_ratio,
        } => (
            fit_ncchi2(nu, *knots, *degree, *intervals)?,
            label,
            cost_ratio,
        ),
        SourceConfig::Table {
            path,
            label,
            cost_ratio,
        } => match load_table(path, base)? {
            AnyTable::NcChi2(t) => (t, label, cost_ratio),
            other => {
                return Err(Error::Config(format!(
                    "{} holds a {} table; CIR needs a chi-squared one",
                    path.display(),
                    other.kind_name()
                )))
            }
        },
        _ => unreachable!("rejected by validate"),
    };
    let label = label.clone().unwrap_or_else(|| {
        format!(
            "ncchi2-m{}-k{}-n{}",
            table.degree(),
            table.n_intervals(),
            table.n_knots()
        )
    });
    Ok(CirSource {
        label,
        table,
        cost_ratio: ratio.unwrap_or(CHI2_COST_RATIO),
    })
}

/// One CSV row: one statistic of one source on one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRow {
    pub level: u32,
    pub dt_fine: f64,
    pub source: String,
    pub kind: StatKind,
    pub n_paths: u64,
    pub mean: f64,
    pub variance: f64,
    pub std_error: f64,
    pub cost_seconds: f64,
    pub draws_per_path: f64,
    pub degenerate: bool,
}

impl LevelRow {
    fn new(dt_fine: f64, s: &LevelStats) -> Self {
        Self {
            level: s.level,
            dt_fine,
            source: s.source.clone(),
            kind: s.kind,
            n_paths: s.n_paths,
            mean: s.mean,
            variance: s.variance,
            std_error: s.std_error,
            cost_seconds: s.cost_seconds,
            draws_per_path: s.draws_per_path,
            degenerate: s.degenerate,
        }
    }
}

/// Predicted savings of one approximation over the pilot levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupSummary {
    pub source: String,
    /// Mean over the levels of `log₂` of the correction variance relative to
    /// the exact variance it replaces.
    pub log2_variance_gap: f64,
    /// The `ĉ/c̃` used for the simplified prediction.
    pub cost_ratio: f64,
    /// Measured wall-time ratio of exact to approximate sampling.
    pub measured_cost_ratio: f64,
    pub speedup: f64,
    pub efficiency: f64,
    pub paths_ratio: f64,
    pub nested_paths_ratio: f64,
    /// `T̂` and `T̃` from the full allocation at the configured ε.
    pub regular_cost: f64,
    pub nested_cost: f64,
    pub allocation_speedup: f64,
    /// Upper bound on `T̃/T̂`.
    pub cost_ratio_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub rows: Vec<LevelRow>,
    pub speedups: Vec<SpeedupSummary>,
    /// Multilevel estimate `Σ_l mean(P_l - P_(l-1))` from the exact pilot.
    pub estimate: f64,
    pub estimate_std_error: f64,
    /// Optimal path counts per level for the exact multilevel estimator.
    pub exact_paths: Vec<u64>,
}

impl ExperimentReport {
    pub fn find(&self, level: u32, kind: StatKind, source: &str) -> Option<&LevelRow> {
        self.rows
            .iter()
            .find(|r| r.level == level && r.kind == kind && r.source == source)
    }

    /// Least-squares slope of `log₂ variance` against `log₂ δ` over levels
    /// `lo..=hi`; NaN when fewer than two levels have positive variance.
    pub fn variance_slope(&self, kind: StatKind, source: &str, lo: u32, hi: u32) -> f64 {
        let (x, y): (Vec<f64>, Vec<f64>) = (lo..=hi)
            .filter_map(|l| self.find(l, kind, source))
            .filter(|r| r.variance > 0.0)
            .map(|r| (r.dt_fine.log2(), r.variance.log2()))
            .unzip();
        if x.len() < 2 {
            return f64::NAN;
        }
        crate::metrics::fit_line(&x, &y).0
    }

    /// Writes `levels.csv`, `speedup.csv` and `report.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        crate::metrics::write_csv(&dir.join("levels.csv"), &self.rows)?;
        crate::metrics::write_csv(&dir.join("speedup.csv"), &self.speedups)?;
        std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

struct SourceLevels {
    label: String,
    cost_ratio: f64,
    v_hat: Vec<f64>,
    c_hat: Vec<f64>,
    v_tilde: Vec<f64>,
    c_tilde: Vec<f64>,
    v_four: Vec<f64>,
    c_four: Vec<f64>,
    wall_hat: f64,
    wall_tilde: f64,
}

fn stat<'a>(stats: &'a [LevelStats], kind: StatKind, source: &str) -> Result<&'a LevelStats> {
    stats
        .iter()
        .find(|s| s.kind == kind && s.source == source)
        .ok_or_else(|| Error::Numerical(format!("missing {kind:?} statistic for {source}")))
}

/// Pilot costs per path for one source: `(ĉ, c̃, C̃)`.
fn costs(
    model: CostModel,
    ratio: f64,
    draws: f64,
    exact_wall: f64,
    approx_wall: f64,
) -> (f64, f64, f64) {
    match model {
        CostModel::Draws => (ratio * draws, draws, (ratio + 1.0) * draws),
        CostModel::Wall => {
            let (e, a) = (exact_wall.max(1e-12), approx_wall.max(1e-12));
            (e, a, e + a)
        }
    }
}

/// Runs the pilot over every level, then derives allocations and speedups.
///
/// GBM levels compare the nested estimator with the regular multilevel
/// one. CIR with the exact scheme treats each resolution on its own: the
/// exact single-level estimator against approximate samples plus an
/// exact-minus-approximate correction.
pub fn run_experiment(cfg: &ExperimentConfig, base_dir: Option<&Path>) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut rows = Vec::new();
    let mut per_level: Vec<Vec<LevelStats>> = Vec::new();
    let levels: Vec<u32> = (cfg.min_level..=cfg.max_level).collect();
    let labels: Vec<(String, f64)>;
    let (mean_kind, exact_label) = match &cfg.process {
        ProcessConfig::Gbm { params, .. } => {
            let sources = cfg
                .sources
                .iter()
                .map(|s| gaussian_source(s, base_dir))
                .collect::<Result<Vec<_>>>()?;
            labels = sources
                .iter()
                .map(|s| (s.label.clone(), s.cost_ratio))
                .collect();
            for &l in &levels {
                let spec = cfg.spec(l);
                let est = estimate_level(
                    params,
                    &spec,
                    cfg.payoff,
                    &sources,
                    cfg.pilot_paths,
                    cfg.seed,
                    cfg.batch,
                )?;
                log::info!("gbm level {l}: {} statistics", est.stats.len());
                rows.extend(est.stats.iter().map(|s| LevelRow::new(est.dt_fine, s)));
                per_level.push(est.stats);
            }
            (StatKind::TwoWay, "exact")
        }
        ProcessConfig::Cir { params, scheme } => {
            let sources = cfg
                .sources
                .iter()
                .map(|s| cir_source(s, params.nu(), base_dir))
                .collect::<Result<Vec<_>>>()?;
            labels = sources
                .iter()
                .map(|s| (s.label.clone(), s.cost_ratio))
                .collect();
            for &l in &levels {
                let spec = cfg.spec(l);
                let est = estimate_cir_level(
                    params,
                    &spec,
                    cfg.payoff,
                    &sources,
                    cfg.pilot_paths,
                    cfg.seed,
                    cfg.batch,
                )?;
                log::info!("cir level {l}: {} statistics", est.stats.len());
                rows.extend(est.stats.iter().map(|s| LevelRow::new(est.dt_fine, s)));
                per_level.push(est.stats);
            }
            if *scheme == Scheme::CirExact {
                (StatKind::Plain, "exact")
            } else {
                (StatKind::TwoWay, EULER_LABEL)
            }
        }
    };

    // The exact multilevel (or, for exact CIR transitions, finest single
    // level) estimate and its allocation.
    let exact_stats: Vec<&LevelStats> = per_level
        .iter()
        .map(|st| stat(st, mean_kind, exact_label))
        .collect::<Result<_>>()?;
    let (estimate, estimate_std_error, exact_paths) = if mean_kind == StatKind::Plain {
        let s = exact_stats.last().expect("at least one level");
        let a = optimal_allocation(&[s.variance], &[s.draws_per_path], cfg.epsilon)?;
        (s.mean, s.std_error, a.paths)
    } else {
        let v: Vec<f64> = exact_stats.iter().map(|s| s.variance).collect();
        let c: Vec<f64> = exact_stats.iter().map(|s| s.draws_per_path).collect();
        let a = optimal_allocation(&v, &c, cfg.epsilon)?;
        let m = exact_stats.iter().map(|s| s.mean).sum();
        let se = exact_stats
            .iter()
            .map(|s| s.std_error * s.std_error)
            .sum::<f64>()
            .sqrt();
        (m, se, a.paths)
    };

    let mut speedups = Vec::new();
    let is_gbm = matches!(cfg.process, ProcessConfig::Gbm { .. });
    for (label, ratio) in &labels {
        let mut sl = SourceLevels {
            label: label.clone(),
            cost_ratio: *ratio,
            v_hat: vec![],
            c_hat: vec![],
            v_tilde: vec![],
            c_tilde: vec![],
            v_four: vec![],
            c_four: vec![],
            wall_hat: 0.0,
            wall_tilde: 0.0,
        };
        for st in &per_level {
            let (hat, tilde, four) = if is_gbm {
                (
                    stat(st, StatKind::TwoWay, "exact")?,
                    stat(st, StatKind::TwoWay, label)?,
                    stat(st, StatKind::FourWay, label)?,
                )
            } else {
                (
                    stat(st, StatKind::Plain, "exact")?,
                    stat(st, StatKind::Plain, label)?,
                    stat(st, StatKind::TwoWay, label)?,
                )
            };
            let (ch, ct, cf) = costs(
                cfg.cost_model,
                *ratio,
                hat.draws_per_path,
                hat.cost_seconds,
                tilde.cost_seconds,
            );
            sl.v_hat.push(hat.variance);
            sl.c_hat.push(ch);
            sl.v_tilde.push(tilde.variance);
            sl.c_tilde.push(ct);
            sl.v_four.push(four.variance);
            sl.c_four.push(cf);
            sl.wall_hat += hat.cost_seconds;
            sl.wall_tilde += tilde.cost_seconds;
        }
        speedups.push(summarise(&sl, is_gbm, cfg.epsilon)?);
    }
    Ok(ExperimentReport {
        config: cfg.clone(),
        rows,
        speedups,
        estimate,
        estimate_std_error,
        exact_paths,
    })
}

fn summarise(sl: &SourceLevels, multilevel: bool, eps: f64) -> Result<SpeedupSummary> {
    // Level 0 of a multilevel hierarchy has no coarse path, so its "two-way"
    // variance is the plain variance; the gap is averaged over l ≥ 1 when
    // there are finer levels.
    let skip = usize::from(multilevel && sl.v_hat.len() > 1);
    let gaps: Vec<f64> = sl.v_four[skip..]
        .iter()
        .zip(&sl.v_hat[skip..])
        .map(|(f, h)| (f / h).log2())
        .collect();
    let gap = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let row = speedup_report(&sl.label, 1.0, gap.exp2(), sl.cost_ratio);

    let (regular, nested, bound) = if multilevel {
        let r = optimal_allocation(&sl.v_hat, &sl.c_hat, eps)?;
        let n = optimal_allocation_nested(&sl.v_tilde, &sl.c_tilde, &sl.v_four, &sl.c_four, eps)?;
        let (_, bound) = speedup_bound(
            &sl.v_hat,
            &sl.c_hat,
            &sl.v_tilde,
            &sl.c_tilde,
            &sl.v_four,
            &sl.c_four,
        )?;
        (r.predicted_cost, n.predicted_cost, bound)
    } else {
        // Finest resolution: one exact term against approximation plus
        // correction.
        let l = sl.v_hat.len() - 1;
        let r = optimal_allocation(&sl.v_hat[l..], &sl.c_hat[l..], eps)?;
        let n = optimal_allocation_nested(
            &sl.v_tilde[l..],
            &sl.c_tilde[l..],
            &sl.v_four[l..],
            &sl.c_four[l..],
            eps,
        )?;
        let (_, bound) = speedup_bound(
            &sl.v_hat[l..],
            &sl.c_hat[l..],
            &sl.v_tilde[l..],
            &sl.c_tilde[l..],
            &sl.v_four[l..],
            &sl.c_four[l..],
        )?;
        (r.predicted_cost, n.predicted_cost, bound)
    };
    Ok(SpeedupSummary {
        source: sl.label.clone(),
        log2_variance_gap: gap,
        cost_ratio: sl.cost_ratio,
        measured_cost_ratio: sl.wall_hat / sl.wall_tilde.max(1e-300),
        speedup: row.speedup,
        efficiency: row.efficiency,
        paths_ratio: row.paths_ratio,
        nested_paths_ratio: row.nested_paths_ratio,
        regular_cost: regular,
        nested_cost: nested,
        allocation_speedup: regular / nested,
        cost_ratio_bound: bound,
    })
}
