//! Drivers that regenerate each reference figure and table as CSV, with a
//! manifest of the settings used and tolerance verdicts.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{fit_ncchi2, Construction};
use crate::metrics::{
    constant_error_bound_check, fit_line, rmse_ncchi2, scaling_study_constant,
    scaling_study_dyadic, write_csv, ErrorRow,
};
use crate::mlmc::{
    run_experiment, CirParams, CostModel, ExperimentConfig, ExperimentReport, GbmParams, Payoff,
    ProcessConfig, Scheme, SourceConfig, StatKind, EULER_LABEL,
};

pub const IDS: [&str; 9] = [
    "fig1b", "fig2b", "fig3a", "fig3b", "fig4b", "table3", "table5a", "table5b", "table6",
];

/// Rows λ ∈ {1, 5, 10, 50, 100, 200}, columns ν ∈ {1, 5, 10, 50, 100}.
pub const RMSE_GRID_LAMBDAS: [f64; 6] = [1.0, 5.0, 10.0, 50.0, 100.0, 200.0];
pub const RMSE_GRID_NUS: [f64; 5] = [1.0, 5.0, 10.0, 50.0, 100.0];

/// Reference RMSE of the linear (m = 1) tables, `[λ][ν]`.
pub const RMSE_REFERENCE_LINEAR: [[f64; 5]; 6] = [
    [0.036, 0.036, 0.041, 0.070, 0.095],
    [0.045, 0.047, 0.050, 0.076, 0.100],
    [0.054, 0.056, 0.059, 0.081, 0.104],
    [0.098, 0.099, 0.101, 0.116, 0.133],
    [0.134, 0.135, 0.136, 0.148, 0.161],
    [0.186, 0.187, 0.188, 0.196, 0.207],
];

/// Reference RMSE of the cubic (m = 3) tables, `[λ][ν]`.
pub const RMSE_REFERENCE_CUBIC: [[f64; 5]; 6] = [
    [0.004, 0.005, 0.006, 0.007, 0.006],
    [0.004, 0.004, 0.005, 0.010, 0.015],
    [0.006, 0.005, 0.005, 0.009, 0.014],
    [0.006, 0.007, 0.005, 0.010, 0.011],
    [0.013, 0.008, 0.009, 0.011, 0.014],
    [0.009, 0.012, 0.011, 0.012, 0.015],
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReproOptions {
    pub seed: u64,
    /// Pilot paths per level for the simulation figures.
    pub pilot_paths: usize,
    /// Grid points per RMSE cell.
    pub rmse_samples: usize,
}

impl Default for ReproOptions {
    fn default() -> Self {
        Self {
            seed: 20240601,
            pilot_paths: 100_000,
            rmse_samples: 1_000_000,
        }
    }
}

impl ReproOptions {
    /// Small sizes for smoke runs; verdicts are then indicative only.
    pub fn quick() -> Self {
        Self {
            pilot_paths: 5_000,
            rmse_samples: 20_000,
            ..Self::default()
        }
    }
}

/// A measured quantity against its accepted range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            value,
            lo,
            hi,
            pass: value >= lo && value <= hi,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub id: String,
    pub crate_version: String,
    pub options: ReproOptions,
    pub threads: usize,
    pub target: String,
    pub files: Vec<PathBuf>,
    pub checks: Vec<Check>,
    pub all_pass: bool,
}

/// Runs one reproduction into `out_dir` and writes `<id>_manifest.json`.
pub fn reproduce(id: &str, out_dir: &Path, opts: &ReproOptions) -> Result<Manifest> {
    std::fs::create_dir_all(out_dir)?;
    let (files, checks) = match id {
        "fig1b" => fig1b(out_dir)?,
        "fig2b" => fig2b(out_dir)?,
        "fig3a" => fig3(out_dir, Scheme::EulerMaruyama, "fig3a", opts)?,
        "fig3b" => fig3(out_dir, Scheme::Milstein, "fig3b", opts)?,
        "table3" => table3(out_dir, opts)?,
        "table5a" => table5(out_dir, 1, opts)?,
        "table5b" => table5(out_dir, 3, opts)?,
        "fig4b" => fig4b(out_dir, opts)?,
        "table6" => table6(out_dir, opts)?,
        other => {
            return Err(Error::Config(format!(
                "unknown reproduction id {other:?}; known: {}",
                IDS.join(", ")
            )))
        }
    };
    let manifest = Manifest {
        id: id.to_string(),
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        options: *opts,
        threads: rayon::current_num_threads(),
        target: format!("{}-{}", std::env::consts::ARCH, std::env::consts::OS),
        all_pass: checks.iter().all(|c| c.pass),
        files,
        checks,
    };
    std::fs::write(
        out_dir.join(format!("{id}_manifest.json")),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(manifest)
}

type Outcome = (Vec<PathBuf>, Vec<Check>);

fn fig1b(dir: &Path) -> Result<Outcome> {
    let study = scaling_study_constant(1, 16, &[2.0, 4.0, 6.0], Construction::L1)?;
    let mut bound_rows = Vec::new();
    for p in [2.0, 4.0, 6.0] {
        bound_rows.extend(constant_error_bound_check(8, 16, 8, p, Construction::L1)?);
    }
    let f1 = dir.join("fig1b.csv");
    let f2 = dir.join("fig1b_bound.csv");
    write_csv(&f1, &study.rows)?;
    write_csv(&f2, &bound_rows)?;
    let l2 = |q: u32| {
        study
            .rows
            .iter()
            .find(|r| r.q == Some(q) && r.p == 2.0)
            .map(|r| r.error)
            .unwrap_or(f64::NAN)
    };
    let (qs, ys): (Vec<f64>, Vec<f64>) =
        (8..=14).map(|q| (q as f64, (l2(q) * l2(q)).log2())).unzip();
    let worst = bound_rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok((
        vec![f1, f2],
        vec![
            Check::new("l2_drop_q1_over_q10", l2(1) / l2(10), 50.0, 200.0),
            Check::new("slope_log2_mse_q8_14", fit_line(&qs, &ys).0, -1.25, -0.95),
            Check::new("max_measured_over_bound", worst, 0.0, 1.0),
        ],
    ))
}

fn fig2b(dir: &Path) -> Result<Outcome> {
    let ks: Vec<usize> = (2..=20).collect();
    let rows = scaling_study_dyadic(&[1, 3, 5], &ks, &[0.5], &[2.0])?;
    let f = dir.join("fig2b.csv");
    write_csv(&f, &rows)?;
    let at = |m: usize| {
        rows.iter()
            .find(|r: &&ErrorRow| r.m == Some(m) && r.k == Some(15))
            .map(|r| r.error)
            .unwrap_or(f64::NAN)
    };
    Ok((
        vec![f],
        vec![
            Check::new("m1_k15_l2", at(1), 5e-3, 2e-2),
            Check::new("m3_k15_l2", at(3), 5e-5, 5e-4),
            Check::new("m3_over_m5_k15", at(3) / at(5), 0.0, 3.0),
        ],
    ))
}

/// The GBM pilot behind `fig3a`, `fig3b` and `table3`.
pub fn gbm_experiment(scheme: Scheme, opts: &ReproOptions) -> ExperimentConfig {
    ExperimentConfig {
        process: ProcessConfig::Gbm {
            scheme,
            params: GbmParams::default(),
        },
        payoff: Payoff::Identity,
        seed: opts.seed,
        min_level: 0,
        max_level: 8,
        n0: crate::mlmc::DEFAULT_N0,
        pilot_paths: opts.pilot_paths,
        batch: crate::mlmc::DEFAULT_BATCH,
        epsilon: 1e-3,
        cost_model: CostModel::Draws,
        sources: vec![
            SourceConfig::Rademacher {
                label: Some("rademacher".into()),
                cost_ratio: None,
            },
            SourceConfig::Constant {
                q: 10,
                construction: Construction::L1,
                label: Some("constant".into()),
                cost_ratio: None,
            },
            SourceConfig::Dyadic {
                degree: 1,
                intervals: 15,
                single_precision: false,
                label: Some("linear".into()),
                cost_ratio: None,
            },
            SourceConfig::Dyadic {
                degree: 3,
                intervals: 15,
                single_precision: false,
                label: Some("cubic".into()),
                cost_ratio: None,
            },
        ],
    }
}

/// The exact-transition CIR pilot behind `fig4b` and `table6`: δ from
/// 2⁻² to 2⁻⁸.
pub fn cir_experiment(scheme: Scheme, opts: &ReproOptions) -> ExperimentConfig {
    let sources = if scheme == Scheme::CirExact {
        vec![
            SourceConfig::Ncchi2 {
                degree: 1,
                intervals: 15,
                knots: 16,
                label: Some("linear".into()),
                cost_ratio: None,
            },
            SourceConfig::Ncchi2 {
                degree: 3,
                intervals: 15,
                knots: 16,
                label: Some("cubic".into()),
                cost_ratio: None,
            },
        ]
    } else {
        Vec::new()
    };
    ExperimentConfig {
        process: ProcessConfig::Cir {
            scheme,
            params: CirParams::default(),
        },
        payoff: Payoff::Identity,
        seed: opts.seed,
        min_level: 1,
        max_level: 7,
        n0: crate::mlmc::DEFAULT_N0,
        pilot_paths: opts.pilot_paths,
        batch: crate::mlmc::DEFAULT_BATCH,
        epsilon: 1e-3,
        cost_model: CostModel::Draws,
        sources,
    }
}

fn fig3(dir: &Path, scheme: Scheme, id: &str, opts: &ReproOptions) -> Result<Outcome> {
    let rep = run_experiment(&gbm_experiment(scheme, opts), None)?;
    let f = dir.join(format!("{id}.csv"));
    write_csv(&f, &rep.rows)?;
    let two_lo = if scheme == Scheme::Milstein {
        1.6
    } else {
        0.75
    };
    let two_hi = if scheme == Scheme::Milstein {
        2.4
    } else {
        1.25
    };
    let mut checks = vec![Check::new(
        "two_way_exact_slope",
        rep.variance_slope(StatKind::TwoWay, "exact", 2, 8),
        two_lo,
        two_hi,
    )];
    for s in ["constant", "linear", "cubic"] {
        checks.push(Check::new(
            format!("four_way_{s}_slope"),
            rep.variance_slope(StatKind::FourWay, s, 3, 8),
            0.75,
            1.25,
        ));
    }
    Ok((vec![f], checks))
}

fn table3(dir: &Path, opts: &ReproOptions) -> Result<Outcome> {
    let rep = run_experiment(&gbm_experiment(Scheme::EulerMaruyama, opts), None)?;
    let f = dir.join("table3.csv");
    write_csv(&f, &rep.speedups)?;
    let get = |s: &str| {
        rep.speedups
            .iter()
            .find(|r| r.source == s)
            .expect("configured source")
    };
    let (rad, lin, cub) = (get("rademacher"), get("linear"), get("cubic"));
    Ok((
        vec![f],
        vec![
            Check::new("rademacher_gap", rad.log2_variance_gap, -2.0, 0.0),
            Check::new(
                "constant_gap",
                get("constant").log2_variance_gap,
                -15.0,
                -11.0,
            ),
            Check::new("linear_gap", lin.log2_variance_gap, -16.0, -12.0),
            Check::new("cubic_gap", cub.log2_variance_gap, f64::NEG_INFINITY, -20.0),
            Check::new(
                "linear_over_rademacher_speedup",
                lin.speedup / rad.speedup,
                4.0,
                f64::INFINITY,
            ),
            Check::new("linear_efficiency", lin.efficiency, 0.9, 1.0),
            Check::new("cubic_efficiency", cub.efficiency, 0.9, 1.0),
            Check::new("rademacher_efficiency", rad.efficiency, 0.0, 0.3),
        ],
    ))
}

/// One cell of the `table5a`/`table5b` grid, laid out for CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseGridRow {
    pub lambda: f64,
    pub nu: f64,
    pub rmse: Option<f64>,
    pub reference: f64,
    pub ratio: Option<f64>,
}

/// RMSE of `m`-degree tables over the `table5a`/`table5b` grid.
pub fn rmse_grid(m: usize, n_samples: usize) -> Result<Vec<RmseGridRow>> {
    let reference = if m == 1 {
        &RMSE_REFERENCE_LINEAR
    } else {
        &RMSE_REFERENCE_CUBIC
    };
    let mut rows = Vec::new();
    for (j, &nu) in RMSE_GRID_NUS.iter().enumerate() {
        let table = fit_ncchi2(nu, 16, m, 15)?;
        let cells = rmse_ncchi2(&[&table], &RMSE_GRID_LAMBDAS, n_samples)?;
        for (i, c) in cells.iter().enumerate() {
            let r = reference[i][j];
            rows.push(RmseGridRow {
                lambda: c.lambda,
                nu,
                rmse: c.rmse,
                reference: r,
                ratio: c.rmse.map(|x| x / r),
            });
        }
    }
    rows.sort_by(|a, b| {
        (a.lambda, a.nu)
            .partial_cmp(&(b.lambda, b.nu))
            .expect("finite grid")
    });
    Ok(rows)
}

fn table5(dir: &Path, m: usize, opts: &ReproOptions) -> Result<Outcome> {
    let rows = rmse_grid(m, opts.rmse_samples)?;
    let id = if m == 1 { "table5a" } else { "table5b" };
    let f = dir.join(format!("{id}.csv"));
    write_csv(&f, &rows)?;
    // The 6x5 reference layout: one row per λ, one column per ν.
    let fm = dir.join(format!("{id}_matrix.csv"));
    let mut w = csv::Writer::from_path(&fm).map_err(Error::from)?;
    let mut header = vec!["lambda".to_string()];
    header.extend(RMSE_GRID_NUS.iter().map(|n| format!("nu={n}")));
    w.write_record(&header).map_err(Error::from)?;
    for &lam in &RMSE_GRID_LAMBDAS {
        let mut rec = vec![lam.to_string()];
        for &nu in &RMSE_GRID_NUS {
            let cell = rows
                .iter()
                .find(|r| r.lambda == lam && r.nu == nu)
                .and_then(|r| r.rmse);
            rec.push(cell.map(|x| format!("{x:.4}")).unwrap_or_default());
        }
        w.write_record(&rec).map_err(Error::from)?;
    }
    w.flush()?;
    let (lo, hi) = if m == 1 { (0.5, 1.5) } else { (1.0 / 3.0, 3.0) };
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio.unwrap_or(f64::NAN)).collect();
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let missing = ratios.iter().filter(|r| r.is_nan()).count() as f64;
    Ok((
        vec![f, fm],
        vec![
            Check::new("min_ratio_to_reference", min, lo, hi),
            Check::new("max_ratio_to_reference", max, lo, hi),
            Check::new("failed_cells", missing, 0.0, 0.0),
        ],
    ))
}

fn fig4b(dir: &Path, opts: &ReproOptions) -> Result<Outcome> {
    let exact = run_experiment(&cir_experiment(Scheme::CirExact, opts), None)?;
    let euler = run_experiment(&cir_experiment(Scheme::CirEulerTruncated, opts), None)?;
    let f = dir.join("fig4b.csv");
    let mut rows = exact.rows.clone();
    rows.extend(euler.rows.iter().cloned());
    write_csv(&f, &rows)?;
    let plain: Vec<f64> = exact
        .rows
        .iter()
        .filter(|r| r.kind == StatKind::Plain && r.source == "exact")
        .map(|r| r.variance)
        .collect();
    let flat = plain.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        / plain.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((
        vec![f],
        vec![
            Check::new("exact_variance_max_over_min", flat, 1.0, 1.2),
            Check::new(
                "euler_correction_slope",
                euler.variance_slope(StatKind::TwoWay, EULER_LABEL, 1, 7),
                0.7,
                1.3,
            ),
            Check::new("linear_gap", gap(&exact, "linear"), -17.0, -13.0),
        ],
    ))
}

fn gap(rep: &ExperimentReport, source: &str) -> f64 {
    rep.speedups
        .iter()
        .find(|s| s.source == source)
        .map(|s| s.log2_variance_gap)
        .unwrap_or(f64::NAN)
}

fn table6(dir: &Path, opts: &ReproOptions) -> Result<Outcome> {
    let rep = run_experiment(&cir_experiment(Scheme::CirExact, opts), None)?;
    let f = dir.join("table6.csv");
    write_csv(&f, &rep.speedups)?;
    Ok((
        vec![f],
        vec![Check::new("linear_gap", gap(&rep, "linear"), -17.0, -13.0)],
    ))
}
