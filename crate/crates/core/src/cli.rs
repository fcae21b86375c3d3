//! The `arv` command line: fit, sample, error, mlmc, bench and reproduce.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 numerical
//! failure, 4 I/O or table-format error.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bench::{bench_gaussian, bench_ncchi2, BenchRow};
use crate::error::{Error, Result};
use crate::exact_dist::{norm_ppf, NcChi2Ref};
use crate::fit::{
    export_table, fit_constant, fit_gaussian_dyadic, fit_ncchi2, import_table, AnyTable,
    Construction, TableFormat,
};
use crate::metrics::{lp_error_constant, lp_error_dyadic, rmse_ncchi2, write_csv};
use crate::mlmc::{run_experiment, ExperimentConfig};
use crate::repro::{reproduce, ReproOptions, IDS};
use crate::sampler::{InverseCdf, NcChi2Slice, UniformStream};

#[derive(Debug, Parser)]
#[command(
    name = "arv",
    version,
    about = "Approximate random variables: fit, sample, measure, simulate"
)]
pub struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true, env = "ARV_THREADS")]
    pub threads: Option<usize>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a table and write it to a file.
    Fit(FitArgs),
    /// Draw samples from a table (and the exact quantile) as CSV.
    Sample(SampleArgs),
    /// Measure the Lp error of a table file.
    Error(ErrorArgs),
    /// Run a multilevel Monte Carlo pilot from a TOML experiment file.
    Mlmc(MlmcArgs),
    /// Relative sampler throughput.
    Bench(BenchArgs),
    /// Regenerate a figure or table as CSV plus a manifest.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Dist {
    Gaussian,
    Ncchi2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Constant,
    Dyadic,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long, value_enum, default_value = "gaussian")]
    pub dist: Dist,
    #[arg(long, value_enum, default_value = "dyadic")]
    pub kind: Kind,
    /// Constant tables: 2^q intervals.
    #[arg(long, default_value_t = 10)]
    pub q: u32,
    #[arg(long, default_value = "l1")]
    pub construction: Construction,
    #[arg(long, default_value_t = 1)]
    pub degree: usize,
    /// Dyadic intervals below ½ (the table has one more entry).
    #[arg(long, default_value_t = 15)]
    pub intervals: usize,
    #[arg(long, default_value_t = 0.5)]
    pub decay_rate: f64,
    /// Degrees of freedom (ncchi2).
    #[arg(long, default_value_t = 1.0)]
    pub nu: f64,
    /// Interpolation knots in y (ncchi2).
    #[arg(long, default_value_t = crate::fit::ncchi2::DEFAULT_KNOTS)]
    pub knots: usize,
    /// Also write a human-readable dump next to the binary file.
    #[arg(long)]
    pub text: bool,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Table file; omit to sample the exact Gaussian only.
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long, short, default_value_t = 10)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub stream: u64,
    /// Non-centrality for χ² tables.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// CSV output (default: standard output).
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ErrorArgs {
    #[arg(long)]
    pub table: PathBuf,
    /// Norm orders (Gaussian tables).
    #[arg(long, value_delimiter = ',', default_value = "2")]
    pub p: Vec<f64>,
    /// Non-centralities (χ² tables).
    #[arg(long, value_delimiter = ',', default_value = "1,5,10,50,100,200")]
    pub lambda: Vec<f64>,
    /// Midpoint grid size per λ (χ² tables).
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MlmcArgs {
    #[arg(long, short)]
    pub config: PathBuf,
    #[arg(long, short, default_value = "mlmc_out")]
    pub out: PathBuf,
    /// Overrides the seed in the experiment file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the pilot path count.
    #[arg(long)]
    pub pilot_paths: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Table files to time; without any, a fitted linear and a q=10 constant
    /// Gaussian table are used.
    #[arg(long)]
    pub table: Vec<PathBuf>,
    #[arg(long, default_value_t = 1_000_000)]
    pub batch: usize,
    #[arg(long, default_value_t = 10)]
    pub repetitions: usize,
    /// λ for χ² tables.
    #[arg(long, default_value_t = 10.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    /// One of fig1b, fig2b, fig3a, fig3b, fig4b, table3, table5a, table5b, table6.
    pub id: String,
    #[arg(long, default_value = "repro")]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Smaller sample sizes for a fast smoke run.
    #[arg(long)]
    pub quick: bool,
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .try_init();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return 2;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            log::warn!("thread pool already initialised: {e}");
        }
    }
    match run(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Fit(a) => cmd_fit(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Error(a) => cmd_error(a),
        Command::Mlmc(a) => cmd_mlmc(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Reproduce(a) => cmd_reproduce(a),
    }
}

fn extremes(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        })
}

pub fn cmd_fit(a: &FitArgs) -> Result<()> {
    let table = match (a.dist, a.kind) {
        (Dist::Gaussian, Kind::Constant) => AnyTable::Constant(fit_constant(a.q, a.construction)?),
        (Dist::Gaussian, Kind::Dyadic) => {
            AnyTable::Dyadic(fit_gaussian_dyadic(a.degree, a.intervals, a.decay_rate)?)
        }
        (Dist::Ncchi2, Kind::Dyadic) => {
            AnyTable::NcChi2(fit_ncchi2(a.nu, a.knots, a.degree, a.intervals)?)
        }
        (Dist::Ncchi2, Kind::Constant) => {
            return Err(Error::Config(
                "non-central chi-squared tables are piecewise polynomial; use --kind dyadic".into(),
            ))
        }
    };
    export_table(&table, &a.out, TableFormat::Binary)?;
    if a.text {
        export_table(&table, &a.out.with_extension("txt"), TableFormat::Text)?;
    }
    let (lo, hi) = extremes(&table.payload());
    println!("wrote {} table to {}", table.kind_name(), a.out.display());
    match &table {
        AnyTable::Constant(t) => {
            println!("entries: {}", t.len());
            println!("L2 error: {:.6e}", lp_error_constant(t, 2.0)?.value);
        }
        AnyTable::Dyadic(t) => {
            println!(
                "entries: {} ({} intervals, degree {})",
                t.coeffs()[0].len(),
                t.n_intervals(),
                t.degree()
            );
            println!("L2 error: {:.6e}", lp_error_dyadic(t, 2.0)?.value);
        }
        AnyTable::NcChi2(t) => {
            println!(
                "knots: {}, intervals per half: {}, degree {}, nu {}",
                t.n_knots(),
                t.n_intervals(),
                t.degree(),
                t.nu()
            );
            let cells = rmse_ncchi2(&[t], &[1.0], 10_000)?;
            if let Some(r) = cells[0].rmse {
                println!("RMSE at lambda=1 (10^4 points): {r:.4e}");
            }
        }
    }
    println!("coefficient range: [{lo:.6e}, {hi:.6e}]");
    Ok(())
}

#[derive(Serialize)]
struct SampleRow {
    index: usize,
    u: f64,
    approx: Option<f64>,
    exact: Option<f64>,
}

fn emit_csv<T: Serialize>(out: &Option<PathBuf>, rows: &[T]) -> Result<()> {
    match out {
        Some(p) => write_csv(p, rows),
        None => {
            let mut w = csv::Writer::from_writer(std::io::stdout().lock());
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
            Ok(())
        }
    }
}

pub fn cmd_sample(a: &SampleArgs) -> Result<()> {
    let u = UniformStream::new(a.seed, a.stream).take_vec(a.n);
    let (approx, exact): (Option<Vec<f64>>, Vec<f64>) = match &a.table {
        None => (None, u.iter().map(|&x| norm_ppf(x)).collect()),
        Some(p) => match import_table(p)? {
            AnyTable::Constant(t) => (
                Some(t.eval_vec(&u)),
                u.iter().map(|&x| norm_ppf(x)).collect(),
            ),
            AnyTable::Dyadic(t) => (
                Some(t.eval_vec(&u)),
                u.iter().map(|&x| norm_ppf(x)).collect(),
            ),
            AnyTable::NcChi2(t) => {
                let slice = NcChi2Slice::new(&t, a.lambda)?;
                let dist = NcChi2Ref::new(t.nu(), a.lambda)?;
                let e = u
                    .iter()
                    .map(|&x| dist.quantile(x))
                    .collect::<Result<Vec<_>>>()?;
                (Some(slice.eval_vec(&u)), e)
            }
        },
    };
    let rows: Vec<SampleRow> = (0..a.n)
        .map(|i| SampleRow {
            index: i,
            u: u[i],
            approx: approx.as_ref().map(|v| v[i]),
            exact: Some(exact[i]),
        })
        .collect();
    emit_csv(&a.out, &rows)
}

#[derive(Serialize)]
struct ErrorOut {
    table: String,
    lambda: Option<f64>,
    p: f64,
    error: Option<f64>,
    error_estimate: Option<f64>,
    method: String,
}

pub fn cmd_error(a: &ErrorArgs) -> Result<()> {
    let table = import_table(&a.table)?;
    let name = a.table.display().to_string();
    let mut rows = Vec::new();
    match &table {
        AnyTable::Constant(_) | AnyTable::Dyadic(_) => {
            for &p in &a.p {
                if !(p >= 1.0) {
                    return Err(Error::Config(format!("norm order must be >= 1, got {p}")));
                }
                let r = match &table {
                    AnyTable::Constant(t) => lp_error_constant(t, p)?,
                    AnyTable::Dyadic(t) => lp_error_dyadic(t, p)?,
                    AnyTable::NcChi2(_) => unreachable!(),
                };
                if r.flagged {
                    log::warn!(
                        "p={p}: error estimate {:.2e} is large relative to the value",
                        r.error_estimate
                    );
                }
                rows.push(ErrorOut {
                    table: name.clone(),
                    lambda: None,
                    p,
                    error: Some(r.value),
                    error_estimate: Some(r.error_estimate),
                    method: r.method.name().into(),
                });
            }
        }
        AnyTable::NcChi2(t) => {
            for c in rmse_ncchi2(&[t], &a.lambda, a.samples)? {
                if let Some(n) = &c.note {
                    log::warn!("lambda={}: {n}", c.lambda);
                }
                rows.push(ErrorOut {
                    table: name.clone(),
                    lambda: Some(c.lambda),
                    p: 2.0,
                    error: c.rmse,
                    error_estimate: None,
                    method: format!("midpoint_grid_{}", c.n_samples),
                });
            }
        }
    }
    emit_csv(&a.out, &rows)
}

pub fn cmd_mlmc(a: &MlmcArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::from_path(&a.config)?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(n) = a.pilot_paths {
        cfg.pilot_paths = n;
    }
    let base = a.config.parent().map(|p| p.to_path_buf());
    let rep = run_experiment(&cfg, base.as_deref())?;
    rep.write(&a.out)?;
    let mut out = std::io::stdout().lock();
    writeln!(
        out,
        "estimate {:.6} ± {:.2e} (exact pilot)",
        rep.estimate, rep.estimate_std_error
    )?;
    writeln!(
        out,
        "{:<24} {:>10} {:>8} {:>9} {:>10}",
        "source", "log2 gap", "ratio", "speedup", "efficiency"
    )?;
    for s in &rep.speedups {
        writeln!(
            out,
            "{:<24} {:>10.2} {:>8.1} {:>9.2} {:>9.1}%",
            s.source,
            s.log2_variance_gap,
            s.cost_ratio,
            s.speedup,
            100.0 * s.efficiency
        )?;
    }
    writeln!(out, "results in {}", a.out.display())?;
    Ok(())
}

pub fn cmd_bench(a: &BenchArgs) -> Result<()> {
    if a.batch == 0 || a.repetitions == 0 {
        return Err(Error::Config(
            "batch and repetitions must be positive".into(),
        ));
    }
    let mut rows: Vec<BenchRow> = Vec::new();
    let mut gaussian: Vec<(String, AnyTable)> = Vec::new();
    if a.table.is_empty() {
        gaussian.push((
            "dyadic-m1-k15".into(),
            AnyTable::Dyadic(fit_gaussian_dyadic(1, 15, 0.5)?),
        ));
        gaussian.push((
            "constant-q10".into(),
            AnyTable::Constant(fit_constant(10, Construction::L1)?),
        ));
    }
    for p in &a.table {
        let t = import_table(p)?;
        match t {
            AnyTable::NcChi2(ref c) => {
                rows.extend(bench_ncchi2(c, a.lambda, a.batch, a.repetitions, a.seed)?)
            }
            other => gaussian.push((p.display().to_string(), other)),
        }
    }
    if !gaussian.is_empty() {
        let samplers: Vec<(String, &dyn InverseCdf)> = gaussian
            .iter()
            .map(|(n, t)| {
                let s: &dyn InverseCdf = match t {
                    AnyTable::Constant(c) => c,
                    AnyTable::Dyadic(d) => d,
                    AnyTable::NcChi2(_) => unreachable!(),
                };
                (n.clone(), s)
            })
            .collect();
        rows.extend(bench_gaussian(&samplers, a.batch, a.repetitions, a.seed));
    }
    for r in rows.iter().filter(|r| r.noisy) {
        log::warn!(
            "noisy timing for {} ({}): cv {:.0}%",
            r.sampler,
            r.regime,
            100.0 * r.cv
        );
    }
    emit_csv(&a.out, &rows)
}

pub fn cmd_reproduce(a: &ReproduceArgs) -> Result<()> {
    if !IDS.contains(&a.id.as_str()) {
        return Err(Error::Config(format!(
            "unknown reproduction id {:?}; known: {}",
            a.id,
            IDS.join(", ")
        )));
    }
    let mut opts = if a.quick {
        ReproOptions::quick()
    } else {
        ReproOptions::default()
    };
    if let Some(s) = a.seed {
        opts.seed = s;
    }
    let m = reproduce(&a.id, &a.out_dir, &opts)?;
    for c in &m.checks {
        println!(
            "{} {} = {:.4e} (accepted [{:.3e}, {:.3e}])",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.lo,
            c.hi
        );
    }
    println!(
        "wrote {} file(s) and {}_manifest.json to {}",
        m.files.len(),
        m.id,
        a.out_dir.display()
    );
    Ok(())
}
