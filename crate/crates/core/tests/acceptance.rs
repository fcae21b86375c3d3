//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Every tolerance is pinned below. The binary exits 0 after printing the
//! verdicts unless `ARV_ACCEPTANCE_STRICT=1` is set, in which case any FAIL
//! makes it exit 1. Pass criterion numbers as arguments to run a subset:
//! `cargo test --release --test acceptance -- 6 7`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use approx_rv::bench::{bench_gaussian, bench_ncchi2};
use approx_rv::exact_dist::{norm_cdf, norm_ppf, NcChi2Ref};
use approx_rv::fit::{
    fit_constant, fit_gaussian_dyadic, fit_ncchi2, gaussian_singular_linear, Construction,
};
use approx_rv::metrics::{
    constant_error_bound_check, fit_line, gaussian_tail_moment, lp_error_constant, lp_error_dyadic,
    rmse_ncchi2, tail_density_ratio, tail_quantile_sandwich,
};
use approx_rv::mlmc::{
    optimal_allocation, run_experiment, ExperimentReport, Scheme, StatKind, EULER_LABEL,
};
use approx_rv::repro::{
    cir_experiment, gbm_experiment, ReproOptions, RMSE_GRID_LAMBDAS, RMSE_GRID_NUS,
    RMSE_REFERENCE_CUBIC, RMSE_REFERENCE_LINEAR,
};
use approx_rv::sampler::{dyadic_index, eval_constant, eval_dyadic, InverseCdf, UniformStream};

const SEED: u64 = 20240601;
const PILOT_PATHS: usize = 100_000;

// Criterion 1
const C1_DROP: (f64, f64) = (50.0, 200.0);
const C1_SLOPE: (f64, f64) = (-1.25, -0.95);
// Criterion 2: the calibration point itself has ratio 1 up to rounding.
const C2_RATIO_MAX: f64 = 1.0 + 1e-12;
// Criterion 3
const C3_M1: (f64, f64) = (5e-3, 2e-2);
const C3_M3: (f64, f64) = (5e-5, 5e-4);
const C3_M5_GAIN_MAX: f64 = 3.0;
// Criterion 4
const C4_REL: f64 = 0.10;
// Criterion 5
const C5_DENSITY_SLACK: f64 = 1e-3;
const C5_MOMENT_BAND: f64 = 5.0;
// Criterion 6. Four-way differences keep the scheme's strong order, so
// Milstein four-way slopes are held to the Milstein band.
const C6_EM_SLOPE: (f64, f64) = (0.75, 1.25);
const C6_MIL_SLOPE: (f64, f64) = (1.6, 2.4);
const C6_LINEAR_GAP: (f64, f64) = (-16.0, -12.0);
const C6_CUBIC_GAP_MAX: f64 = -20.0;
const C6_RADEMACHER_GAP: (f64, f64) = (-2.0, 0.0);
// Criterion 7
const C7_SPEEDUP_RATIO_MIN: f64 = 4.0;
const C7_EFFICIENCY_MIN: f64 = 0.9;
const C7_RADEMACHER_EFFICIENCY_MAX: f64 = 0.3;
// Criterion 8
const C8_LINEAR_REL: f64 = 0.5;
const C8_CUBIC_FACTOR: f64 = 3.0;
const C8_SAMPLES: usize = 1_000_000;
// Criterion 9
const C9_FLAT_MAX: f64 = 1.2;
const C9_EULER_SLOPE: (f64, f64) = (0.7, 1.3);
const C9_LINEAR_GAP: (f64, f64) = (-17.0, -13.0);
// Criterion 10
const C10_GAUSSIAN_TOL: f64 = 1e-9;
const C10_NCCHI2_TOL: f64 = 1e-8;
const C10_GRID: usize = 10_000;
// Criterion 11 (soft)
const C11_GAUSSIAN_MIN: f64 = 5.0;
const C11_NCCHI2_MIN: f64 = 50.0;
const C11_BATCH: usize = 1_000_000;
// Criterion 12
const C12_GRID: usize = 10_000;
const C12_INDEX_SAMPLES: usize = 1_000_000;
const C12_NESTED_REL: f64 = 1e-12;
const C12_TELESCOPE_SE: f64 = 3.0;

#[derive(PartialEq, Clone, Copy)]
enum Verdict {
    Pass,
    Fail,
    Warn,
}

struct Outcome {
    verdict: Verdict,
    lines: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Self {
            verdict: Verdict::Pass,
            lines: Vec::new(),
        }
    }

    fn check(&mut self, name: &str, ok: bool, detail: String) {
        self.lines.push(format!(
            "    [{}] {name}: {detail}",
            if ok { "ok" } else { "x" }
        ));
        if !ok {
            self.verdict = Verdict::Fail;
        }
    }

    fn soft(&mut self, name: &str, ok: bool, detail: String) {
        self.lines.push(format!(
            "    [{}] {name}: {detail}",
            if ok { "ok" } else { "warn" }
        ));
        if !ok && self.verdict == Verdict::Pass {
            self.verdict = Verdict::Warn;
        }
    }

    fn note(&mut self, detail: String) {
        self.lines.push(format!("    {detail}"));
    }
}

fn within(x: f64, (lo, hi): (f64, f64)) -> bool {
    x >= lo && x <= hi
}

fn c1() -> Outcome {
    let mut o = Outcome::new();
    let l2 = |q: u32| {
        lp_error_constant(&fit_constant(q, Construction::L1).unwrap(), 2.0)
            .unwrap()
            .value
    };
    let errs: Vec<f64> = (1..=14).map(l2).collect();
    let drop = errs[0] / errs[9];
    o.check(
        "L2 drop q=1 -> q=10",
        within(drop, C1_DROP),
        format!("{drop:.2} in {C1_DROP:?}"),
    );
    let (x, y): (Vec<f64>, Vec<f64>) = (8..=14)
        .map(|q| (q as f64, (errs[q - 1] * errs[q - 1]).log2()))
        .unzip();
    let slope = fit_line(&x, &y).0;
    o.check(
        "slope log2(err^2) vs q, q in 8..=14",
        within(slope, C1_SLOPE),
        format!("{slope:.4} in {C1_SLOPE:?}"),
    );
    o
}

fn c2() -> Outcome {
    let mut o = Outcome::new();
    for p in [2.0, 4.0, 6.0] {
        let rows = constant_error_bound_check(8, 16, 8, p, Construction::L1).unwrap();
        let worst = rows
            .iter()
            .max_by(|a, b| a.ratio.total_cmp(&b.ratio))
            .unwrap();
        o.check(
            &format!("p={p}: measured <= C 2^-q q^(-p/2), q in 8..=16"),
            worst.ratio <= C2_RATIO_MAX,
            format!("max measured/bound {:.4} at q={}", worst.ratio, worst.q),
        );
    }
    o
}

fn c3() -> Outcome {
    let mut o = Outcome::new();
    let e = |m: usize| {
        lp_error_dyadic(&fit_gaussian_dyadic(m, 15, 0.5).unwrap(), 2.0)
            .unwrap()
            .value
    };
    let (e1, e3, e5) = (e(1), e(3), e(5));
    o.check(
        "m=1, K=15 L2 error",
        within(e1, C3_M1),
        format!("{e1:.4e} in {C3_M1:?}"),
    );
    o.check(
        "m=3, K=15 L2 error",
        within(e3, C3_M3),
        format!("{e3:.4e} in {C3_M3:?}"),
    );
    o.check(
        "m=5 gain over m=3",
        e3 / e5 < C3_M5_GAIN_MAX,
        format!("{:.3} < {C3_M5_GAIN_MAX}", e3 / e5),
    );
    o
}

fn c4() -> Outcome {
    let mut o = Outcome::new();
    let b = 2f64.powi(-15);
    let (_, beta) = gaussian_singular_linear(b);
    let asym = -3.0 / (b * norm_ppf(b));
    let rel = (beta / asym - 1.0).abs();
    o.check(
        "beta vs -3/(b z_b), b = 2^-15",
        rel <= C4_REL,
        format!(
            "beta {beta:.6e}, asymptote {asym:.6e}, ratio {:.4}, |rel| {rel:.4} <= {C4_REL}",
            beta / asym
        ),
    );
    o
}

fn c5() -> Outcome {
    let mut o = Outcome::new();
    let mut sandwich_bad = Vec::new();
    let mut ratio_bad = Vec::new();
    for q in 6..=30 {
        if !tail_quantile_sandwich(q).holds(0.0) {
            sandwich_bad.push(q);
        }
        let (r, hi) = tail_density_ratio(q);
        if !(r >= 1.0 && r <= hi * (1.0 + C5_DENSITY_SLACK)) {
            ratio_bad.push(q);
        }
    }
    o.check(
        "tail quantile sandwich, q in 6..=30",
        sandwich_bad.is_empty(),
        format!("violations at q = {sandwich_bad:?}"),
    );
    o.check(
        "tail density ratio, q in 6..=30",
        ratio_bad.is_empty(),
        format!("violations at q = {ratio_bad:?}"),
    );
    for p in [2, 4, 6] {
        for z in [4.0, 6.0, 8.0] {
            let m = gaussian_tail_moment(p, z);
            let band = C5_MOMENT_BAND / (z * z);
            let r = m.ratio();
            o.check(
                &format!("tail moment p={p} z={z}"),
                r >= 1.0 - band && r <= 1.0 + band,
                format!(
                    "numeric/asymptotic {r:.4} in [{:.4}, {:.4}]",
                    1.0 - band,
                    1.0 + band
                ),
            );
        }
    }
    o
}

struct GbmRuns {
    em: ExperimentReport,
    milstein: ExperimentReport,
}

fn gbm_runs() -> GbmRuns {
    let opts = ReproOptions {
        seed: SEED,
        pilot_paths: PILOT_PATHS,
        ..ReproOptions::default()
    };
    GbmRuns {
        em: run_experiment(&gbm_experiment(Scheme::EulerMaruyama, &opts), None).unwrap(),
        milstein: run_experiment(&gbm_experiment(Scheme::Milstein, &opts), None).unwrap(),
    }
}

fn gap(rep: &ExperimentReport, source: &str) -> f64 {
    rep.speedups
        .iter()
        .find(|s| s.source == source)
        .unwrap()
        .log2_variance_gap
}

fn c6(runs: &GbmRuns) -> Outcome {
    let mut o = Outcome::new();
    let em = &runs.em;
    let mil = &runs.milstein;
    let s = em.variance_slope(StatKind::TwoWay, "exact", 2, 8);
    o.check(
        "EM two-way slope (levels 2..=8)",
        within(s, C6_EM_SLOPE),
        format!("{s:.3} in {C6_EM_SLOPE:?}"),
    );
    let s = mil.variance_slope(StatKind::TwoWay, "exact", 2, 8);
    o.check(
        "Milstein two-way slope (levels 2..=8)",
        within(s, C6_MIL_SLOPE),
        format!("{s:.3} in {C6_MIL_SLOPE:?}"),
    );
    for (name, rep, band) in [("EM", em, C6_EM_SLOPE), ("Milstein", mil, C6_MIL_SLOPE)] {
        for src in ["rademacher", "constant", "linear", "cubic"] {
            let s = rep.variance_slope(StatKind::FourWay, src, 3, 8);
            o.check(
                &format!("{name} four-way slope, {src} (levels 3..=8)"),
                within(s, band),
                format!("{s:.3} in {band:?}"),
            );
        }
    }
    let g = gap(em, "linear");
    o.check(
        "EM linear gap log2(V4/V2)",
        within(g, C6_LINEAR_GAP),
        format!("{g:.2} in {C6_LINEAR_GAP:?}"),
    );
    let g = gap(em, "cubic");
    o.check(
        "EM cubic gap",
        g <= C6_CUBIC_GAP_MAX,
        format!("{g:.2} <= {C6_CUBIC_GAP_MAX}"),
    );
    let g = gap(em, "rademacher");
    o.check(
        "EM Rademacher gap",
        within(g, C6_RADEMACHER_GAP),
        format!("{g:.2} in {C6_RADEMACHER_GAP:?}"),
    );
    o.note(format!(
        "EM constant (q=10) gap {:.2}; Milstein linear gap {:.2}",
        gap(em, "constant"),
        gap(mil, "linear")
    ));
    o
}

fn c7(runs: &GbmRuns) -> Outcome {
    let mut o = Outcome::new();
    let get = |s: &str| runs.em.speedups.iter().find(|r| r.source == s).unwrap();
    let (rad, lin, cub) = (get("rademacher"), get("linear"), get("cubic"));
    let ratio = lin.speedup / rad.speedup;
    o.check(
        "linear speedup / Rademacher speedup",
        ratio >= C7_SPEEDUP_RATIO_MIN,
        format!(
            "{:.2} / {:.2} = {ratio:.2} >= {C7_SPEEDUP_RATIO_MIN}",
            lin.speedup, rad.speedup
        ),
    );
    o.check(
        "linear efficiency",
        lin.efficiency >= C7_EFFICIENCY_MIN,
        format!("{:.4}", lin.efficiency),
    );
    o.check(
        "cubic efficiency",
        cub.efficiency >= C7_EFFICIENCY_MIN,
        format!("{:.4}", cub.efficiency),
    );
    o.check(
        "Rademacher efficiency",
        rad.efficiency <= C7_RADEMACHER_EFFICIENCY_MAX,
        format!("{:.4} <= {C7_RADEMACHER_EFFICIENCY_MAX}", rad.efficiency),
    );
    for s in [rad, get("constant"), lin, cub] {
        o.note(format!(
            "{:<10} gap {:>7.2}  cost ratio {:>3}  speedup {:>5.2} ({:>5.1}%)  m~/m^ {:.3}  m~/M~ {:.1}",
            s.source,
            s.log2_variance_gap,
            s.cost_ratio,
            s.speedup,
            100.0 * s.efficiency,
            s.paths_ratio,
            s.nested_paths_ratio
        ));
    }
    o
}

fn c8() -> Outcome {
    let mut o = Outcome::new();
    let mut worst_lin: (f64, f64, f64) = (1.0, 0.0, 0.0);
    let mut worst_cub: (f64, f64, f64) = (1.0, 0.0, 0.0);
    let mut bad_lin = 0;
    let mut bad_cub = 0;
    for (j, &nu) in RMSE_GRID_NUS.iter().enumerate() {
        let t1 = fit_ncchi2(nu, 16, 1, 15).unwrap();
        let t3 = fit_ncchi2(nu, 16, 3, 15).unwrap();
        let cells = rmse_ncchi2(&[&t1, &t3], &RMSE_GRID_LAMBDAS, C8_SAMPLES).unwrap();
        for (i, &lam) in RMSE_GRID_LAMBDAS.iter().enumerate() {
            for (m, reference, worst, bad) in [
                (1, RMSE_REFERENCE_LINEAR[i][j], &mut worst_lin, &mut bad_lin),
                (3, RMSE_REFERENCE_CUBIC[i][j], &mut worst_cub, &mut bad_cub),
            ] {
                let c = cells.iter().find(|c| c.m == m && c.lambda == lam).unwrap();
                let r = c.rmse.map(|x| x / reference).unwrap_or(f64::NAN);
                let ok = if m == 1 {
                    (r - 1.0).abs() <= C8_LINEAR_REL
                } else {
                    (1.0 / C8_CUBIC_FACTOR..=C8_CUBIC_FACTOR).contains(&r)
                };
                if !ok {
                    *bad += 1;
                }
                if r.is_nan() || r.ln().abs() > worst.0.ln().abs() {
                    *worst = (r, nu, lam);
                }
            }
        }
        let c = |m: usize, lam: f64| {
            cells
                .iter()
                .find(|c| c.m == m && c.lambda == lam)
                .unwrap()
                .rmse
                .unwrap_or(f64::NAN)
        };
        o.note(format!(
            "nu={nu:<4} m=1: {}",
            RMSE_GRID_LAMBDAS
                .iter()
                .map(|&l| format!("{:.3}", c(1, l)))
                .collect::<Vec<_>>()
                .join(" ")
        ));
        o.note(format!(
            "nu={nu:<4} m=3: {}",
            RMSE_GRID_LAMBDAS
                .iter()
                .map(|&l| format!("{:.4}", c(3, l)))
                .collect::<Vec<_>>()
                .join(" ")
        ));
    }
    o.check(
        "m=1 cells within +-50% of reference",
        bad_lin == 0,
        format!(
            "{bad_lin} of 30 outside; most extreme ratio {:.3} at nu={}, lambda={}",
            worst_lin.0, worst_lin.1, worst_lin.2
        ),
    );
    o.check(
        "m=3 cells within factor 3 of reference",
        bad_cub == 0,
        format!(
            "{bad_cub} of 30 outside; most extreme ratio {:.3} at nu={}, lambda={}",
            worst_cub.0, worst_cub.1, worst_cub.2
        ),
    );
    o
}

fn c9() -> Outcome {
    let mut o = Outcome::new();
    let opts = ReproOptions {
        seed: SEED,
        pilot_paths: PILOT_PATHS,
        ..ReproOptions::default()
    };
    let mut cfg = cir_experiment(Scheme::CirExact, &opts);
    cfg.sources.truncate(1); // the linear table
    let exact = run_experiment(&cfg, None).unwrap();
    let euler = run_experiment(&cir_experiment(Scheme::CirEulerTruncated, &opts), None).unwrap();
    let plain: Vec<f64> = (1..=7)
        .map(|l| exact.find(l, StatKind::Plain, "exact").unwrap().variance)
        .collect();
    let flat = plain.iter().cloned().fold(f64::MIN, f64::max)
        / plain.iter().cloned().fold(f64::MAX, f64::min);
    o.check(
        "exact-transition variance max/min over delta = 2^-2..2^-8",
        flat < C9_FLAT_MAX,
        format!("{flat:.4} < {C9_FLAT_MAX}"),
    );
    o.note(format!(
        "exact variances {:?}",
        plain.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>()
    ));
    let s = euler.variance_slope(StatKind::TwoWay, EULER_LABEL, 1, 7);
    o.check(
        "truncated EM correction slope",
        within(s, C9_EULER_SLOPE),
        format!("{s:.3} in {C9_EULER_SLOPE:?}"),
    );
    let g = gap(&exact, "linear");
    o.check(
        "linear table correction gap",
        within(g, C9_LINEAR_GAP),
        format!("{g:.2} in {C9_LINEAR_GAP:?}"),
    );
    o
}

fn c10() -> Outcome {
    let mut o = Outcome::new();
    let grid: Vec<f64> = (0..C10_GRID)
        .map(|i| (i as f64 + 0.5) / C10_GRID as f64)
        .collect();
    let g = grid
        .iter()
        .map(|&u| (norm_cdf(norm_ppf(u)) - u).abs())
        .fold(0.0, f64::max);
    o.check(
        "Gaussian |Phi(Phi^-1(u)) - u|",
        g <= C10_GAUSSIAN_TOL,
        format!("max {g:.3e} <= {C10_GAUSSIAN_TOL:e}"),
    );
    let mut worst = (0.0f64, 0.0, 0.0);
    let mut failures = 0;
    for nu in [1.0, 5.0, 10.0, 50.0, 100.0] {
        for lam in [0.0, 1.0, 10.0, 100.0, 1000.0] {
            let d = NcChi2Ref::new(nu, lam).unwrap();
            for &u in &grid {
                match d.quantile(u) {
                    Ok(x) => {
                        let e = (d.cdf(x) - u).abs();
                        if e > worst.0 {
                            worst = (e, nu, lam);
                        }
                    }
                    Err(_) => failures += 1,
                }
            }
        }
    }
    o.check(
        "non-central chi2 |C(C^-1(u)) - u|",
        worst.0 <= C10_NCCHI2_TOL && failures == 0,
        format!(
            "max {:.3e} (nu={}, lambda={}) <= {C10_NCCHI2_TOL:e}; {failures} failures",
            worst.0, worst.1, worst.2
        ),
    );
    o
}

fn c11() -> Outcome {
    let mut o = Outcome::new();
    let lin = fit_gaussian_dyadic(1, 15, 0.5).unwrap();
    let con = fit_constant(10, Construction::L1).unwrap();
    let rows = bench_gaussian(
        &[
            ("linear".into(), &lin as &dyn InverseCdf),
            ("constant".into(), &con as &dyn InverseCdf),
        ],
        C11_BATCH,
        5,
        SEED,
    );
    for r in rows
        .iter()
        .filter(|r| r.regime == "stream" && (r.sampler == "linear" || r.sampler == "constant"))
    {
        o.soft(
            &format!("{} vs exact Gaussian at batch 10^6", r.sampler),
            r.speedup_vs_exact >= C11_GAUSSIAN_MIN,
            format!(
                "{:.2}x (>= {C11_GAUSSIAN_MIN}x), {:.2} ns/sample",
                r.speedup_vs_exact, r.ns_per_sample
            ),
        );
    }
    let t = fit_ncchi2(5.0, 16, 1, 15).unwrap();
    let rows = bench_ncchi2(&t, 10.0, C11_BATCH, 5, SEED).unwrap();
    let r = rows
        .iter()
        .find(|r| r.regime == "stream" && r.sampler.starts_with("ncchi2-m"))
        .unwrap();
    o.soft(
        "chi2 table vs exact chi2 quantile (nu=5, lambda=10)",
        r.speedup_vs_exact >= C11_NCCHI2_MIN,
        format!("{:.0}x (>= {C11_NCCHI2_MIN}x)", r.speedup_vs_exact),
    );
    o.note(format!(
        "machine: {}-{}, {} thread(s)",
        std::env::consts::ARCH,
        std::env::consts::OS,
        rayon::current_num_threads()
    ));
    o
}

fn c12(runs: &GbmRuns) -> Outcome {
    let mut o = Outcome::new();
    let lin = fit_gaussian_dyadic(1, 15, 0.5).unwrap();
    let con = fit_constant(10, Construction::L1).unwrap();
    let grid: Vec<f64> = (0..C12_GRID)
        .map(|i| (i as f64 + 0.5) / C12_GRID as f64)
        .collect();

    // Antisymmetry wherever 1 - u is exact: a dyadic grid and stream
    // uniforms, which are odd multiples of 2^-53.
    let mut pts: Vec<f64> = (0..1 << 14).map(|i| (i as f64 + 0.5) / 16384.0).collect();
    pts.extend(UniformStream::new(SEED, 8).take_vec(C12_GRID));
    let refl: Vec<f64> = pts.iter().map(|u| 1.0 - u).collect();
    assert!(refl.iter().zip(&pts).all(|(r, u)| 1.0 - r == *u));
    let mut bad = 0;
    for f in [&lin as &dyn InverseCdf, &con as &dyn InverseCdf] {
        let (a, b) = (f.eval_vec(&pts), f.eval_vec(&refl));
        bad += a.iter().zip(&b).filter(|(x, y)| **x != -**y).count();
    }
    o.check(
        "antisymmetry D(u) = -D(1-u), linear and constant",
        bad == 0,
        format!("{bad} mismatches over 2 x {}", pts.len()),
    );

    // Order preservation.
    let mut a = vec![0.0; grid.len()];
    eval_dyadic(&lin, &grid, &mut a);
    let mut c = vec![0.0; grid.len()];
    eval_constant(&con, &grid, &mut c);
    let drops = |v: &[f64]| v.windows(2).filter(|w| w[1] < w[0]).count();
    o.check(
        "order preservation, constant q=10",
        drops(&c) == 0,
        format!("{} decreasing steps", drops(&c)),
    );
    let d = drops(&a);
    let first = a.windows(2).position(|w| w[1] < w[0]);
    o.check(
        "order preservation, dyadic m=1 K=15",
        d == 0,
        format!(
            "{d} decreasing steps{}",
            first
                .map(|i| format!(
                    ", first at u={} ({:.4e} -> {:.4e})",
                    grid[i],
                    a[i],
                    a[i + 1]
                ))
                .unwrap_or_default()
        ),
    );

    // Batch purity.
    let u = UniformStream::new(SEED, 9).take_vec(100_000);
    let (x1, x2) = (lin.eval_vec(&u), lin.eval_vec(&u));
    let (y1, y2) = (con.eval_vec(&u), con.eval_vec(&u));
    let same = |p: &[f64], q: &[f64]| p.iter().zip(q).all(|(a, b)| a.to_bits() == b.to_bits());
    o.check(
        "batch purity",
        same(&x1, &x2) && same(&y1, &y2),
        "bitwise identical reruns".into(),
    );

    // Exponent index against a frexp-based reference.
    let mut s = UniformStream::new(SEED, 10);
    let k = 15;
    let mut mismatches = 0;
    for _ in 0..C12_INDEX_SAMPLES {
        let v = 0.5 * s.next_u();
        // v = f 2^e with f in [½, 1), so -log2 v lies in (-e, 1 - e] and
        // ceil(-log2 v) - 1 = -e, including at exact powers of two.
        let (_, e) = libm::frexp(v);
        let reference = ((-e) as usize).min(k);
        if dyadic_index(v, k) != reference {
            mismatches += 1;
        }
    }
    for n in 1..=40 {
        let v = 2f64.powi(-n);
        if dyadic_index(v, k) != ((n - 1) as usize).min(k) {
            mismatches += 1;
        }
    }
    o.check(
        "dyadic index = min(ceil(-log2 u) - 1, K)",
        mismatches == 0,
        format!("{mismatches} mismatches in 10^6 + 40"),
    );

    // Coupling identities on the pilot statistics.
    let em = &runs.em;
    let mut worst = 0.0f64;
    for l in 0..=8 {
        let exact = em.find(l, StatKind::TwoWay, "exact").unwrap();
        for src in ["rademacher", "constant", "linear", "cubic"] {
            let two = em.find(l, StatKind::TwoWay, src).unwrap();
            let four = em.find(l, StatKind::FourWay, src).unwrap();
            let scale = exact.mean.abs() + exact.variance.sqrt();
            worst = worst.max((two.mean + four.mean - exact.mean).abs() / scale);
        }
    }
    o.check(
        "nested identity mean(2-way~) + mean(4-way) = mean(2-way^)",
        worst <= C12_NESTED_REL,
        format!("max relative gap {worst:.2e}"),
    );
    let tele: f64 = (0..=8)
        .map(|l| em.find(l, StatKind::TwoWay, "exact").unwrap().mean)
        .sum();
    let se2: f64 = (0..=8)
        .map(|l| {
            em.find(l, StatKind::TwoWay, "exact")
                .unwrap()
                .std_error
                .powi(2)
        })
        .sum();
    let direct = em.find(8, StatKind::Plain, "exact").unwrap();
    let z = (tele - direct.mean).abs() / (se2 + direct.std_error.powi(2)).sqrt();
    o.check(
        "telescoping sum vs direct finest level",
        z <= C12_TELESCOPE_SE,
        format!("{z:.2} combined standard errors"),
    );

    // Allocation optimality under +-10% perturbations.
    let mut s = UniformStream::new(SEED, 11);
    let mut violations = 0;
    for _ in 0..200 {
        let n = 2 + (s.next_u() * 7.0) as usize;
        let v: Vec<f64> = (0..n).map(|_| 10f64.powf(-4.0 * s.next_u())).collect();
        let c: Vec<f64> = (0..n).map(|_| 10f64.powf(3.0 * s.next_u())).collect();
        let eps = 1e-2;
        let opt = optimal_allocation(&v, &c, eps).unwrap();
        for i in 0..n {
            for f in [0.9, 1.1] {
                let j = (i + 1) % n;
                let mut m = opt.real_paths.clone();
                m[i] *= f;
                let rest: f64 = (0..n).filter(|&k| k != j).map(|k| v[k] / m[k]).sum();
                let budget = eps * eps / 2.0 - rest;
                if budget <= 0.0 {
                    continue;
                }
                m[j] = v[j] / budget;
                let cost: f64 = m.iter().zip(&c).map(|(m, c)| m * c).sum();
                if cost < opt.predicted_cost * (1.0 - 1e-12) {
                    violations += 1;
                }
            }
        }
    }
    o.check(
        "allocation perturbation never lowers cost",
        violations == 0,
        format!("{violations} violations"),
    );
    o
}

fn run(n: u32, budget: Duration, f: impl FnOnce() -> Outcome) -> Verdict {
    let start = Instant::now();
    let out = catch_unwind(AssertUnwindSafe(f));
    let took = start.elapsed();
    let (mut verdict, lines) = match out {
        Ok(o) => (o.verdict, o.lines),
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            (
                Verdict::Fail,
                vec![format!("    panicked: {}", msg.unwrap_or_default())],
            )
        }
    };
    let over = took > budget;
    if over && verdict != Verdict::Fail {
        verdict = if n == 11 {
            Verdict::Warn
        } else {
            Verdict::Fail
        };
    }
    let tag = match verdict {
        Verdict::Pass => "PASS",
        Verdict::Fail => "FAIL",
        Verdict::Warn => "WARN",
    };
    println!(
        "criterion {n:>2}: {tag} ({:.1}s, budget {}s{})",
        took.as_secs_f64(),
        budget.as_secs(),
        if over { ", over budget" } else { "" }
    );
    for l in lines {
        println!("{l}");
    }
    verdict
}

fn main() {
    let args: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let wanted = |n: u32| args.is_empty() || args.iter().any(|a| a == &n.to_string());
    let strict = std::env::var("ARV_ACCEPTANCE_STRICT")
        .map(|v| v == "1")
        .unwrap_or(false);
    let mut verdicts = Vec::new();
    let secs = Duration::from_secs;
    if wanted(1) {
        verdicts.push(run(1, secs(60), c1));
    }
    if wanted(2) {
        verdicts.push(run(2, secs(120), c2));
    }
    if wanted(3) {
        verdicts.push(run(3, secs(60), c3));
    }
    if wanted(4) {
        verdicts.push(run(4, secs(1), c4));
    }
    if wanted(5) {
        verdicts.push(run(5, secs(10), c5));
    }
    let need_gbm = wanted(6) || wanted(7) || wanted(12);
    let start = Instant::now();
    let runs = if need_gbm {
        catch_unwind(gbm_runs).ok()
    } else {
        None
    };
    let pilot = start.elapsed();
    match &runs {
        Some(r) => {
            if wanted(6) {
                verdicts.push(run(6, secs(600).saturating_sub(pilot), || c6(r)));
            }
            if wanted(7) {
                verdicts.push(run(7, secs(60), || c7(r)));
            }
        }
        None if need_gbm => {
            println!("GBM pilot failed; criteria 6, 7 and 12 cannot run");
            verdicts.push(Verdict::Fail);
        }
        None => {}
    }
    if wanted(8) {
        verdicts.push(run(8, secs(600), c8));
    }
    if wanted(9) {
        verdicts.push(run(9, secs(900), c9));
    }
    if wanted(10) {
        verdicts.push(run(10, secs(300), c10));
    }
    if wanted(11) {
        verdicts.push(run(11, secs(120), c11));
    }
    if let (true, Some(r)) = (wanted(12), &runs) {
        verdicts.push(run(12, secs(600), || c12(r)));
    }
    let fails = verdicts.iter().filter(|v| **v == Verdict::Fail).count();
    let warns = verdicts.iter().filter(|v| **v == Verdict::Warn).count();
    println!(
        "acceptance: {} run, {fails} FAIL, {warns} WARN (GBM pilot {:.1}s)",
        verdicts.len(),
        pilot.as_secs_f64()
    );
    if strict && fails > 0 {
        std::process::exit(1);
    }
}
