//! Nested multilevel Monte Carlo for GBM driven by approximate Gaussians.
//!
//! Reads an experiment file (default `examples/gbm_nested.toml`), runs the
//! pilot, and prints the per-level variances and the predicted speedups.
//! Pass a second argument to also write the CSV/JSON report there.

use std::path::PathBuf;

use approx_rv::mlmc::{run_experiment, ExperimentConfig, StatKind};

fn main() -> approx_rv::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args.next().map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/gbm_nested.toml")
    });
    let cfg = ExperimentConfig::from_path(&path)?;
    let report = run_experiment(&cfg, path.parent())?;

    let sources: Vec<String> = report.speedups.iter().map(|s| s.source.clone()).collect();
    print!("level  V[P_l - P_l-1]");
    for s in &sources {
        print!("  {s:>11}");
    }
    println!("   (four-way variances)");
    for l in cfg.min_level..=cfg.max_level {
        print!(
            "{l:>5}  {:>14.3e}",
            report
                .find(l, StatKind::TwoWay, "exact")
                .map_or(f64::NAN, |r| r.variance)
        );
        for s in &sources {
            print!(
                "  {:>11.3e}",
                report
                    .find(l, StatKind::FourWay, s)
                    .map_or(f64::NAN, |r| r.variance)
            );
        }
        println!();
    }

    println!("\nsource       log2 gap  cost ratio  speedup  efficiency");
    for s in &report.speedups {
        println!(
            "{:<12} {:>8.2}  {:>10}  {:>7.2}  {:>9.1}%",
            s.source,
            s.log2_variance_gap,
            s.cost_ratio,
            s.speedup,
            100.0 * s.efficiency
        );
    }
    println!(
        "\nestimate {:.6} +- {:.1e}",
        report.estimate, report.estimate_std_error
    );

    if let Some(out) = args.next() {
        report.write(std::path::Path::new(&out))?;
        println!("report written to {out}");
    }
    Ok(())
}
