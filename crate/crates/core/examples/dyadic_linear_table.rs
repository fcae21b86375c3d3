//! Piecewise polynomial Gaussian inverse CDF on dyadic intervals.
//!
//! Fits degrees 1, 3 and 5 on 15 intervals that halve towards each tail,
//! then evaluates the linear table and its f32 variant.

use approx_rv::exact_dist::norm_ppf;
use approx_rv::fit::fit_gaussian_dyadic;
use approx_rv::metrics::lp_error_dyadic;
use approx_rv::sampler::{DyadicPolyTableF32, InverseCdf, UniformStream};

fn main() -> approx_rv::Result<()> {
    for m in [1, 3, 5] {
        let t = fit_gaussian_dyadic(m, 15, 0.5)?;
        let e = lp_error_dyadic(&t, 2.0)?;
        println!(
            "degree {m}: {} coefficients per half, L2 error {:.3e}",
            t.coeffs().len() * t.coeffs()[0].len(),
            e.value
        );
    }

    let table = fit_gaussian_dyadic(1, 15, 0.5)?;
    let (lo, hi) = table.interval_bounds(15);
    println!("deepest interval covers [{lo:.3e}, {hi:.3e})");

    for u in [1e-6, 0.01, 0.3, 0.5, 0.9] {
        println!(
            "u={u:<6} exact {:+.5}  table {:+.5}",
            norm_ppf(u),
            table.eval(u)
        );
    }

    let f32_table = DyadicPolyTableF32::from_f64(&table)?;
    let u = UniformStream::new(1, 0).take_vec(100_000);
    let (a, b) = (table.eval_vec(&u), f32_table.eval_vec(&u));
    let max_diff = a
        .iter()
        .zip(&b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    println!("f64 vs f32 evaluation, max difference {max_diff:.2e}");
    Ok(())
}
