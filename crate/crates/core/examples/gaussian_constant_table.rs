//! Piecewise constant Gaussian inverse CDF on 2^q equal intervals.
//!
//! Run with `cargo run --release --example gaussian_constant_table -- 10`.

use approx_rv::fit::{fit_constant, Construction};
use approx_rv::metrics::lp_error_constant;
use approx_rv::sampler::{InverseCdf, UniformStream};

fn main() -> approx_rv::Result<()> {
    let q: u32 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(10);

    for construction in [
        Construction::L1,
        Construction::Central,
        Construction::Interior,
    ] {
        let table = fit_constant(q, construction)?;
        let l2 = lp_error_constant(&table, 2.0)?;
        println!(
            "{:<9} q={q}: {} values, L2 error {:.4e}",
            construction.name(),
            table.len(),
            l2.value
        );
    }

    // Sampling is a shift and a load: the top q bits of U pick the value.
    let table = fit_constant(q, Construction::L1)?;
    let u = UniformStream::new(7, 0).take_vec(1_000_000);
    let z = table.eval_vec(&u);
    let mean = z.iter().sum::<f64>() / z.len() as f64;
    let var = z.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (z.len() - 1) as f64;
    println!("10^6 samples: mean {mean:+.5}, variance {var:.5}");
    Ok(())
}
