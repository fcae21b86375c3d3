//! How the Lp error of the piecewise constant table falls with q.
//!
//! Writes `error_scaling.csv` in the current directory.

use std::path::Path;

use approx_rv::fit::Construction;
use approx_rv::metrics::{
    constant_error_bound_check, scaling_study_constant, scaling_study_dyadic, write_csv,
};

fn main() -> approx_rv::Result<()> {
    let study = scaling_study_constant(1, 14, &[2.0, 4.0, 6.0], Construction::L1)?;
    for s in &study.slopes {
        println!(
            "p={}: slope of log2 ||.||_p^p vs q over {}..={} is {:.3} (residual q exponent {:.2})",
            s.p, s.window_lo, s.window_hi, s.slope, s.residual_exponent
        );
    }

    for row in constant_error_bound_check(8, 16, 8, 2.0, Construction::L1)? {
        println!("q={:>2}: measured/bound {:.4}", row.q, row.ratio);
    }

    let dyadic = scaling_study_dyadic(&[1, 3], &[4, 8, 15], &[0.5], &[2.0])?;
    for r in &dyadic {
        println!(
            "m={} K={:>2}: L2 {:.3e}",
            r.m.unwrap_or(0),
            r.k.unwrap_or(0),
            r.error
        );
    }

    write_csv(Path::new("error_scaling.csv"), &study.rows)?;
    println!("wrote error_scaling.csv ({} rows)", study.rows.len());
    Ok(())
}
