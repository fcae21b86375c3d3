//! Approximation error measurement: Lᵖ norms, scaling studies and the
//! non-central χ² RMSE grid.

mod ncchi2;
mod scaling;
mod tail_bounds;

pub use ncchi2::{rmse_ncchi2, NcChi2RmseCell, DEFAULT_RMSE_SAMPLES};
pub use scaling::{
    constant_error_bound_check, fit_line, scaling_study_constant, scaling_study_dyadic,
    BoundCheckRow, ErrorRow, ScalingStudy, SlopeFit,
};
pub use tail_bounds::{
    gaussian_tail_moment, tail_density_ratio, tail_quantile_sandwich, TailMoment,
    TailQuantileSandwich,
};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact_dist::{ContinuousDist, GaussianRef};
use crate::fit::{ConstantTable, DyadicPolyTable};
use crate::quadrature::{integrate, QuadOptions};
use crate::sampler::{InverseCdf, UniformStream};

/// Relative tolerance per breakpoint interval.
pub const LP_QUAD_REL_TOL: f64 = 1e-10;
/// Quadrature results whose error estimate exceeds this fraction of the
/// value are flagged.
pub const LP_FLAG_FRACTION: f64 = 1e-6;
/// Sample count of the Monte Carlo fallback.
pub const LP_MC_SAMPLES: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMethod {
    Quadrature,
    MonteCarlo,
}

impl ErrorMethod {
    pub fn name(self) -> &'static str {
        match self {
            ErrorMethod::Quadrature => "quadrature",
            ErrorMethod::MonteCarlo => "monte_carlo",
        }
    }
}

/// `‖approx - exact‖_p` together with how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpErrorReport {
    pub p: f64,
    /// The norm `‖·‖_p`.
    pub value: f64,
    /// `‖·‖_p^p`, the quantity the scaling laws are stated for.
    pub integral: f64,
    pub method: ErrorMethod,
    /// Integrand evaluations (quadrature) or samples (Monte Carlo).
    pub n_points: usize,
    /// Absolute error estimate on `value`: quadrature error or one standard
    /// error.
    pub error_estimate: f64,
    pub flagged: bool,
}

impl LpErrorReport {
    fn from_integral(
        p: f64,
        integral: f64,
        integral_err: f64,
        method: ErrorMethod,
        n_points: usize,
    ) -> Self {
        let value = integral.max(0.0).powf(1.0 / p);
        // d(I^(1/p)) = I^(1/p - 1) dI / p
        let error_estimate = if integral > 0.0 {
            value / integral * integral_err / p
        } else {
            integral_err.powf(1.0 / p)
        };
        let flagged =
            method == ErrorMethod::Quadrature && error_estimate > LP_FLAG_FRACTION * value;
        Self {
            p,
            value,
            integral,
            method,
            n_points,
            error_estimate,
            flagged,
        }
    }
}

/// Merges interval end points into a sorted list covering `[0, 1]`.
fn normalise_breakpoints(breakpoints: &[f64]) -> Result<Vec<f64>> {
    if breakpoints.iter().any(|b| !(0.0..=1.0).contains(b)) {
        return Err(Error::Domain("breakpoints must lie in [0, 1]".into()));
    }
    let mut b: Vec<f64> = breakpoints.to_vec();
    b.push(0.0);
    b.push(1.0);
    b.sort_by(|x, y| x.partial_cmp(y).expect("finite breakpoints"));
    b.dedup();
    Ok(b)
}

/// Breakpoints of a reflected half-table: `b` and `1 - b` for each `b ≤ ½`.
pub fn symmetric_breakpoints(half: &[f64]) -> Vec<f64> {
    let mut all: Vec<f64> = half.iter().flat_map(|&b| [b, 1.0 - b]).collect();
    all.sort_by(|x, y| x.partial_cmp(y).expect("finite breakpoints"));
    all.dedup();
    all
}

/// `‖approx - F⁻¹‖_p` by adaptive quadrature on every interval between
/// consecutive breakpoints of the approximation.
///
/// Each interval is integrated in the distribution's own variable through
/// `u = F(x(s))`, so the end intervals, where `F⁻¹` is singular, become
/// integrals of a bounded function. If some interval fails to converge and
/// the summed error estimate exceeds [`LP_FLAG_FRACTION`] of the integral,
/// the whole estimate falls back to Monte Carlo.
pub fn lp_error(
    approx: &dyn InverseCdf,
    dist: &dyn ContinuousDist,
    breakpoints: &[f64],
    p: f64,
) -> Result<LpErrorReport> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::Domain(format!("norm order must be >= 1, got {p}")));
    }
    let b = normalise_breakpoints(breakpoints)?;
    let (s_lo, s_hi) = dist.s_bounds();
    let mut s_knots = Vec::with_capacity(b.len());
    for &u in &b {
        let s = if u == 0.0 {
            s_lo
        } else if u == 1.0 {
            s_hi
        } else if u > 0.5 {
            dist.from_x(dist.isf(1.0 - u)?)
        } else {
            dist.from_x(dist.quantile(u)?)
        };
        s_knots.push(s.clamp(s_lo, s_hi));
    }
    let opts = QuadOptions {
        rel_tol: LP_QUAD_REL_TOL,
        abs_tol: 0.0,
        ..QuadOptions::default()
    };
    let integrand = |s: f64| -> f64 {
        let (x, dx) = dist.to_x(s);
        let (cdf, _, pdf) = dist.cdf_sf_pdf(x);
        let w = pdf * dx;
        if w == 0.0 {
            return 0.0;
        }
        let u = cdf.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
        (approx.eval(u) - x).abs().powf(p) * w
    };
    let mut total = 0.0;
    let mut err = 0.0;
    let mut evals = 0;
    let mut unconverged = Vec::new();
    for w in s_knots.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let r = integrate(integrand, w[0], w[1], opts);
        if !r.converged {
            unconverged.push((w[0], w[1]));
        }
        total += r.values[0];
        err += r.error;
        evals += r.evaluations;
    }
    // Tiny tail intervals can stall at rounding noise far below the total;
    // only fall back when the accumulated error matters globally.
    if !unconverged.is_empty() {
        if err > LP_FLAG_FRACTION * total {
            log::warn!(
                "quadrature did not converge on {} interval(s) (first {:?}); using Monte Carlo",
                unconverged.len(),
                unconverged[0]
            );
            return lp_error_monte_carlo(approx, dist, p, LP_MC_SAMPLES, 0x5eed);
        }
        log::debug!(
            "{} interval(s) stalled below the global tolerance",
            unconverged.len()
        );
    }
    Ok(LpErrorReport::from_integral(
        p,
        total,
        err,
        ErrorMethod::Quadrature,
        evals,
    ))
}

/// Monte Carlo estimate of `‖approx - F⁻¹‖_p` with its standard error.
pub fn lp_error_monte_carlo(
    approx: &dyn InverseCdf,
    dist: &dyn ContinuousDist,
    p: f64,
    n: usize,
    seed: u64,
) -> Result<LpErrorReport> {
    if n < 2 {
        return Err(Error::Config(
            "Monte Carlo error needs at least 2 samples".into(),
        ));
    }
    let mut stream = UniformStream::new(seed, 0);
    let u = stream.take_vec(n);
    let a = approx.eval_vec(&u);
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, (&x, &z)) in u.iter().zip(&a).enumerate() {
        let exact = if x > 0.5 {
            dist.isf(1.0 - x)?
        } else {
            dist.quantile(x)?
        };
        let d = (z - exact).abs().powf(p);
        let delta = d - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (d - mean);
    }
    let se = (m2 / (n - 1) as f64 / n as f64).sqrt();
    Ok(LpErrorReport::from_integral(
        p,
        mean,
        se,
        ErrorMethod::MonteCarlo,
        n,
    ))
}

/// `‖Q - Φ⁻¹‖_p` for a constant table.
pub fn lp_error_constant(table: &ConstantTable, p: f64) -> Result<LpErrorReport> {
    lp_error(table, &GaussianRef, &table.breakpoints(), p)
}

/// `‖D - Φ⁻¹‖_p` for a reflected dyadic table.
pub fn lp_error_dyadic(table: &DyadicPolyTable, p: f64) -> Result<LpErrorReport> {
    lp_error(
        table,
        &GaussianRef,
        &symmetric_breakpoints(&table.breakpoints()),
        p,
    )
}

/// Writes serialisable rows to a CSV file with a header line.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
