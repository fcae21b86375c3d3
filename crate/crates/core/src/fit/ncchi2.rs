//! Table family for the non-central χ² quantile.
//!
//! For fixed degrees of freedom `ν`, the quantile is rewritten as
//! `C⁻¹(u; λ) = ν/y + 2√(ν/y) · P(u; y)` with `y = ν/(λ + ν) ∈ [0, 1]`.
//! `P` is Gaussian at `y = 0` and a rescaled central χ² at `y = 1`, and varies
//! smoothly in between, so it is tabulated at knots equally spaced in `√y`
//! and interpolated linearly.

use rayon::prelude::*;

use super::dyadic::{fit_dyadic_table_centered, DyadicPolyTable};
use super::poly::QuantileTarget;
use crate::error::{Error, Result};
use crate::exact_dist::{GaussianRef, NcChi2Ref};

pub const DEFAULT_KNOTS: usize = 16;

/// Knot `j` of `n`: `y_j = (j/(n-1))²`.
pub fn knot_y(j: usize, n_knots: usize) -> f64 {
    let s = j as f64 / (n_knots - 1) as f64;
    s * s
}

/// The affine map taking the χ² quantile to `P(·; y)` for `ν` degrees of
/// freedom; `None` for the Gaussian limit `y = 0`.
#[derive(Debug, Clone, Copy)]
pub struct PTransform {
    pub dist: Option<NcChi2Ref>,
    pub scale: f64,
    pub shift: f64,
}

impl PTransform {
    pub fn new(nu: f64, y: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&y) {
            return Err(Error::Domain(format!("y must lie in [0, 1], got {y}")));
        }
        if y == 0.0 {
            return Ok(Self {
                dist: None,
                scale: 1.0,
                shift: 0.0,
            });
        }
        let lambda = if y == 1.0 { 0.0 } else { (1.0 - y) * nu / y };
        Ok(Self {
            dist: Some(NcChi2Ref::new(nu, lambda)?),
            scale: 0.5 * (y / nu).sqrt(),
            shift: -(nu / (4.0 * y)).sqrt(),
        })
    }

    /// `P(u; y)` through the exact quantile.
    pub fn value(&self, u: f64) -> Result<f64> {
        match &self.dist {
            None => crate::exact_dist::gaussian_inv_cdf(u),
            Some(d) => Ok(self.scale * d.quantile(u)? + self.shift),
        }
    }
}

/// Per-knot pairs of half-tables: `lower[j]` approximates `P(u; y_j)` for
/// `u ∈ (0, ½]`, `upper[j]` approximates `P(1 - v; y_j)` for `v ∈ (0, ½)`.
/// Entry 0 of both holds the constant `P(½; y_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NcChi2Table {
    nu: f64,
    lower: Vec<DyadicPolyTable>,
    upper: Vec<DyadicPolyTable>,
}

impl NcChi2Table {
    pub fn from_parts(
        nu: f64,
        lower: Vec<DyadicPolyTable>,
        upper: Vec<DyadicPolyTable>,
    ) -> Result<Self> {
        if !(nu.is_finite() && nu > 0.0) {
            return Err(Error::Config(format!(
                "degrees of freedom must be > 0, got {nu}"
            )));
        }
        if lower.len() < 2 || lower.len() != upper.len() {
            return Err(Error::Config(
                "need at least two knots with matching lower and upper tables".into(),
            ));
        }
        let (m, k) = (lower[0].degree(), lower[0].n_intervals());
        if lower
            .iter()
            .chain(&upper)
            .any(|t| t.degree() != m || t.n_intervals() != k || t.decay_rate() != 0.5)
        {
            return Err(Error::Config(
                "all knot tables must share degree, interval count and r = 1/2".into(),
            ));
        }
        Ok(Self { nu, lower, upper })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn n_knots(&self) -> usize {
        self.lower.len()
    }

    pub fn degree(&self) -> usize {
        self.lower[0].degree()
    }

    pub fn n_intervals(&self) -> usize {
        self.lower[0].n_intervals()
    }

    pub fn lower(&self) -> &[DyadicPolyTable] {
        &self.lower
    }

    pub fn upper(&self) -> &[DyadicPolyTable] {
        &self.upper
    }

    pub fn knot_y(&self, j: usize) -> f64 {
        knot_y(j, self.n_knots())
    }
}

fn with_context(e: Error, nu: f64, y: f64) -> Error {
    match e {
        Error::Numerical(msg) => Error::Numerical(format!("nu={nu}, y={y}: {msg}")),
        Error::Domain(msg) => Error::Domain(format!("nu={nu}, y={y}: {msg}")),
        other => other,
    }
}

fn fit_knot(
    nu: f64,
    y: f64,
    m: usize,
    n_intervals: usize,
) -> Result<(DyadicPolyTable, DyadicPolyTable)> {
    let tr = PTransform::new(nu, y)?;
    match tr.dist {
        None => {
            let lower =
                fit_dyadic_table_centered(m, n_intervals, 0.5, &QuantileTarget::gaussian(), 0.0)?;
            let upper = fit_dyadic_table_centered(
                m,
                n_intervals,
                0.5,
                &QuantileTarget::new(GaussianRef, 1.0, 0.0, true),
                0.0,
            )?;
            Ok((lower, upper))
        }
        Some(d) => {
            let center = tr.scale * d.quantile(0.5)? + tr.shift;
            let lower = fit_dyadic_table_centered(
                m,
                n_intervals,
                0.5,
                &QuantileTarget::new(d, tr.scale, tr.shift, false),
                center,
            )?;
            let upper = fit_dyadic_table_centered(
                m,
                n_intervals,
                0.5,
                &QuantileTarget::new(d, tr.scale, tr.shift, true),
                center,
            )?;
            Ok((lower, upper))
        }
    }
}

/// Fits the knot tables for `ν` degrees of freedom. Knots are fitted in
/// parallel; each fit is independent.
pub fn fit_ncchi2(nu: f64, n_knots: usize, m: usize, n_intervals: usize) -> Result<NcChi2Table> {
    if !(nu.is_finite() && nu > 0.0) {
        return Err(Error::Config(format!(
            "degrees of freedom must be > 0, got {nu}"
        )));
    }
    if n_knots < 2 {
        return Err(Error::Config(format!(
            "need at least 2 knots, got {n_knots}"
        )));
    }
    let pairs: Vec<(DyadicPolyTable, DyadicPolyTable)> = (0..n_knots)
        .into_par_iter()
        .map(|j| {
            let y = knot_y(j, n_knots);
            fit_knot(nu, y, m, n_intervals).map_err(|e| with_context(e, nu, y))
        })
        .collect::<Result<_>>()?;
    let (lower, upper) = pairs.into_iter().unzip();
    Ok(NcChi2Table { nu, lower, upper })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::dyadic::fit_gaussian_dyadic;

    #[test]
    fn knots_are_equally_spaced_in_root_y() {
        assert_eq!(knot_y(0, 16), 0.0);
        assert_eq!(knot_y(15, 16), 1.0);
        assert!((knot_y(5, 16).sqrt() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn end_knots_reproduce_limits() {
        let t = fit_ncchi2(1.0, 4, 1, 6).unwrap();
        // y = 0: the Gaussian fit.
        let g = fit_gaussian_dyadic(1, 6, 0.5).unwrap();
        assert_eq!(t.lower()[0], g);
        for k in 1..=6 {
            for j in 0..2 {
                assert!((t.upper()[0].coeffs()[j][k] + g.coeffs()[j][k]).abs() < 1e-9);
            }
        }
        // y = 1: central χ² rescaled.
        let d = NcChi2Ref::new(1.0, 0.0).unwrap();
        let v = 0.2;
        let exact = d.quantile(v).unwrap() / 2.0 - 0.5;
        assert!((t.lower()[3].eval_half(v) - exact).abs() < 0.05);
        let center = d.quantile(0.5).unwrap() / 2.0 - 0.5;
        assert!((t.lower()[3].coeffs()[0][0] - center).abs() < 1e-12);
        assert_eq!(t.upper()[3].coeffs()[0][0], t.lower()[3].coeffs()[0][0]);
    }

    #[test]
    fn transform_limits() {
        let nu = 3.0;
        let tr = PTransform::new(nu, 1.0).unwrap();
        assert!((tr.scale - 0.5 / nu.sqrt()).abs() < 1e-15);
        assert!((tr.shift + 0.5 * nu.sqrt()).abs() < 1e-15);
        // Small y approaches the Gaussian quantile.
        let tr = PTransform::new(nu, 1e-6).unwrap();
        assert!((tr.value(0.8).unwrap() - crate::exact_dist::norm_ppf(0.8)).abs() < 2e-3);
    }
}
