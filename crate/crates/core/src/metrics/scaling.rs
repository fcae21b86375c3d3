//! Error scaling studies for constant and dyadic tables.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{lp_error_constant, lp_error_dyadic};
use crate::error::{Error, Result};
use crate::fit::{fit_constant, fit_gaussian_dyadic, Construction};

/// One CSV row: a configuration, a norm order and the measured error.
/// Fields that do not apply to a family are left empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub family: String,
    pub construction: Option<String>,
    pub q: Option<u32>,
    pub m: Option<usize>,
    pub k: Option<usize>,
    pub r: Option<f64>,
    pub p: f64,
    pub error: f64,
    pub error_p: f64,
    pub error_estimate: f64,
    pub method: String,
}

/// Least-squares line `y = intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub p: f64,
    pub slope: f64,
    pub intercept: f64,
    /// Exponent of `q` left after dividing the p-th power error by `2^-q`.
    pub residual_exponent: f64,
    pub window_lo: u32,
    pub window_hi: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingStudy {
    pub rows: Vec<ErrorRow>,
    pub slopes: Vec<SlopeFit>,
}

/// Returns `(slope, intercept)`.
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Errors of constant tables over `q_lo..=q_hi` for each `p`, with slopes of
/// `log₂ ‖·‖_p^p` against `q` fitted over the upper half of the range.
pub fn scaling_study_constant(
    q_lo: u32,
    q_hi: u32,
    p_list: &[f64],
    construction: Construction,
) -> Result<ScalingStudy> {
    if q_lo < 1 || q_hi < q_lo + 1 {
        return Err(Error::Config(format!(
            "need 1 <= q_lo < q_hi, got {q_lo}..={q_hi}"
        )));
    }
    let rows: Vec<ErrorRow> = (q_lo..=q_hi)
        .into_par_iter()
        .map(|q| -> Result<Vec<ErrorRow>> {
            let t = fit_constant(q, construction)?;
            p_list
                .iter()
                .map(|&p| {
                    let r = lp_error_constant(&t, p)?;
                    Ok(ErrorRow {
                        family: "constant".into(),
                        construction: Some(construction.name().into()),
                        q: Some(q),
                        m: None,
                        k: None,
                        r: None,
                        p,
                        error: r.value,
                        error_p: r.integral,
                        error_estimate: r.error_estimate,
                        method: r.method.name().into(),
                    })
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let window_lo = q_lo + (q_hi - q_lo) / 2;
    let slopes = p_list
        .iter()
        .map(|&p| {
            let sel: Vec<&ErrorRow> = rows
                .iter()
                .filter(|r| r.p == p && r.q.is_some_and(|q| q >= window_lo))
                .collect();
            let x: Vec<f64> = sel.iter().map(|r| r.q.unwrap() as f64).collect();
            let y: Vec<f64> = sel.iter().map(|r| r.error_p.log2()).collect();
            let (slope, intercept) = fit_line(&x, &y);
            let lx: Vec<f64> = x.iter().map(|q| q.log2()).collect();
            let ly: Vec<f64> = x.iter().zip(&y).map(|(q, l)| l + q).collect();
            let (residual_exponent, _) = fit_line(&lx, &ly);
            SlopeFit {
                p,
                slope,
                intercept,
                residual_exponent,
                window_lo,
                window_hi: q_hi,
            }
        })
        .collect();
    Ok(ScalingStudy { rows, slopes })
}

/// Errors of Gaussian dyadic tables over every combination of degree,
/// interval count, decay rate and norm order.
pub fn scaling_study_dyadic(
    m_list: &[usize],
    k_list: &[usize],
    r_list: &[f64],
    p_list: &[f64],
) -> Result<Vec<ErrorRow>> {
    let configs: Vec<(usize, usize, f64)> = m_list
        .iter()
        .flat_map(|&m| {
            k_list
                .iter()
                .flat_map(move |&k| r_list.iter().map(move |&r| (m, k, r)))
        })
        .collect();
    let nested = configs
        .into_par_iter()
        .map(|(m, k, r)| -> Result<Vec<ErrorRow>> {
            let t = fit_gaussian_dyadic(m, k, r)?;
            p_list
                .iter()
                .map(|&p| {
                    let e = lp_error_dyadic(&t, p)?;
                    Ok(ErrorRow {
                        family: "dyadic".into(),
                        construction: None,
                        q: None,
                        m: Some(m),
                        k: Some(k),
                        r: Some(r),
                        p,
                        error: e.value,
                        error_p: e.integral,
                        error_estimate: e.error_estimate,
                        method: e.method.name().into(),
                    })
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(nested.into_iter().flatten().collect())
}

/// Measured `‖Q - Φ⁻¹‖_p^p` against `C·2^-q·q^(-p/2)` with `C` matched at
/// `q_cal`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheckRow {
    pub q: u32,
    pub p: f64,
    pub measured: f64,
    pub bound: f64,
    pub ratio: f64,
}

pub fn constant_error_bound_check(
    q_lo: u32,
    q_hi: u32,
    q_cal: u32,
    p: f64,
    construction: Construction,
) -> Result<Vec<BoundCheckRow>> {
    let shape = |q: u32| 2f64.powi(-(q as i32)) * (q as f64).powf(-p / 2.0);
    let measure = |q: u32| -> Result<f64> {
        Ok(lp_error_constant(&fit_constant(q, construction)?, p)?.integral)
    };
    let c = measure(q_cal)? / shape(q_cal);
    (q_lo..=q_hi)
        .into_par_iter()
        .map(|q| {
            let measured = measure(q)?;
            let bound = c * shape(q);
            Ok(BoundCheckRow {
                q,
                p,
                measured,
                bound,
                ratio: measured / bound,
            })
        })
        .collect()
}
