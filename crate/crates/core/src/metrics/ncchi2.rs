//! RMSE of the non-central χ² table family against the exact quantile.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact_dist::NcChi2Ref;
use crate::fit::NcChi2Table;
use crate::sampler::NcChi2Slice;

pub const DEFAULT_RMSE_SAMPLES: usize = 1_000_000;
const CHUNK: usize = 4096;

/// One (ν, λ, table) cell. `rmse` is `None` when the exact quantile failed
/// somewhere on the grid; `note` then says why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NcChi2RmseCell {
    pub nu: f64,
    pub lambda: f64,
    pub m: usize,
    pub n_intervals: usize,
    pub n_samples: usize,
    pub rmse: Option<f64>,
    pub note: Option<String>,
}

// Sum of squared errors for each table over grid points [start, end).
fn chunk_sse(
    dist: &NcChi2Ref,
    slices: &[NcChi2Slice],
    n: usize,
    start: usize,
    end: usize,
) -> Result<Vec<f64>> {
    let u: Vec<f64> = (start..end).map(|i| (i as f64 + 0.5) / n as f64).collect();
    let mut exact = Vec::with_capacity(u.len());
    let mut guess = None;
    for &x in &u {
        let q = if x > 0.5 {
            dist.isf_from(1.0 - x, guess)?
        } else {
            dist.quantile_from(x, guess)?
        };
        exact.push(q);
        guess = Some(q);
    }
    let mut approx = vec![0.0; u.len()];
    Ok(slices
        .iter()
        .map(|s| {
            s.eval_batch(&u, &mut approx);
            approx
                .iter()
                .zip(&exact)
                .map(|(a, e)| (a - e).powi(2))
                .sum()
        })
        .collect())
}

/// RMSE of each table against the exact quantile over the midpoint grid
/// `(i + ½)/n`, one cell per (λ, table).
///
/// All tables must share `ν`; exact quantiles are computed once per λ and
/// reused. Chunk sums are combined in grid order so the result does not
/// depend on the thread count.
pub fn rmse_ncchi2(
    tables: &[&NcChi2Table],
    lambda_grid: &[f64],
    n_samples: usize,
) -> Result<Vec<NcChi2RmseCell>> {
    let first = tables
        .first()
        .ok_or_else(|| Error::Config("no tables given".into()))?;
    let nu = first.nu();
    if tables.iter().any(|t| t.nu() != nu) {
        return Err(Error::Config(
            "all tables must share the same degrees of freedom".into(),
        ));
    }
    if n_samples == 0 {
        return Err(Error::Config("sample count must be positive".into()));
    }
    let mut cells = Vec::with_capacity(lambda_grid.len() * tables.len());
    for &lambda in lambda_grid {
        let cell = |rmse: Option<f64>, note: Option<String>, t: &NcChi2Table| NcChi2RmseCell {
            nu,
            lambda,
            m: t.degree(),
            n_intervals: t.n_intervals(),
            n_samples,
            rmse,
            note,
        };
        let prepared = NcChi2Ref::new(nu, lambda).and_then(|d| {
            Ok((
                d,
                tables
                    .iter()
                    .map(|t| NcChi2Slice::new(t, lambda))
                    .collect::<Result<Vec<_>>>()?,
            ))
        });
        let (dist, slices) = match prepared {
            Ok(v) => v,
            Err(e) => {
                cells.extend(tables.iter().map(|t| cell(None, Some(e.to_string()), t)));
                continue;
            }
        };
        let starts: Vec<usize> = (0..n_samples).step_by(CHUNK).collect();
        let partial: Result<Vec<Vec<f64>>> = starts
            .par_iter()
            .map(|&s| chunk_sse(&dist, &slices, n_samples, s, (s + CHUNK).min(n_samples)))
            .collect();
        match partial {
            Ok(parts) => {
                for (j, t) in tables.iter().enumerate() {
                    let sse: f64 = parts.iter().map(|p| p[j]).sum();
                    cells.push(cell(Some((sse / n_samples as f64).sqrt()), None, t));
                }
            }
            Err(e) => {
                log::warn!("exact quantile failed for nu={nu}, lambda={lambda}: {e}");
                cells.extend(tables.iter().map(|t| cell(None, Some(e.to_string()), t)));
            }
        }
    }
    Ok(cells)
}
