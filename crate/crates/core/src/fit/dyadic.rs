//! Piecewise polynomial tables on geometrically shrinking intervals in (0, ½).

use super::poly::{fit_poly_interval, FitTarget, QuantileTarget};
use crate::error::{Error, Result};

pub const MAX_DEGREE: usize = 5;
pub const MIN_INTERVALS: usize = 2;
pub const MAX_INTERVALS: usize = 40;

/// Polynomial coefficients per interval, stored coefficient-major:
/// `coeffs[j][k]` multiplies `u^j` on interval `k`.
///
/// Interval `k` for `1 <= k < K` is `[r^k/2, r^(k-1)/2)` and interval `K` is
/// `(0, r^(K-1)/2)`. Entry 0 covers `u = ½` exactly and holds a constant.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadicPolyTable {
    degree: usize,
    n_intervals: usize,
    decay_rate: f64,
    coeffs: Vec<Vec<f64>>,
}

impl DyadicPolyTable {
    /// Assembles a table from coefficient-major data after validating the
    /// shape.
    pub fn from_coeffs(decay_rate: f64, coeffs: Vec<Vec<f64>>) -> Result<Self> {
        let degree = coeffs
            .len()
            .checked_sub(1)
            .ok_or_else(|| Error::Config("no coefficient rows".into()))?;
        let n_entries = coeffs[0].len();
        if n_entries < MIN_INTERVALS + 1 || coeffs.iter().any(|row| row.len() != n_entries) {
            return Err(Error::Config(
                "coefficient rows must share a length of at least 3".into(),
            ));
        }
        if !(decay_rate > 0.0 && decay_rate < 1.0) {
            return Err(Error::Config(format!(
                "decay rate must lie in (0, 1), got {decay_rate}"
            )));
        }
        if degree > MAX_DEGREE {
            return Err(Error::Config(format!(
                "degree must be at most {MAX_DEGREE}, got {degree}"
            )));
        }
        Ok(Self {
            degree,
            n_intervals: n_entries - 1,
            decay_rate,
            coeffs,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of intervals `K` in (0, ½); the table has `K + 1` entries.
    pub fn n_intervals(&self) -> usize {
        self.n_intervals
    }

    pub fn decay_rate(&self) -> f64 {
        self.decay_rate
    }

    pub fn coeffs(&self) -> &[Vec<f64>] {
        &self.coeffs
    }

    /// Coefficients of interval `k`, lowest degree first.
    pub fn interval_coeffs(&self, k: usize) -> Vec<f64> {
        self.coeffs.iter().map(|row| row[k]).collect()
    }

    /// `(lower, upper)` bounds of interval `k >= 1`.
    pub fn interval_bounds(&self, k: usize) -> (f64, f64) {
        interval_bounds(self.decay_rate, self.n_intervals, k)
    }

    /// Breakpoints in increasing order: `0, r^(K-1)/2, ..., r/2, 1/2`.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = vec![0.0];
        for k in (1..=self.n_intervals).rev() {
            b.push(self.interval_bounds(k).1);
        }
        b
    }

    /// Index of the interval containing `v ∈ (0, ½]` computed arithmetically,
    /// valid for any decay rate. `v = ½` maps to 0.
    pub fn index_of(&self, v: f64) -> usize {
        if v >= 0.5 {
            return 0;
        }
        let k = ((2.0 * v).ln() / self.decay_rate.ln()).floor() as i64 + 1;
        let mut k = k.clamp(1, self.n_intervals as i64) as usize;
        // Guard against rounding at the boundaries.
        while k > 1 && k < self.n_intervals && v >= self.interval_bounds(k).1 {
            k -= 1;
        }
        while k < self.n_intervals && v < self.interval_bounds(k).0 {
            k += 1;
        }
        k
    }

    /// Scalar evaluation of the half-table at `v ∈ (0, ½]`, no reflection.
    pub fn eval_half(&self, v: f64) -> f64 {
        let k = self.index_of(v);
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, row| acc * v + row[k])
    }
}

pub fn interval_bounds(r: f64, n_intervals: usize, k: usize) -> (f64, f64) {
    debug_assert!(k >= 1 && k <= n_intervals);
    let upper = 0.5 * r.powi(k as i32 - 1);
    let lower = if k == n_intervals {
        0.0
    } else {
        0.5 * r.powi(k as i32)
    };
    (lower, upper)
}

fn validate(m: usize, n_intervals: usize, r: f64) -> Result<()> {
    if !(1..=MAX_DEGREE).contains(&m) {
        return Err(Error::Config(format!(
            "degree must lie in 1..={MAX_DEGREE}, got {m}"
        )));
    }
    if !(MIN_INTERVALS..=MAX_INTERVALS).contains(&n_intervals) {
        return Err(Error::Config(format!(
            "interval count must lie in {MIN_INTERVALS}..={MAX_INTERVALS}, got {n_intervals}"
        )));
    }
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Config(format!(
            "decay rate must lie in (0, 1), got {r}"
        )));
    }
    Ok(())
}

/// Fits one degree-`m` polynomial per interval, leaving a zero entry 0.
pub fn fit_dyadic_table(
    m: usize,
    n_intervals: usize,
    r: f64,
    target: &dyn FitTarget,
) -> Result<DyadicPolyTable> {
    fit_dyadic_table_centered(m, n_intervals, r, target, 0.0)
}

/// As [`fit_dyadic_table`], storing `center` as the constant of entry 0.
pub fn fit_dyadic_table_centered(
    m: usize,
    n_intervals: usize,
    r: f64,
    target: &dyn FitTarget,
    center: f64,
) -> Result<DyadicPolyTable> {
    validate(m, n_intervals, r)?;
    let mut coeffs = vec![vec![0.0; n_intervals + 1]; m + 1];
    coeffs[0][0] = center;
    for k in 1..=n_intervals {
        let (a, b) = interval_bounds(r, n_intervals, k);
        let fit = fit_poly_interval(a, b, m, target)?;
        for (j, c) in fit.coeffs.iter().enumerate() {
            coeffs[j][k] = *c;
        }
    }
    Ok(DyadicPolyTable {
        degree: m,
        n_intervals,
        decay_rate: r,
        coeffs,
    })
}

/// Dyadic table for the Gaussian quantile, `r = ½` unless stated.
pub fn fit_gaussian_dyadic(m: usize, n_intervals: usize, r: f64) -> Result<DyadicPolyTable> {
    fit_dyadic_table(m, n_intervals, r, &QuantileTarget::gaussian())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_dist::norm_ppf;

    #[test]
    fn layout_for_fifteen_intervals() {
        let t = fit_gaussian_dyadic(1, 15, 0.5).unwrap();
        assert_eq!(t.coeffs().len(), 2);
        assert_eq!(t.coeffs()[0].len(), 16);
        assert!(t.coeffs().iter().all(|row| row[0] == 0.0));
        assert_eq!(t.interval_bounds(1), (0.25, 0.5));
        assert_eq!(t.interval_bounds(15), (0.0, 2f64.powi(-15)));
    }

    #[test]
    fn breakpoints_tile_the_half_interval() {
        let t = fit_gaussian_dyadic(1, 6, 0.7).unwrap();
        let b = t.breakpoints();
        assert_eq!(b.first(), Some(&0.0));
        assert_eq!(b.last(), Some(&0.5));
        assert!(b.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(b.len(), 7);
    }

    #[test]
    fn index_of_matches_bounds() {
        let t = fit_gaussian_dyadic(1, 10, 0.6).unwrap();
        for i in 1..2000 {
            let v = 0.5 * i as f64 / 2000.0;
            let k = t.index_of(v);
            let (lo, hi) = t.interval_bounds(k);
            assert!(v >= lo && v < hi, "v={v} k={k}");
        }
        assert_eq!(t.index_of(0.5), 0);
    }

    #[test]
    fn half_evaluation_close_to_quantile() {
        let t = fit_gaussian_dyadic(3, 15, 0.5).unwrap();
        for &v in &[0.3, 0.1, 0.01, 1e-4] {
            assert!((t.eval_half(v) - norm_ppf(v)).abs() < 2e-3, "v={v}");
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(fit_gaussian_dyadic(0, 15, 0.5).is_err());
        assert!(fit_gaussian_dyadic(6, 15, 0.5).is_err());
        assert!(fit_gaussian_dyadic(1, 1, 0.5).is_err());
        assert!(fit_gaussian_dyadic(1, 41, 0.5).is_err());
        assert!(fit_gaussian_dyadic(1, 15, 1.0).is_err());
    }
}
