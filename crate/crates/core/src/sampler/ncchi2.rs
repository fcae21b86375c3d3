//! Evaluation of the non-central χ² table family.

use super::{dyadic_index, horner_row};
use crate::error::{Error, Result};
use crate::fit::NcChi2Table;

/// Bracketing knot `j` and weight `f` so that `√y` lies between knots `j`
/// and `j + 1` at fraction `f`.
#[inline(always)]
fn knot_position(n_knots: usize, nu: f64, lambda: f64) -> (usize, f64) {
    let y = nu / (lambda + nu);
    let s = y.sqrt() * (n_knots - 1) as f64;
    let j = (s as usize).min(n_knots - 2);
    (j, s - j as f64)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "non-centrality must be finite and >= 0, got {lambda}"
        )))
    }
}

/// The table family frozen at one non-centrality: the two bracketing knots
/// are blended and the affine map `λ + ν + 2√(λ+ν)·P` is folded into the
/// coefficients, so evaluation costs one polynomial per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct NcChi2Slice {
    nu: f64,
    lambda: f64,
    n_intervals: usize,
    lower: Vec<Vec<f64>>,
    upper: Vec<Vec<f64>>,
}

impl NcChi2Slice {
    pub fn new(table: &NcChi2Table, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        let nu = table.nu();
        let (j, f) = knot_position(table.n_knots(), nu, lambda);
        let total = lambda + nu;
        let gain = 2.0 * total.sqrt();
        let fold = |halves: &[crate::fit::DyadicPolyTable]| -> Vec<Vec<f64>> {
            let (a, b) = (halves[j].coeffs(), halves[j + 1].coeffs());
            a.iter()
                .zip(b)
                .enumerate()
                .map(|(d, (ra, rb))| {
                    ra.iter()
                        .zip(rb)
                        .map(|(&ca, &cb)| {
                            let c = ca + f * (cb - ca);
                            if d == 0 {
                                total + gain * c
                            } else {
                                gain * c
                            }
                        })
                        .collect()
                })
                .collect()
        };
        Ok(Self {
            nu,
            lambda,
            n_intervals: table.n_intervals(),
            lower: fold(table.lower()),
            upper: fold(table.upper()),
        })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn eval_batch(&self, u: &[f64], out: &mut [f64]) {
        assert_eq!(
            u.len(),
            out.len(),
            "input and output batches differ in length"
        );
        let k = self.n_intervals;
        for (o, &x) in out.iter_mut().zip(u) {
            debug_assert!(x > 0.0 && x < 1.0, "u={x} outside (0, 1)");
            let rows = if x < 0.5 { &self.lower } else { &self.upper };
            let v = x.min(1.0 - x);
            *o = horner_row(rows, dyadic_index(v, k), v);
        }
    }
}

impl super::InverseCdf for NcChi2Slice {
    fn eval_batch(&self, u: &[f64], out: &mut [f64]) {
        NcChi2Slice::eval_batch(self, u, out)
    }
}

/// Approximate non-central χ² quantiles at one non-centrality.
pub fn eval_ncchi2(table: &NcChi2Table, u: &[f64], lambda: f64, out: &mut [f64]) -> Result<()> {
    NcChi2Slice::new(table, lambda)?.eval_batch(u, out);
    Ok(())
}

/// Approximate quantiles with a separate non-centrality per element, as
/// needed when every path of a simulation sits at a different state.
pub fn eval_ncchi2_varying(
    table: &NcChi2Table,
    u: &[f64],
    lambda: &[f64],
    out: &mut [f64],
) -> Result<()> {
    assert_eq!(
        u.len(),
        out.len(),
        "input and output batches differ in length"
    );
    assert_eq!(
        u.len(),
        lambda.len(),
        "one non-centrality per element required"
    );
    if let Some(&bad) = lambda.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
        return Err(Error::Domain(format!(
            "non-centrality must be finite and >= 0, got {bad}"
        )));
    }
    let nu = table.nu();
    let n_knots = table.n_knots();
    let k = table.n_intervals();
    let (lower, upper) = (table.lower(), table.upper());
    for ((o, &x), &l) in out.iter_mut().zip(u).zip(lambda) {
        let (j, f) = knot_position(n_knots, nu, l);
        let halves = if x < 0.5 { lower } else { upper };
        let v = x.min(1.0 - x);
        let i = dyadic_index(v, k);
        let p0 = horner_row(halves[j].coeffs(), i, v);
        let p1 = horner_row(halves[j + 1].coeffs(), i, v);
        let total = l + nu;
        *o = total + 2.0 * total.sqrt() * (p0 + f * (p1 - p0));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_dist::{norm_ppf, NcChi2Ref};
    use crate::fit::fit_ncchi2;
    use crate::sampler::InverseCdf;
    use std::sync::OnceLock;

    fn table() -> &'static NcChi2Table {
        static T: OnceLock<NcChi2Table> = OnceLock::new();
        T.get_or_init(|| fit_ncchi2(1.0, 16, 1, 15).unwrap())
    }

    #[test]
    fn zero_noncentrality_uses_last_knot() {
        let t = table();
        let s = NcChi2Slice::new(t, 0.0).unwrap();
        for &u in &[0.01f64, 0.3, 0.5, 0.7, 0.99] {
            let half = if u < 0.5 {
                &t.lower()[15]
            } else {
                &t.upper()[15]
            };
            let expect = 1.0 + 2.0 * half.eval_half(u.min(1.0 - u));
            assert!((s.eval(u) - expect).abs() < 1e-12, "u={u}");
        }
    }

    #[test]
    fn large_noncentrality_approaches_gaussian() {
        let t = table();
        let lambda = 1e10;
        let s = NcChi2Slice::new(t, lambda).unwrap();
        let g = &t.lower()[0];
        for &u in &[0.05, 0.3] {
            let total = lambda + 1.0;
            let gauss = total + 2.0 * total.sqrt() * g.eval_half(u);
            assert!(
                (s.eval(u) - gauss).abs() / (2.0 * total.sqrt()) < 1e-3,
                "u={u}"
            );
            let exact = total + 2.0 * total.sqrt() * norm_ppf(u);
            assert!((s.eval(u) - exact).abs() / (2.0 * total.sqrt()) < 0.05);
        }
    }

    #[test]
    fn rmse_close_to_reference_level() {
        let t = table();
        let d = NcChi2Ref::new(1.0, 1.0).unwrap();
        let n = 4000;
        let u: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let mut approx = vec![0.0; n];
        eval_ncchi2(t, &u, 1.0, &mut approx).unwrap();
        let mse: f64 = u
            .iter()
            .zip(&approx)
            .map(|(&x, a)| (d.quantile(x).unwrap() - a).powi(2))
            .sum::<f64>()
            / n as f64;
        let rmse = mse.sqrt();
        assert!(rmse > 0.025 && rmse < 0.045, "rmse={rmse}");
    }

    #[test]
    fn varying_matches_slice() {
        let t = table();
        let u = crate::sampler::UniformStream::new(1, 1).take_vec(500);
        for &lambda in &[0.0, 0.4, 7.0, 300.0] {
            let mut a = vec![0.0; u.len()];
            let mut b = vec![0.0; u.len()];
            eval_ncchi2(t, &u, lambda, &mut a).unwrap();
            eval_ncchi2_varying(t, &u, &vec![lambda; u.len()], &mut b).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()), "lambda={lambda}");
            }
        }
    }

    #[test]
    fn median_is_knot_blend_of_centres() {
        let t = table();
        let s = NcChi2Slice::new(t, 2.0).unwrap();
        let (j, f) = knot_position(16, 1.0, 2.0);
        let c0 = t.lower()[j].coeffs()[0][0];
        let c1 = t.lower()[j + 1].coeffs()[0][0];
        let expect = 3.0 + 2.0 * 3f64.sqrt() * (c0 + f * (c1 - c0));
        assert!((s.eval(0.5) - expect).abs() < 1e-12);
        let exact = NcChi2Ref::new(1.0, 2.0).unwrap().quantile(0.5).unwrap();
        assert!((s.eval(0.5) - exact).abs() < 0.05);
    }

    #[test]
    fn rejects_bad_noncentrality() {
        let t = table();
        assert!(matches!(NcChi2Slice::new(t, -1.0), Err(Error::Domain(_))));
        let mut out = [0.0];
        assert!(eval_ncchi2_varying(t, &[0.3], &[f64::NAN], &mut out).is_err());
    }
}
