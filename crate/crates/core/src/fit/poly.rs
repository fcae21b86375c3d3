//! Least-squares polynomial fits on a single interval.

use crate::error::{Error, Result};
use crate::exact_dist::{norm_cdf, norm_pdf, norm_ppf, ContinuousDist, GaussianRef};
use crate::quadrature::{integrate_vec, QuadOptions};

/// Relative accuracy requested from the moment quadratures.
pub const MOMENT_REL_TOL: f64 = 1e-10;

/// Condition number above which the monomial normal equations are
/// abandoned for an orthogonal basis.
pub const MAX_CONDITION: f64 = 1e10;

/// A function to be approximated on subintervals of (0, 1).
pub trait FitTarget: Sync {
    fn value(&self, u: f64) -> f64;

    /// `∫_a^b s^i f(u) du` for `i = 0..=m`, with `s = (2u - a - b)/(b - a)`.
    fn centered_moments(&self, a: f64, b: f64, m: usize) -> Result<Vec<f64>> {
        let w = b - a;
        let r = integrate_vec(
            |u, out: &mut [f64]| {
                let t = (2.0 * u - a - b) / w;
                let mut p = self.value(u);
                for o in out.iter_mut() {
                    *o = p;
                    p *= t;
                }
            },
            a,
            b,
            m + 1,
            QuadOptions::rel(MOMENT_REL_TOL),
        );
        check_quadrature(&r.values, r.converged, a, b)?;
        Ok(r.values)
    }

    /// Closed-form degree-1 fit `(intercept, slope)` on `(0, b)`, when known.
    fn singular_linear(&self, _b: f64) -> Option<(f64, f64)> {
        None
    }
}

fn check_quadrature(values: &[f64], converged: bool, a: f64, b: f64) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!(
            "non-finite moment integral on [{a}, {b}]"
        )));
    }
    if !converged {
        log::warn!("moment quadrature on [{a:e}, {b:e}] did not reach the requested tolerance");
    }
    Ok(())
}

/// Wraps a plain closure as a fit target.
pub struct FnTarget<F>(pub F);

impl<F: Fn(f64) -> f64 + Sync> FitTarget for FnTarget<F> {
    fn value(&self, u: f64) -> f64 {
        (self.0)(u)
    }
}

/// `scale · F⁻¹(u) + shift`, or with `reflected`, `scale · F⁻¹(1 - u) + shift`.
///
/// Moments are integrated in the distribution's own variable through the
/// substitution `u = F(x)` (or `u = 1 - F(x)`), which removes the endpoint
/// singularity of the quantile.
#[derive(Debug, Clone)]
pub struct QuantileTarget<D> {
    dist: D,
    scale: f64,
    shift: f64,
    reflected: bool,
    gaussian_closed_form: bool,
}

impl QuantileTarget<GaussianRef> {
    /// The standard normal quantile `Φ⁻¹`.
    pub fn gaussian() -> Self {
        Self {
            dist: GaussianRef,
            scale: 1.0,
            shift: 0.0,
            reflected: false,
            gaussian_closed_form: true,
        }
    }
}

impl<D: ContinuousDist> QuantileTarget<D> {
    pub fn new(dist: D, scale: f64, shift: f64, reflected: bool) -> Self {
        Self {
            dist,
            scale,
            shift,
            reflected,
            gaussian_closed_form: false,
        }
    }

    pub fn dist(&self) -> &D {
        &self.dist
    }

    pub fn reflected(&self) -> bool {
        self.reflected
    }

    pub fn try_value(&self, u: f64) -> Result<f64> {
        let x = if self.reflected {
            self.dist.isf(u)?
        } else {
            self.dist.quantile(u)?
        };
        Ok(self.scale * x + self.shift)
    }

    // Integration range in s for u ∈ (a, b).
    fn s_range(&self, a: f64, b: f64) -> Result<(f64, f64)> {
        let (s_min, s_max) = self.dist.s_bounds();
        let at = |u: f64| -> Result<f64> {
            // u = 0 and u = 1 map to the ends of the effective support.
            if u <= 0.0 {
                return Ok(if self.reflected { s_max } else { s_min });
            }
            if u >= 1.0 {
                return Ok(if self.reflected { s_min } else { s_max });
            }
            let x = if self.reflected {
                self.dist.isf(u)?
            } else {
                self.dist.quantile(u)?
            };
            Ok(self.dist.from_x(x).clamp(s_min, s_max))
        };
        let (sa, sb) = (at(a)?, at(b)?);
        Ok(if sa <= sb { (sa, sb) } else { (sb, sa) })
    }
}

impl<D: ContinuousDist> FitTarget for QuantileTarget<D> {
    fn value(&self, u: f64) -> f64 {
        self.try_value(u).unwrap_or(f64::NAN)
    }

    fn centered_moments(&self, a: f64, b: f64, m: usize) -> Result<Vec<f64>> {
        let w = b - a;
        let (s_lo, s_hi) = self.s_range(a, b)?;
        let r = integrate_vec(
            |s, out: &mut [f64]| {
                let (x, dxds) = self.dist.to_x(s);
                let (c, sf, pdf) = self.dist.cdf_sf_pdf(x);
                let u = if self.reflected { sf } else { c };
                let t = (2.0 * u - a - b) / w;
                let weight = pdf * dxds;
                let mut p = if weight == 0.0 {
                    0.0
                } else {
                    (self.scale * x + self.shift) * weight
                };
                for o in out.iter_mut() {
                    *o = p;
                    p *= t;
                }
            },
            s_lo,
            s_hi,
            m + 1,
            QuadOptions::rel(MOMENT_REL_TOL),
        );
        check_quadrature(&r.values, r.converged, a, b)?;
        Ok(r.values)
    }

    fn singular_linear(&self, b: f64) -> Option<(f64, f64)> {
        if self.gaussian_closed_form && !self.reflected && self.scale == 1.0 && self.shift == 0.0 {
            Some(gaussian_singular_linear(b))
        } else {
            None
        }
    }
}

/// Closed-form L²-optimal line `α + βu` for `Φ⁻¹` on `(0, b)`.
pub fn gaussian_singular_linear(b: f64) -> (f64, f64) {
    let zb = norm_ppf(b);
    let phi = norm_pdf(zb);
    let big = norm_cdf(std::f64::consts::SQRT_2 * zb) / std::f64::consts::PI.sqrt();
    let alpha = 2.0 * phi / b - 3.0 * big / (b * b);
    let beta = 6.0 / (b * b * b) * (big - b * phi);
    (alpha, beta)
}

/// Which basis the normal equations were solved in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitBasis {
    Monomial,
    Legendre,
    ClosedForm,
}

/// Coefficients of the fitted polynomial, lowest degree first.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyFit {
    /// Coefficients in the raw variable `u`.
    pub coeffs: Vec<f64>,
    /// Coefficients in the centred variable `s = (2u - a - b)/(b - a) ∈ [-1, 1]`.
    pub centered: Vec<f64>,
    pub basis: FitBasis,
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

/// Converts `Σ e_i s^i` with `s = (u - c)/h` into `Σ d_k u^k`.
pub fn centered_to_raw(centered: &[f64], c: f64, h: f64) -> Vec<f64> {
    let n = centered.len();
    let mut raw = vec![0.0; n];
    for (i, &e) in centered.iter().enumerate() {
        let ei = e / h.powi(i as i32);
        for (k, r) in raw.iter_mut().enumerate().take(i + 1) {
            *r += ei * binomial(i, k) * (-c).powi((i - k) as i32);
        }
    }
    raw
}

/// Converts `Σ d_k u^k` into powers of `s = (u - c)/h`.
pub fn raw_to_centered(raw: &[f64], c: f64, h: f64) -> Vec<f64> {
    // u = c + h s
    let n = raw.len();
    let mut centered = vec![0.0; n];
    for (k, &d) in raw.iter().enumerate() {
        for (i, s) in centered.iter_mut().enumerate().take(k + 1) {
            *s += d * binomial(k, i) * c.powi((k - i) as i32) * h.powi(i as i32);
        }
    }
    centered
}

// Solves a small dense system by Gaussian elimination with partial pivoting,
// returning the solution and a 1-norm condition number estimate.
fn solve_dense(mut a: Vec<Vec<f64>>, rhs: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = rhs.len();
    let norm_a = (0..n)
        .map(|j| (0..n).map(|i| a[i][j].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    // Augment with identity to get the inverse alongside the solution.
    let mut aug: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = std::mem::take(&mut a[i]);
            row.push(rhs[i]);
            row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| aug[i][col].abs().total_cmp(&aug[j][col].abs()))
            .expect("non-empty range");
        if aug[piv][col] == 0.0 {
            return Err(Error::Numerical("singular normal equations".into()));
        }
        aug.swap(col, piv);
        let p = aug[col][col];
        for v in aug[col].iter_mut() {
            *v /= p;
        }
        for row in 0..n {
            if row != col {
                let f = aug[row][col];
                if f != 0.0 {
                    for c in 0..aug[row].len() {
                        aug[row][c] -= f * aug[col][c];
                    }
                }
            }
        }
    }
    let x = (0..n).map(|i| aug[i][n]).collect();
    let norm_inv = (0..n)
        .map(|j| (0..n).map(|i| aug[i][n + 1 + j].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    Ok((x, norm_a * norm_inv))
}

// Power-basis coefficients of the Legendre polynomials P_0..=P_m on [-1, 1].
fn legendre_table(m: usize) -> Vec<Vec<f64>> {
    let mut p: Vec<Vec<f64>> = vec![vec![1.0]];
    if m >= 1 {
        p.push(vec![0.0, 1.0]);
    }
    for n in 1..m {
        // (n+1) P_{n+1} = (2n+1) s P_n - n P_{n-1}
        let mut next = vec![0.0; n + 2];
        for (k, c) in p[n].iter().enumerate() {
            next[k + 1] += (2 * n + 1) as f64 * c;
        }
        for (k, c) in p[n - 1].iter().enumerate() {
            next[k] -= n as f64 * c;
        }
        for c in next.iter_mut() {
            *c /= (n + 1) as f64;
        }
        p.push(next);
    }
    p
}

/// L²-optimal polynomial of degree `m` approximating `target` on `(a, b)`.
///
/// The normal equations are formed in the centred variable
/// `s = (2u - a - b)/(b - a)`, where the Gram matrix is `(b - a)/(i + j + 1)`
/// for even `i + j` and zero otherwise. On the singular interval `a = 0` with
/// `m = 1`, a closed form is used when the target provides one.
pub fn fit_poly_interval(a: f64, b: f64, m: usize, target: &dyn FitTarget) -> Result<PolyFit> {
    if !(a >= 0.0 && a < b && b <= 1.0) {
        return Err(Error::Config(format!(
            "fit interval must satisfy 0 <= a < b <= 1, got ({a}, {b})"
        )));
    }
    if m > 20 {
        return Err(Error::Config(format!("polynomial degree {m} too large")));
    }
    let w = b - a;
    let (c, h) = (0.5 * (a + b), 0.5 * w);
    if a == 0.0 && m == 1 {
        if let Some((alpha, beta)) = target.singular_linear(b) {
            let coeffs = vec![alpha, beta];
            let centered = raw_to_centered(&coeffs, c, h);
            return Ok(PolyFit {
                coeffs,
                centered,
                basis: FitBasis::ClosedForm,
            });
        }
    }
    let moments = target.centered_moments(a, b, m)?;
    let n = m + 1;
    let gram: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if (i + j) % 2 == 0 {
                        w / (i + j + 1) as f64
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let (centered, cond) = solve_dense(gram, &moments)?;
    if cond <= MAX_CONDITION {
        let coeffs = centered_to_raw(&centered, c, h);
        return Ok(PolyFit {
            coeffs,
            centered,
            basis: FitBasis::Monomial,
        });
    }
    log::warn!("normal equations on ({a:e}, {b:e}) with degree {m} have condition {cond:.2e}; using an orthogonal basis");
    // Orthogonal projection: e_i = (2i+1)/w ∫ P_i(s) f du.
    let legendre = legendre_table(m);
    let mut centered = vec![0.0; n];
    for p in &legendre {
        let i = p.len() - 1;
        let proj: f64 = p.iter().zip(&moments).map(|(c, mom)| c * mom).sum();
        let e = (2 * i + 1) as f64 / w * proj;
        for (k, c) in p.iter().enumerate() {
            centered[k] += e * c;
        }
    }
    let coeffs = centered_to_raw(&centered, c, h);
    Ok(PolyFit {
        coeffs,
        centered,
        basis: FitBasis::Legendre,
    })
}

/// Horner evaluation, lowest degree first.
#[inline]
pub fn horner(coeffs: &[f64], u: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * u + c)
}
