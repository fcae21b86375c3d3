//! Non-central χ² distribution: Poisson-mixture series for the distribution
//! function and a safeguarded Newton iteration for the quantile.

use super::gamma::{gamma_kernel, gamma_pq};
use super::gaussian::norm_ppf;
use crate::error::{Error, Result};

const TAIL_MASS: f64 = 1e-14;
const REL_TERM: f64 = 1e-16;
const MAX_NEWTON: usize = 300;

/// Non-central χ² distribution with `nu` degrees of freedom and
/// non-centrality `lambda`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NcChi2Ref {
    nu: f64,
    lambda: f64,
}

impl NcChi2Ref {
    pub fn new(nu: f64, lambda: f64) -> Result<Self> {
        if !(nu.is_finite() && nu > 0.0) {
            return Err(Error::Domain(format!(
                "degrees of freedom must be finite and > 0, got {nu}"
            )));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::Domain(format!(
                "non-centrality must be finite and >= 0, got {lambda}"
            )));
        }
        Ok(Self { nu, lambda })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Upper end of the root-finding bracket: mean plus twenty standard
    /// deviations plus a constant margin.
    pub fn bracket_hi(&self) -> f64 {
        let m = self.lambda + self.nu;
        m + 20.0 * (2.0 * m).sqrt() + 100.0
    }

    /// Returns `(cdf, sf, pdf)` at `x` from one pass over the Poisson series.
    ///
    /// The series starts at the modal Poisson index and walks outwards in
    /// both directions until the neglected Poisson mass is below 1e-14 and
    /// the neglected contributions are negligible relative to each sum.
    pub fn cdf_sf_pdf(&self, x: f64) -> (f64, f64, f64) {
        if x.is_nan() {
            return (f64::NAN, f64::NAN, f64::NAN);
        }
        if x <= 0.0 {
            let pdf = if self.nu < 2.0 {
                f64::INFINITY
            } else if self.nu == 2.0 {
                0.5 * (-0.5 * self.lambda).exp()
            } else {
                0.0
            };
            return (0.0, 1.0, pdf);
        }
        if x.is_infinite() {
            return (1.0, 0.0, 0.0);
        }
        let h = 0.5 * x;
        let mu = 0.5 * self.lambda;
        let half = 0.5 * self.nu;
        let j0 = mu.floor();
        let a0 = half + j0;
        let (p0, q0) = gamma_pq(a0, h);
        let g0 = gamma_kernel(a0, h);
        let w0 = if mu > 0.0 {
            (-mu + j0 * mu.ln() - libm::lgamma(j0 + 1.0)).exp()
        } else {
            1.0
        };

        let mut sp = w0 * p0;
        let mut sq = w0 * q0;
        let mut sd = w0 * g0 * a0 / x;
        let mut wsum = w0;

        // Forward: j > j0, P decreases and Q increases.
        let (mut w, mut p, mut q, mut g, mut a, mut j) = (w0, p0, q0, g0, a0, j0);
        loop {
            p = (p - g).max(0.0);
            q = (q + g).min(1.0);
            g *= h / (a + 1.0);
            a += 1.0;
            j += 1.0;
            w *= mu / j;
            if w == 0.0 {
                break;
            }
            sp += w * p;
            sq += w * q;
            sd += w * g * a / x;
            wsum += w;
            let ratio = mu / (j + 1.0);
            let tail = if ratio < 1.0 {
                w * ratio / (1.0 - ratio)
            } else {
                f64::INFINITY
            };
            if tail < TAIL_MASS && tail * p <= REL_TERM * sp && tail <= REL_TERM * sq {
                break;
            }
        }

        // Backward: j < j0, P increases and Q decreases.
        let (mut w, mut p, mut q, mut g, mut a, mut j) = (w0, p0, q0, g0, a0, j0);
        while j >= 1.0 {
            g *= a / h;
            a -= 1.0;
            p = (p + g).min(1.0);
            q = (q - g).max(0.0);
            w *= j / mu;
            j -= 1.0;
            if w == 0.0 {
                break;
            }
            sp += w * p;
            sq += w * q;
            sd += w * g * a / x;
            wsum += w;
            let ratio = j / mu;
            let tail = if ratio < 1.0 {
                w * ratio / (1.0 - ratio)
            } else {
                f64::INFINITY
            };
            if tail < TAIL_MASS && tail <= REL_TERM * sp && tail * q <= REL_TERM * sq {
                break;
            }
        }

        ((sp / wsum).min(1.0), (sq / wsum).min(1.0), sd / wsum)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.cdf_sf_pdf(x).0
    }

    pub fn sf(&self, x: f64) -> f64 {
        self.cdf_sf_pdf(x).1
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.cdf_sf_pdf(x).2
    }

    /// Quantile, `C⁻¹(u)`.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        self.quantile_from(u, None)
    }

    /// Quantile with an optional starting point, used to warm-start sweeps
    /// over sorted probabilities.
    pub fn quantile_from(&self, u: f64, guess: Option<f64>) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::Domain(format!("quantile needs 0 < u < 1, got {u}")));
        }
        if u <= 0.5 {
            self.solve(u, false, guess)
        } else {
            self.solve(1.0 - u, true, guess)
        }
    }

    /// Inverse survival function, `C⁻¹(1-v)`, accurate for small `v`.
    pub fn isf(&self, v: f64) -> Result<f64> {
        self.isf_from(v, None)
    }

    pub fn isf_from(&self, v: f64, guess: Option<f64>) -> Result<f64> {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::Domain(format!(
                "inverse survival needs 0 < v < 1, got {v}"
            )));
        }
        if v <= 0.5 {
            self.solve(v, true, guess)
        } else {
            self.solve(1.0 - v, false, guess)
        }
    }

    // Patnaik's two-moment central approximation combined with the
    // Wilson–Hilferty cube-root transform; power-law lower tail otherwise.
    fn initial_guess(&self, target: f64, upper: bool) -> f64 {
        let z = if upper {
            -norm_ppf(target)
        } else {
            norm_ppf(target)
        };
        let m = self.nu + self.lambda;
        let s2 = self.nu + 2.0 * self.lambda;
        let rho = s2 / m;
        let f = m * m / s2;
        let k = 2.0 / (9.0 * f);
        let c = 1.0 - k + z * k.sqrt();
        if c > 0.05 {
            return rho * f * c * c * c;
        }
        let half = 0.5 * self.nu;
        let log_x = (target.ln() + libm::lgamma(half + 1.0) + 0.5 * self.lambda) / half;
        2.0 * log_x.exp()
    }

    fn check_bracket(&self, hi0: f64, target: f64, upper: bool) -> Result<()> {
        let (p_hi, q_hi, _) = self.cdf_sf_pdf(hi0);
        let bracketed = if upper {
            q_hi <= target
        } else {
            p_hi >= target
        };
        if bracketed {
            return Ok(());
        }
        Err(Error::Numerical(format!(
            "failed to bracket the quantile within [0, {hi0}] for nu={}, lambda={}, {}={target} \
             (cdf at bracket end {p_hi}, sf {q_hi})",
            self.nu,
            self.lambda,
            if upper {
                "tail probability"
            } else {
                "probability"
            }
        )))
    }

    // Solves P(x) = target (upper = false) or Q(x) = target (upper = true)
    // for target <= 1/2, by Newton's method on ln P (or ln Q) as a function
    // of ln x, falling back to bisection whenever a step leaves the bracket.
    fn solve(&self, target: f64, upper: bool, guess: Option<f64>) -> Result<f64> {
        let hi0 = self.bracket_hi();
        // The bracket end is only checked once the iteration needs it, which
        // saves a series evaluation on warm-started sweeps.
        let mut hi_checked = false;
        let (mut lo, mut hi) = (0.0f64, hi0);
        let mut x = guess
            .filter(|g| g.is_finite() && *g > 0.0 && *g < hi)
            .unwrap_or_else(|| self.initial_guess(target, upper));
        if !(x > 0.0 && x < hi) {
            x = 0.5 * hi;
        }
        let ln_target = target.ln();
        for _ in 0..MAX_NEWTON {
            let (p, q, d) = self.cdf_sf_pdf(x);
            let val = if upper { q } else { p };
            if val == target {
                return Ok(x);
            }
            let below_root = if upper { q > target } else { p < target };
            if below_root {
                lo = x;
            } else {
                hi = x;
            }
            let slope = if upper { -d * x / q } else { d * x / p };
            let r = val.ln() - ln_target;
            if r.abs() <= 4.0 * f64::EPSILON {
                return Ok(x);
            }
            let mut next = if val > 0.0 && slope.is_finite() && slope != 0.0 {
                x * (-r / slope).exp()
            } else {
                f64::NAN
            };
            if !(next > lo && next < hi) {
                if !hi_checked && hi == hi0 {
                    self.check_bracket(hi0, target, upper)?;
                    hi_checked = true;
                }
                next = if lo > 0.0 {
                    (lo * hi).sqrt()
                } else {
                    hi / 16.0
                };
            }
            if (next - x).abs() <= 8.0 * f64::EPSILON * x || hi - lo <= 8.0 * f64::EPSILON * hi {
                return Ok(next);
            }
            x = next;
        }
        if hi - lo <= 1e-10 * hi {
            return Ok(0.5 * (lo + hi));
        }
        Err(Error::Numerical(format!(
            "quantile iteration did not converge for nu={}, lambda={}, target={target}, bracket [{lo}, {hi}]",
            self.nu, self.lambda
        )))
    }
}

impl super::ContinuousDist for NcChi2Ref {
    fn cdf(&self, x: f64) -> f64 {
        NcChi2Ref::cdf(self, x)
    }
    fn sf(&self, x: f64) -> f64 {
        NcChi2Ref::sf(self, x)
    }
    fn pdf(&self, x: f64) -> f64 {
        NcChi2Ref::pdf(self, x)
    }
    fn cdf_sf_pdf(&self, x: f64) -> (f64, f64, f64) {
        NcChi2Ref::cdf_sf_pdf(self, x)
    }
    fn quantile(&self, u: f64) -> Result<f64> {
        NcChi2Ref::quantile(self, u)
    }
    fn isf(&self, v: f64) -> Result<f64> {
        NcChi2Ref::isf(self, v)
    }
    // x = s², which removes the x^{ν/2-1} density singularity at the origin
    // for ν >= 1.
    fn to_x(&self, s: f64) -> (f64, f64) {
        (s * s, 2.0 * s)
    }
    fn from_x(&self, x: f64) -> f64 {
        x.sqrt()
    }
    fn s_bounds(&self) -> (f64, f64) {
        (0.0, self.bracket_hi().sqrt())
    }
}

/// Checked distribution function.
pub fn ncchi2_cdf(x: f64, nu: f64, lambda: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("x must be finite, got {x}")));
    }
    if x < 0.0 {
        return Err(Error::Domain(format!("x must be >= 0, got {x}")));
    }
    Ok(NcChi2Ref::new(nu, lambda)?.cdf(x))
}

/// Checked quantile.
pub fn ncchi2_inv_cdf(u: f64, nu: f64, lambda: f64) -> Result<f64> {
    NcChi2Ref::new(nu, lambda)?.quantile(u)
}

/// Parameters of one exact step of the square-root diffusion
/// `dX = κ(θ - X)dt + σ√X dW`: `X_next = scale · χ²_ν(λ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CirTransition {
    pub nu: f64,
    pub lambda: f64,
    pub scale: f64,
}

pub fn cir_transition_params(
    x_prev: f64,
    kappa: f64,
    theta: f64,
    sigma: f64,
    dt: f64,
) -> Result<CirTransition> {
    for (name, v) in [
        ("kappa", kappa),
        ("theta", theta),
        ("sigma", sigma),
        ("dt", dt),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Domain(format!(
                "{name} must be finite and > 0, got {v}"
            )));
        }
    }
    if !(x_prev.is_finite() && x_prev >= 0.0) {
        return Err(Error::Domain(format!(
            "previous state must be finite and >= 0, got {x_prev}"
        )));
    }
    let decay = (-kappa * dt).exp();
    let scale = -sigma * sigma * (-kappa * dt).exp_m1() / (4.0 * kappa);
    Ok(CirTransition {
        nu: 4.0 * kappa * theta / (sigma * sigma),
        lambda: x_prev * decay / scale,
        scale,
    })
}
