//! Numerical checks of the Gaussian tail facts behind the constant-table
//! error bound.

use serde::{Deserialize, Serialize};

use crate::exact_dist::{norm_isf, norm_pdf};
use crate::quadrature::{integrate, QuadOptions};

/// `z_q = Φ⁻¹(1 - 2^-q)` and its elementary bounds
/// `√(q log 4 - log(qπ log 16)) ≤ z_q ≤ √(q log 4)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailQuantileSandwich {
    pub q: u32,
    pub lower: f64,
    pub z: f64,
    pub upper: f64,
}

impl TailQuantileSandwich {
    pub fn holds(&self, slack: f64) -> bool {
        self.lower - slack <= self.z && self.z <= self.upper
    }
}

pub fn tail_quantile_sandwich(q: u32) -> TailQuantileSandwich {
    let qf = q as f64;
    let l4 = 4f64.ln();
    let upper = (qf * l4).sqrt();
    let inner = qf * l4 - (qf * std::f64::consts::PI * 16f64.ln()).ln();
    let lower = inner.max(0.0).sqrt();
    TailQuantileSandwich {
        q,
        lower,
        z: norm_isf(2f64.powi(-(q as i32))),
        upper,
    }
}

/// `(2^q φ(z_q)/z_q, (1 - z_q⁻²)⁻¹)`: the ratio and its upper bound.
pub fn tail_density_ratio(q: u32) -> (f64, f64) {
    let z = norm_isf(2f64.powi(-(q as i32)));
    let ratio = 2f64.powi(q as i32) * norm_pdf(z) / z;
    (ratio, 1.0 / (1.0 - 1.0 / (z * z)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailMoment {
    pub p: u32,
    pub z: f64,
    /// `∫_z^∞ (s-z)^p φ(s) ds` by quadrature.
    pub numeric: f64,
    /// `p! φ(z) / z^(p+1)`.
    pub asymptotic: f64,
}

impl TailMoment {
    pub fn ratio(&self) -> f64 {
        self.numeric / self.asymptotic
    }
}

pub fn gaussian_tail_moment(p: u32, z: f64) -> TailMoment {
    // With s = z + t the integrand t^p φ(z + t) decays like e^(-zt), so a
    // window of a few dozen decay lengths is exhaustive.
    let upper = 60.0 / z.max(1.0) + 20.0;
    let r = integrate(
        |t| t.powi(p as i32) * norm_pdf(z + t),
        0.0,
        upper,
        QuadOptions::rel(1e-13),
    );
    let fact: f64 = (1..=p).map(|k| k as f64).product();
    TailMoment {
        p,
        z,
        numeric: r.values[0],
        asymptotic: fact * norm_pdf(z) / z.powi(p as i32 + 1),
    }
}
