//! Piecewise constant approximations of the Gaussian quantile on `2^q`
//! equal-width intervals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact_dist::{norm_pdf, norm_ppf};

/// How the constant on each interval is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Construction {
    /// Conditional expectation of Z given the interval (the L² projection).
    L1,
    /// Quantile at the interval midpoint.
    Central,
    /// Quantile at the endpoint nearer ½.
    Interior,
    /// The two-point table `[-1, 1]`.
    Rademacher,
}

impl Construction {
    pub fn code(self) -> u32 {
        match self {
            Construction::L1 => 0,
            Construction::Central => 1,
            Construction::Interior => 2,
            Construction::Rademacher => 3,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        Some(match code {
            0 => Construction::L1,
            1 => Construction::Central,
            2 => Construction::Interior,
            3 => Construction::Rademacher,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Construction::L1 => "l1",
            Construction::Central => "central",
            Construction::Interior => "interior",
            Construction::Rademacher => "rademacher",
        }
    }
}

impl std::str::FromStr for Construction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(Construction::L1),
            "central" => Ok(Construction::Central),
            "interior" => Ok(Construction::Interior),
            "rademacher" => Ok(Construction::Rademacher),
            other => Err(Error::Config(format!(
                "unknown construction '{other}' (expected l1, central, interior or rademacher)"
            ))),
        }
    }
}

pub const MAX_Q: u32 = 24;

/// `2^q` constants, one per interval `(k 2^-q, (k+1) 2^-q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantTable {
    q: u32,
    values: Vec<f64>,
    construction: Construction,
}

impl ConstantTable {
    /// Builds a table from raw values, checking the length and the
    /// antisymmetry required for a symmetric target.
    pub fn from_values(values: Vec<f64>, construction: Construction) -> Result<Self> {
        let n = values.len();
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::Config(format!(
                "table length must be a power of two >= 2, got {n}"
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("table values must be finite".into()));
        }
        Ok(Self {
            q: n.trailing_zeros(),
            values,
            construction,
        })
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn construction(&self) -> Construction {
        self.construction
    }

    /// Interval boundaries `k 2^-q`, `k = 0..=2^q`.
    pub fn breakpoints(&self) -> Vec<f64> {
        let n = self.values.len() as f64;
        (0..=self.values.len()).map(|k| k as f64 / n).collect()
    }
}

// φ(a) - φ(b) for 0 <= a < b without cancellation.
fn density_drop(a: f64, b: f64) -> f64 {
    if b.is_infinite() {
        return norm_pdf(a);
    }
    -norm_pdf(a) * (-(b - a) * (b + a) * 0.5).exp_m1()
}

/// Fits a piecewise constant table with `2^q` intervals to the Gaussian
/// quantile.
///
/// Values for the upper half are computed from `Φ⁻¹(1 - k 2^-q)` (exact
/// arguments) and the lower half is filled by negation, so the table is
/// exactly antisymmetric.
pub fn fit_constant(q: u32, construction: Construction) -> Result<ConstantTable> {
    if construction == Construction::Rademacher {
        return Ok(ConstantTable {
            q: 1,
            values: vec![-1.0, 1.0],
            construction,
        });
    }
    if !(1..=MAX_Q).contains(&q) {
        return Err(Error::Config(format!("q must lie in 1..={MAX_Q}, got {q}")));
    }
    let n = 1usize << q;
    let half = n / 2;
    let nf = n as f64;
    // Upper-half boundary z-values: z_k = Φ⁻¹(k/n) for k = half..=n.
    let z_at = |k: usize| -> f64 {
        if k == n {
            f64::INFINITY
        } else {
            -norm_ppf((n - k) as f64 / nf)
        }
    };
    let mut values = vec![0.0; n];
    for k in half..n {
        let v = match construction {
            Construction::L1 => density_drop(z_at(k), z_at(k + 1)) * nf,
            Construction::Central => -norm_ppf((2 * (n - k) - 1) as f64 / (2.0 * nf)),
            Construction::Interior => z_at(k),
            Construction::Rademacher => unreachable!(),
        };
        values[k] = v;
        values[n - 1 - k] = -v;
    }
    Ok(ConstantTable {
        q,
        values,
        construction,
    })
}
