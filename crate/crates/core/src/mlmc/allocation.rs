//! Optimal path allocation and predicted savings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::GaussianSampler;

/// Assumed `ĉ/c̃` for the non-central χ² tables.
pub const CHI2_COST_RATIO: f64 = 300.0;

/// Assumed `ĉ/c̃` of an approximate Gaussian against the exact quantile,
/// used when costs are counted in draws rather than measured: Rademacher 9,
/// piecewise constant 6, piecewise linear 7, cubic and higher 5.
pub fn default_cost_ratio(sampler: &GaussianSampler) -> f64 {
    match sampler {
        GaussianSampler::Exact => 1.0,
        GaussianSampler::Constant(t)
            if t.construction() == crate::fit::Construction::Rademacher =>
        {
            9.0
        }
        GaussianSampler::Constant(_) => 6.0,
        GaussianSampler::Dyadic(t) => degree_ratio(t.degree()),
        GaussianSampler::DyadicF32(t) => degree_ratio(t.degree()),
    }
}

fn degree_ratio(m: usize) -> f64 {
    match m {
        0 | 1 => 7.0,
        2 => 6.0,
        _ => 5.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    /// Continuous optimum `m_l = ε⁻¹ √(2 T v_l / c_l)`.
    pub real_paths: Vec<f64>,
    /// Rounded up.
    pub paths: Vec<u64>,
    /// `T = 2ε⁻² (Σ √(v_l c_l))²`.
    pub predicted_cost: f64,
    /// `Σ v_l / m_l` with the rounded counts; at most `ε²/2`.
    pub variance: f64,
}

fn check_inputs(v: &[f64], c: &[f64], eps: f64) -> Result<()> {
    if v.is_empty() || v.len() != c.len() {
        return Err(Error::Config(
            "need one variance and one cost per level".into(),
        ));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Config(format!(
            "target accuracy must be > 0, got {eps}"
        )));
    }
    if v.iter().any(|x| !(x.is_finite() && *x >= 0.0))
        || c.iter().any(|x| !(x.is_finite() && *x > 0.0))
    {
        return Err(Error::Config("variances must be >= 0 and costs > 0".into()));
    }
    Ok(())
}

fn paths_for(v: &[f64], c: &[f64], eps: f64, t: f64) -> Vec<f64> {
    v.iter()
        .zip(c)
        .map(|(v, c)| (2.0 * t * v / c).sqrt() / eps)
        .collect()
}

fn rounded_variance(v: &[f64], m: &[u64]) -> f64 {
    v.iter()
        .zip(m)
        .filter(|(v, _)| **v > 0.0)
        .map(|(v, &m)| v / m as f64)
        .sum()
}

/// Minimises `Σ m_l c_l` subject to `Σ v_l/m_l = ε²/2`.
pub fn optimal_allocation(v: &[f64], c: &[f64], eps: f64) -> Result<Allocation> {
    check_inputs(v, c, eps)?;
    let s: f64 = v.iter().zip(c).map(|(v, c)| (v * c).sqrt()).sum();
    if s == 0.0 {
        return Err(Error::Config("all level variances are zero".into()));
    }
    let t = 2.0 * s * s / (eps * eps);
    let real_paths = paths_for(v, c, eps, t);
    let paths: Vec<u64> = real_paths.iter().map(|m| m.ceil() as u64).collect();
    let variance = rounded_variance(v, &paths);
    Ok(Allocation {
        real_paths,
        paths,
        predicted_cost: t,
        variance,
    })
}

/// The nested estimator's allocation: cheap two-way terms and expensive
/// four-way corrections on every level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestedAllocation {
    pub two_way: Vec<f64>,
    pub four_way: Vec<f64>,
    pub two_way_paths: Vec<u64>,
    pub four_way_paths: Vec<u64>,
    /// `T̃ = 2ε⁻² (Σ √(ṽ_l c̃_l) + √(Ṽ_l C̃_l))²`.
    pub predicted_cost: f64,
    pub variance: f64,
}

pub fn optimal_allocation_nested(
    v2: &[f64],
    c2: &[f64],
    v4: &[f64],
    c4: &[f64],
    eps: f64,
) -> Result<NestedAllocation> {
    check_inputs(v2, c2, eps)?;
    check_inputs(v4, c4, eps)?;
    if v2.len() != v4.len() {
        return Err(Error::Config(
            "two-way and four-way statistics cover different levels".into(),
        ));
    }
    let s: f64 = v2.iter().zip(c2).map(|(v, c)| (v * c).sqrt()).sum::<f64>()
        + v4.iter().zip(c4).map(|(v, c)| (v * c).sqrt()).sum::<f64>();
    if s == 0.0 {
        return Err(Error::Config("all level variances are zero".into()));
    }
    let t = 2.0 * s * s / (eps * eps);
    let two_way = paths_for(v2, c2, eps, t);
    let four_way = paths_for(v4, c4, eps, t);
    let two_way_paths: Vec<u64> = two_way.iter().map(|m| m.ceil() as u64).collect();
    let four_way_paths: Vec<u64> = four_way.iter().map(|m| m.ceil() as u64).collect();
    let variance = rounded_variance(v2, &two_way_paths) + rounded_variance(v4, &four_way_paths);
    Ok(NestedAllocation {
        two_way,
        four_way,
        two_way_paths,
        four_way_paths,
        predicted_cost: t,
        variance,
    })
}

/// `T̃/T̂` from the full allocation formulas together with the per-level
/// bound `max_l (ṽc̃)/(v̂ĉ) · (1 + √(ṼC̃/(ṽc̃)))²`.
pub fn speedup_bound(
    v_hat: &[f64],
    c_hat: &[f64],
    v_tilde: &[f64],
    c_tilde: &[f64],
    v_four: &[f64],
    c_four: &[f64],
) -> Result<(f64, f64)> {
    let regular = optimal_allocation(v_hat, c_hat, 1.0)?;
    let nested = optimal_allocation_nested(v_tilde, c_tilde, v_four, c_four, 1.0)?;
    let bound = (0..v_hat.len())
        .map(|l| {
            let base = v_tilde[l] * c_tilde[l] / (v_hat[l] * c_hat[l]);
            base * (1.0 + (v_four[l] * c_four[l] / (v_tilde[l] * c_tilde[l])).sqrt()).powi(2)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((nested.predicted_cost / regular.predicted_cost, bound))
}

/// Predicted savings of one approximation, using `C̃ ≈ ĉ + c̃` and
/// `ṽ ≈ v̂`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupRow {
    pub source: String,
    /// `log₂(Ṽ/v̂)`.
    pub log2_variance_drop: f64,
    /// `ĉ/c̃`.
    pub cost_ratio: f64,
    /// `T̂/T̃`.
    pub speedup: f64,
    /// Speedup as a fraction of the cost ratio.
    pub efficiency: f64,
    /// `m̃/m̂`.
    pub paths_ratio: f64,
    /// `m̃/M̃`.
    pub nested_paths_ratio: f64,
}

/// `v_hat` is the variance the correction is compared with (the exact
/// two-way difference for GBM, the exact process for CIR) and `v_four` the
/// variance of the correction.
pub fn speedup_report(source: &str, v_hat: f64, v_four: f64, cost_ratio: f64) -> SpeedupRow {
    let g = v_four / v_hat;
    let a = (g * (1.0 + cost_ratio)).sqrt();
    let efficiency = 1.0 / (1.0 + a).powi(2);
    SpeedupRow {
        source: source.to_string(),
        log2_variance_drop: g.log2(),
        cost_ratio,
        speedup: cost_ratio * efficiency,
        efficiency,
        paths_ratio: 1.0 + a,
        nested_paths_ratio: ((1.0 + cost_ratio) / g).sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_level_plug_in() {
        let a = optimal_allocation(&[1.0], &[1.0], 2f64.sqrt()).unwrap();
        assert!((a.predicted_cost - 1.0).abs() < 1e-12);
        assert!((a.real_paths[0] - 1.0).abs() < 1e-12);
        assert_eq!(a.paths, vec![1]);
    }

    #[test]
    fn two_level_ratio() {
        let eps = 2f64.sqrt();
        let a = optimal_allocation(&[4.0, 1.0], &[1.0, 4.0], eps).unwrap();
        assert!((a.predicted_cost - 16.0).abs() < 1e-12);
        assert!((a.real_paths[0] / a.real_paths[1] - 4.0).abs() < 1e-12);
        assert!(a.variance <= eps * eps / 2.0 + 1e-15);
    }

    #[test]
    fn reference_rows() {
        // Linear: drop 2^-14, ratio 7 -> 6.70 (95.7%), 1.02, ~360.
        let r = speedup_report("linear", 1.0, 2f64.powi(-14), 7.0);
        assert!((r.speedup - 6.70).abs() < 0.01 && (r.efficiency - 0.957).abs() < 1e-3);
        assert!((r.paths_ratio - 1.02).abs() < 0.005 && (r.nested_paths_ratio - 362.0).abs() < 1.0);
        // Rademacher: drop 2^-1, ratio 9 -> 0.86 (9.5%), 3.24.
        let r = speedup_report("rademacher", 1.0, 0.5, 9.0);
        assert!((r.speedup - 0.86).abs() < 0.01 && (r.efficiency - 0.095).abs() < 1e-3);
        assert!((r.paths_ratio - 3.24).abs() < 0.01);
        // χ² linear: drop 2^-15, ratio 300 -> 249 (83.3%).
        let r = speedup_report("chi2-linear", 1.0, 2f64.powi(-15), 300.0);
        assert!((r.speedup - 249.0).abs() < 1.0 && (r.efficiency - 0.833).abs() < 1e-3);
    }

    #[test]
    fn nested_reduces_to_regular_without_corrections() {
        let v = [3.0, 1.0, 0.2];
        let c = [1.0, 2.0, 4.0];
        let a = optimal_allocation(&v, &c, 0.1).unwrap();
        let n = optimal_allocation_nested(&v, &c, &[0.0; 3], &[1.0; 3], 0.1).unwrap();
        assert!((a.predicted_cost - n.predicted_cost).abs() < 1e-9 * a.predicted_cost);
        assert_eq!(n.four_way_paths, vec![0, 0, 0]);
    }

    #[test]
    fn bad_inputs() {
        assert!(optimal_allocation(&[], &[], 1.0).is_err());
        assert!(optimal_allocation(&[1.0], &[0.0], 1.0).is_err());
        assert!(optimal_allocation(&[1.0], &[1.0], 0.0).is_err());
    }

    fn cost(m: &[f64], c: &[f64]) -> f64 {
        m.iter().zip(c).map(|(m, c)| m * c).sum()
    }

    proptest! {
        #[test]
        fn perturbation_never_helps(
            v in proptest::collection::vec(1e-6f64..10.0, 2..6),
            c_seed in proptest::collection::vec(1e-3f64..100.0, 6),
            i_seed in 0usize..6, j_seed in 0usize..6, up in proptest::bool::ANY,
        ) {
            let n = v.len();
            let c = &c_seed[..n];
            let eps = 0.05;
            let a = optimal_allocation(&v, c, eps).unwrap();
            let (i, j) = (i_seed % n, (i_seed + 1 + j_seed % (n - 1)) % n);
            let mut m = a.real_paths.clone();
            m[i] *= if up { 1.1 } else { 0.9 };
            // Restore the variance constraint through level j.
            let rest: f64 = (0..n).filter(|&k| k != j).map(|k| v[k] / m[k]).sum();
            let budget = eps * eps / 2.0 - rest;
            prop_assume!(budget > 0.0);
            m[j] = v[j] / budget;
            prop_assert!(cost(&m, c) >= a.predicted_cost * (1.0 - 1e-12));
        }

        #[test]
        fn bound_holds(
            v_hat in proptest::collection::vec(1e-4f64..1.0, 1..5),
            ratio in 1.5f64..20.0, drop in 1e-8f64..0.5,
        ) {
            let n = v_hat.len();
            let c_hat: Vec<f64> = (0..n).map(|l| 2f64.powi(l as i32) * ratio).collect();
            let c_tilde: Vec<f64> = (0..n).map(|l| 2f64.powi(l as i32)).collect();
            let v_four: Vec<f64> = v_hat.iter().map(|v| v * drop).collect();
            let c_four: Vec<f64> = c_hat.iter().zip(&c_tilde).map(|(a, b)| a + b).collect();
            let (r, bound) = speedup_bound(&v_hat, &c_hat, &v_hat, &c_tilde, &v_four, &c_four).unwrap();
            prop_assert!(r <= bound * (1.0 + 1e-12));
        }
    }
}
