//! Nested multilevel Monte Carlo with approximate random variables.
//!
//! Every level draws one uniform per fine time step and feeds it to both the
//! exact quantile and each approximation, so the exact and approximate paths
//! are coupled as tightly as possible. From the four terminal values
//! `P̂ᶠ, P̂ᶜ, P̃ᶠ, P̃ᶜ` the engine accumulates the plain, two-way and four-way
//! statistics the nested estimator needs.

mod allocation;
mod cir;
mod config;
mod gbm;
mod stats;

pub use allocation::{
    default_cost_ratio, optimal_allocation, optimal_allocation_nested, speedup_bound,
    speedup_report, Allocation, NestedAllocation, SpeedupRow, CHI2_COST_RATIO,
};
pub use cir::{
    estimate_cir_level, simulate_cir_coupled, CirLevelEstimate, CirPathOutputs, CirSource,
    EULER_LABEL,
};
pub use config::{
    run_experiment, CostModel, ExperimentConfig, ExperimentReport, LevelRow, ProcessConfig,
    SourceConfig, SpeedupSummary,
};
pub use gbm::{estimate_level, simulate_gbm_coupled, GaussianSource, LevelEstimate, PathOutputs};
pub use stats::{LevelStats, StatKind, Welford};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Base number of fine steps at level 0; level `l` uses `N0 · 2^l`.
pub const DEFAULT_N0: usize = 2;
/// Paths per parallel batch. Statistics are reproducible for a fixed batch
/// size.
pub const DEFAULT_BATCH: usize = 4096;
/// Smallest pilot run accepted by the level estimators.
pub const MIN_PILOT: usize = 100;

/// Geometric Brownian motion `dX = μX dt + σX dW`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbmParams {
    pub mu: f64,
    pub sigma: f64,
    pub x0: f64,
    pub t_end: f64,
}

impl Default for GbmParams {
    fn default() -> Self {
        Self {
            mu: 0.05,
            sigma: 0.2,
            x0: 1.0,
            t_end: 1.0,
        }
    }
}

impl GbmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.x0 > 0.0 && self.t_end > 0.0 && self.mu.is_finite()) {
            return Err(Error::Config(format!(
                "GBM needs sigma > 0, x0 > 0, t_end > 0 and finite mu; got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Cox–Ingersoll–Ross process `dX = κ(θ - X) dt + σ√X dW`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CirParams {
    pub kappa: f64,
    pub theta: f64,
    pub sigma: f64,
    pub x0: f64,
    pub t_end: f64,
}

impl Default for CirParams {
    fn default() -> Self {
        Self {
            kappa: 0.5,
            theta: 1.0,
            sigma: 1.0,
            x0: 1.0,
            t_end: 1.0,
        }
    }
}

impl CirParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0
            && self.theta > 0.0
            && self.sigma > 0.0
            && self.x0 >= 0.0
            && self.t_end > 0.0)
        {
            return Err(Error::Config(format!(
                "CIR needs positive kappa, theta, sigma, t_end and x0 >= 0; got {self:?}"
            )));
        }
        Ok(())
    }

    /// `2κθ ≥ σ²`: the process stays strictly positive.
    pub fn feller_satisfied(&self) -> bool {
        2.0 * self.kappa * self.theta >= self.sigma * self.sigma
    }

    /// Degrees of freedom of the transition distribution, `4κθ/σ²`.
    pub fn nu(&self) -> f64 {
        4.0 * self.kappa * self.theta / (self.sigma * self.sigma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    EulerMaruyama,
    Milstein,
    CirExact,
    CirEulerTruncated,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::EulerMaruyama => "euler_maruyama",
            Scheme::Milstein => "milstein",
            Scheme::CirExact => "cir_exact",
            Scheme::CirEulerTruncated => "cir_euler_truncated",
        }
    }
}

/// Functional applied to the terminal value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Payoff {
    #[default]
    Identity,
    Call {
        strike: f64,
    },
}

impl Payoff {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Payoff::Identity => x,
            Payoff::Call { strike } => (x - strike).max(0.0),
        }
    }

    pub fn name(self) -> String {
        match self {
            Payoff::Identity => "identity".into(),
            Payoff::Call { strike } => format!("call(K={strike})"),
        }
    }
}

/// Discretisation of one level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelSpec {
    pub level: u32,
    pub n0: usize,
    pub scheme: Scheme,
}

impl LevelSpec {
    pub fn new(level: u32, scheme: Scheme) -> Self {
        Self {
            level,
            n0: DEFAULT_N0,
            scheme,
        }
    }

    pub fn n_steps_fine(&self) -> usize {
        self.n0 << self.level
    }

    /// Coarse steps; zero at level 0, where the coarse term is defined as 0.
    pub fn n_steps_coarse(&self) -> usize {
        if self.level == 0 {
            0
        } else {
            self.n_steps_fine() / 2
        }
    }

    pub fn dt_fine(&self, t_end: f64) -> f64 {
        t_end / self.n_steps_fine() as f64
    }

    fn validate(&self) -> Result<()> {
        if self.n0 == 0 || self.level > 24 {
            return Err(Error::Config(format!("invalid level spec {self:?}")));
        }
        Ok(())
    }
}

/// Stream id of batch `batch` on level `level`.
pub fn stream_id(level: u32, batch: u64) -> u64 {
    ((level as u64) << 32) | batch
}

/// Start and size of every batch covering `n_paths`.
fn batches(n_paths: usize, batch_size: usize) -> Vec<(u64, usize)> {
    (0..n_paths.div_ceil(batch_size))
        .map(|b| (b as u64, batch_size.min(n_paths - b * batch_size)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_geometry() {
        let s = LevelSpec::new(3, Scheme::EulerMaruyama);
        assert_eq!(s.n_steps_fine(), 16);
        assert_eq!(s.n_steps_coarse(), 8);
        assert_eq!(s.dt_fine(1.0), 1.0 / 16.0);
        assert_eq!(LevelSpec::new(0, Scheme::Milstein).n_steps_coarse(), 0);
    }

    #[test]
    fn feller_and_nu() {
        let p = CirParams::default();
        assert!(p.feller_satisfied());
        assert_eq!(p.nu(), 2.0);
        let q = CirParams { sigma: 2.0, ..p };
        assert!(!q.feller_satisfied());
    }

    #[test]
    fn batch_partition() {
        assert_eq!(batches(10, 4), vec![(0, 4), (1, 4), (2, 2)]);
        assert_eq!(stream_id(2, 5), (2 << 32) | 5);
    }

    #[test]
    fn payoffs() {
        assert_eq!(Payoff::Identity.apply(1.3), 1.3);
        assert_eq!(Payoff::Call { strike: 1.0 }.apply(0.7), 0.0);
        assert!((Payoff::Call { strike: 1.0 }.apply(1.25) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(GbmParams {
            sigma: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(CirParams {
            kappa: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
