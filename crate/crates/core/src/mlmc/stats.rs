//! Streaming moments and per-level summaries.

use serde::{Deserialize, Serialize};

/// Count, mean and sum of squared deviations, updated one value at a time
/// and mergeable across batches.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    /// Combines two accumulators (pairwise update). The result depends on the
    /// merge order only through rounding, so callers merge in a fixed order.
    pub fn merge(&mut self, other: &Welford) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let w = other.n as f64 / n as f64;
        self.mean += d * w;
        self.m2 += other.m2 + d * d * self.n as f64 * w;
        self.n = n;
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; NaN below two samples.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            f64::NAN
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        }
    }

    pub fn std_error(&self) -> f64 {
        (self.variance() / self.n as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatKind {
    /// `P_l` itself.
    Plain,
    /// `P_l - P_(l-1)`, or exact minus approximate at equal resolution.
    TwoWay,
    /// `P̂ᶠ - P̂ᶜ - P̃ᶠ + P̃ᶜ`.
    FourWay,
}

/// Summary of one difference on one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    pub level: u32,
    pub kind: StatKind,
    /// `exact` or the approximation's label.
    pub source: String,
    pub n_paths: u64,
    pub mean: f64,
    pub variance: f64,
    pub std_error: f64,
    /// Wall time spent producing this term's random variables, per path.
    pub cost_seconds: f64,
    /// Random variables drawn per path.
    pub draws_per_path: f64,
    /// Set when every sample was identical (variance 0).
    pub degenerate: bool,
}

impl LevelStats {
    pub fn from_welford(
        level: u32,
        kind: StatKind,
        source: &str,
        w: &Welford,
        cost_seconds: f64,
        draws_per_path: f64,
    ) -> Self {
        let variance = w.variance();
        Self {
            level,
            kind,
            source: source.to_string(),
            n_paths: w.n(),
            mean: w.mean(),
            variance,
            std_error: w.std_error(),
            cost_seconds,
            draws_per_path,
            degenerate: variance == 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn matches_two_pass() {
        let xs: Vec<f64> = (0..1000)
            .map(|i| ((i * 37) % 101) as f64 * 0.13 - 2.0)
            .collect();
        let mut w = Welford::default();
        xs.iter().for_each(|&x| w.push(x));
        let mean = xs.iter().sum::<f64>() / 1000.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 999.0;
        assert!((w.mean() - mean).abs() < 1e-13);
        assert!((w.variance() - var).abs() < 1e-12);
    }

    #[test]
    fn constant_is_degenerate() {
        let mut w = Welford::default();
        for _ in 0..10 {
            w.push(3.0);
        }
        let s = LevelStats::from_welford(0, StatKind::FourWay, "x", &w, 0.0, 1.0);
        assert!(s.degenerate);
        assert!(Welford::default().variance().is_nan());
    }

    proptest! {
        #[test]
        fn merge_equals_sequential(xs in proptest::collection::vec(-1e3f64..1e3, 2..200), split in 0usize..200) {
            let split = split.min(xs.len());
            let mut all = Welford::default();
            xs.iter().for_each(|&x| all.push(x));
            let (mut a, mut b) = (Welford::default(), Welford::default());
            xs[..split].iter().for_each(|&x| a.push(x));
            xs[split..].iter().for_each(|&x| b.push(x));
            a.merge(&b);
            prop_assert_eq!(a.n(), all.n());
            prop_assert!((a.mean() - all.mean()).abs() <= 1e-9 * (1.0 + all.mean().abs()));
            prop_assert!((a.variance() - all.variance()).abs() <= 1e-8 * (1.0 + all.variance()));
        }
    }
}
