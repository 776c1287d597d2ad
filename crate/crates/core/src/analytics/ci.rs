//! Confidence ranges for the uniform-play null hypothesis.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, ContinuousCDF, Discrete, Normal};

use super::AnalyticsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correction {
    /// Divide alpha by the number of categories.
    #[default]
    Bonferroni,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    /// Normal approximation, `p0 ± z * sqrt(p0 (1 - p0) / n)`.
    #[default]
    Wald,
    /// Acceptance region of the two-sided exact binomial test.
    ExactBinomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformTestConfig {
    pub alpha: f64,
    /// Number of categories; the null proportion is `1/k`.
    pub k: u32,
    pub correction: Correction,
    pub method: CiMethod,
}

impl Default for UniformTestConfig {
    fn default() -> Self {
        UniformTestConfig {
            alpha: 0.05,
            k: 3,
            correction: Correction::Bonferroni,
            method: CiMethod::Wald,
        }
    }
}

impl UniformTestConfig {
    pub fn with_k(self, k: u32) -> Self {
        UniformTestConfig { k, ..self }
    }

    pub fn validate(&self) -> Result<(), AnalyticsError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(AnalyticsError::Invalid(format!("alpha must be in (0, 1), got {}", self.alpha)));
        }
        if self.k < 2 {
            return Err(AnalyticsError::Invalid(format!("need at least 2 categories, got {}", self.k)));
        }
        Ok(())
    }

    pub fn p0(&self) -> f64 {
        1.0 / self.k as f64
    }

    /// Per-comparison significance level after correction.
    pub fn level(&self) -> f64 {
        match self.correction {
            Correction::Bonferroni => self.alpha / self.k as f64,
            Correction::None => self.alpha,
        }
    }

    /// Two-sided normal quantile at [`level`](Self::level).
    pub fn z(&self) -> f64 {
        Normal::standard().inverse_cdf(1.0 - self.level() / 2.0)
    }
}

/// Inclusive range of proportions consistent with uniform play.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

impl Interval {
    /// Whether `count / n` lies inside the range. Compared without display rounding.
    pub fn contains(&self, count: u64, n: u64) -> bool {
        let p = count as f64 / n as f64;
        self.low <= p && p <= self.high
    }
}

pub fn uniform_ci(n: u64, cfg: &UniformTestConfig) -> Result<Interval, AnalyticsError> {
    cfg.validate()?;
    if n == 0 {
        return Err(AnalyticsError::Empty("confidence range needs at least one observation".into()));
    }
    let p0 = cfg.p0();
    match cfg.method {
        CiMethod::Wald => {
            let half = cfg.z() * (p0 * (1.0 - p0) / n as f64).sqrt();
            Ok(Interval {
                low: p0 - half,
                high: p0 + half,
            })
        }
        CiMethod::ExactBinomial => {
            let (lo, hi) = exact_acceptance(n, p0, cfg.level());
            Ok(Interval {
                low: lo as f64 / n as f64,
                high: hi as f64 / n as f64,
            })
        }
    }
}

/// Smallest and largest counts not rejected by the two-sided exact test at
/// `level`. The p-value of `x` sums every outcome no more likely than `x`.
fn exact_acceptance(n: u64, p: f64, level: f64) -> (u64, u64) {
    let dist = Binomial::new(p, n).expect("p in (0, 1)");
    let pmf: Vec<f64> = (0..=n).map(|x| dist.pmf(x)).collect();
    let mut sorted = pmf.clone();
    sorted.sort_by(f64::total_cmp);
    let mut prefix = Vec::with_capacity(sorted.len());
    let mut acc = 0.0;
    for v in &sorted {
        acc += v;
        prefix.push(acc);
    }
    // Relative slack so outcomes tied in likelihood count together.
    const SLACK: f64 = 1.0 + 1e-7;
    let p_value = |x: usize| {
        let cut = pmf[x] * SLACK;
        let idx = sorted.partition_point(|v| *v <= cut);
        if idx == 0 {
            0.0
        } else {
            prefix[idx - 1].min(1.0)
        }
    };
    let accepted: Vec<u64> = (0..=n as usize).filter(|&x| p_value(x) > level).map(|x| x as u64).collect();
    match (accepted.first(), accepted.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => {
            let mode = (n as f64 * p).round() as u64;
            (mode, mode)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pct1(x: f64) -> f64 {
        (x * 1000.0).round() / 10.0
    }

    #[test]
    fn default_reproduces_printed_ranges() {
        let cfg = UniformTestConfig::default();
        for (n, lo, hi) in [(200, 25.4, 41.3), (1800, 30.7, 36.0), (2000, 30.8, 35.9)] {
            let ci = uniform_ci(n, &cfg).unwrap();
            assert!((pct1(ci.low) - lo).abs() < 0.051, "n={n} low {}", ci.low);
            assert!((pct1(ci.high) - hi).abs() < 0.051, "n={n} high {}", ci.high);
        }
    }

    #[test]
    fn independent_z_oracle() {
        // Φ(2.3940) ≈ 0.991666..; check against the closed form for n = 200.
        let cfg = UniformTestConfig::default();
        assert!((cfg.z() - 2.39398).abs() < 1e-4, "{}", cfg.z());
        let ci = uniform_ci(200, &cfg).unwrap();
        let half = 2.39398 * ((2.0 / 9.0) / 200.0f64).sqrt();
        assert!((ci.high - (1.0 / 3.0 + half)).abs() < 1e-5);
    }

    /// Direct summation, O(n^2); only for small n.
    fn brute_exact(n: u64, p: f64, level: f64) -> (u64, u64) {
        let d = Binomial::new(p, n).unwrap();
        let pmf: Vec<f64> = (0..=n).map(|x| d.pmf(x)).collect();
        let ok: Vec<u64> = (0..=n)
            .filter(|&x| {
                let cut = pmf[x as usize] * (1.0 + 1e-7);
                pmf.iter().filter(|v| **v <= cut).sum::<f64>() > level
            })
            .collect();
        (ok[0], *ok.last().unwrap())
    }

    #[test]
    fn exact_matches_brute_force() {
        for n in [1, 2, 5, 17, 60, 200, 333] {
            for level in [0.05, 0.05 / 3.0, 0.2] {
                assert_eq!(exact_acceptance(n, 1.0 / 3.0, level), brute_exact(n, 1.0 / 3.0, level), "n={n} level={level}");
            }
        }
    }

    #[test]
    fn exact_is_close_to_wald_at_large_n() {
        let wald = uniform_ci(2000, &UniformTestConfig::default()).unwrap();
        let exact = uniform_ci(
            2000,
            &UniformTestConfig {
                method: CiMethod::ExactBinomial,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((wald.low - exact.low).abs() < 0.003 && (wald.high - exact.high).abs() < 0.003, "{wald:?} {exact:?}");
    }

    #[test]
    fn rejects_bad_input() {
        let cfg = UniformTestConfig::default();
        assert!(uniform_ci(0, &cfg).is_err());
        assert!(uniform_ci(10, &UniformTestConfig { alpha: 1.0, ..cfg }).is_err());
        assert!(uniform_ci(10, &cfg.with_k(1)).is_err());
    }

    proptest! {
        #[test]
        fn intervals_shrink_with_n(n1 in 1u64..5000, extra in 1u64..5000, exact in any::<bool>()) {
            let cfg = UniformTestConfig {
                method: if exact { CiMethod::ExactBinomial } else { CiMethod::Wald },
                ..Default::default()
            };
            let a = uniform_ci(n1, &cfg).unwrap();
            let b = uniform_ci(n1 + extra, &cfg).unwrap();
            if exact {
                // Lattice effects make exact ranges only weakly nested.
                prop_assert!(b.high - b.low <= a.high - a.low + 2.0 / n1 as f64);
            } else {
                prop_assert!(a.low < b.low && b.high < a.high);
            }
        }
    }
}
