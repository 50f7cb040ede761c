//! Wilcoxon signed-rank test and Bonferroni correction.
//!
//! Ranks are handled internally as doubled integers (twice the mid-rank), so
//! tied average ranks stay exact and the null distribution of the
//! positive-rank sum can be built by subset-sum counting even with ties.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default largest `n_effective` evaluated with the exact null distribution.
pub const DEFAULT_EXACT_CUTOFF: usize = 25;

/// Exact counts are held in `u64`.
pub const MAX_EXACT_CUTOFF: usize = 62;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("paired sample is empty")]
    EmptySample,
    #[error("Likert value {0} outside -2..=2")]
    OutOfRange(i32),
    #[error("number of comparisons must be at least 1")]
    NoComparisons,
    #[error("alpha must lie in (0, 1), got {0}")]
    BadAlpha(f64),
    #[error("exact cutoff {0} exceeds the supported maximum {MAX_EXACT_CUTOFF}")]
    CutoffTooLarge(usize),
}

/// Treatment of zero differences.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroMethod {
    /// Drop zeros before ranking.
    #[default]
    Wilcox,
    /// Rank zeros with the rest, then drop them.
    Pratt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    Exact,
    NormalApproximation,
    Degenerate,
}

impl fmt::Display for TestMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestMethod::Exact => "exact",
            TestMethod::NormalApproximation => "normal-approximation",
            TestMethod::Degenerate => "degenerate",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilcoxonOptions {
    pub exact_cutoff: usize,
    pub zero_method: ZeroMethod,
    /// Significance threshold applied to the p-value (strict `<`).
    pub threshold: f64,
}

impl Default for WilcoxonOptions {
    fn default() -> Self {
        WilcoxonOptions {
            exact_cutoff: DEFAULT_EXACT_CUTOFF,
            zero_method: ZeroMethod::Wilcox,
            threshold: 0.05,
        }
    }
}

impl WilcoxonOptions {
    pub fn with_cutoff(exact_cutoff: usize) -> Self {
        WilcoxonOptions {
            exact_cutoff,
            ..Self::default()
        }
    }
}

/// Likert answer pairs `(x, y)` from one respondent each.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PairedSample {
    pairs: Vec<(i32, i32)>,
}

impl PairedSample {
    pub fn new(pairs: Vec<(i32, i32)>) -> Result<Self, StatsError> {
        for &(x, y) in &pairs {
            for v in [x, y] {
                if !(-2..=2).contains(&v) {
                    return Err(StatsError::OutOfRange(v));
                }
            }
        }
        Ok(PairedSample { pairs })
    }

    pub fn push(&mut self, x: i32, y: i32) -> Result<(), StatsError> {
        for v in [x, y] {
            if !(-2..=2).contains(&v) {
                return Err(StatsError::OutOfRange(v));
            }
        }
        self.pairs.push((x, y));
        Ok(())
    }

    pub fn pairs(&self) -> &[(i32, i32)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// `y - x` for each pair.
    pub fn differences(&self) -> Vec<i64> {
        self.pairs
            .iter()
            .map(|&(x, y)| i64::from(y) - i64::from(x))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub n_effective: usize,
    /// Smaller of the positive and negative signed-rank sums.
    pub statistic: f64,
    pub p_value: f64,
    pub method: TestMethod,
    pub corrected_threshold: f64,
    pub significant: bool,
}

impl TestResult {
    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.corrected_threshold = threshold;
        self.significant = self.p_value < threshold;
        self
    }
}

/// Doubled mid-ranks of `values` (all non-negative). Tied entries share
/// `first + last` where `first`/`last` are their 1-based sorted positions.
pub(crate) fn doubled_midranks(values: &[u64]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by_key(|&i| values[i]);
    let mut ranks = vec![0u64; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && values[order[end + 1]] == values[order[start]] {
            end += 1;
        }
        let doubled = (start + 1 + end + 1) as u64;
        for &i in &order[start..=end] {
            ranks[i] = doubled;
        }
        start = end + 1;
    }
    ranks
}

/// Signed doubled ranks after applying the zero policy: `(rank, positive)`.
fn signed_ranks(differences: &[i64], zero_method: ZeroMethod) -> Vec<(u64, bool)> {
    match zero_method {
        ZeroMethod::Wilcox => {
            let nonzero: Vec<i64> = differences.iter().copied().filter(|d| *d != 0).collect();
            let abs: Vec<u64> = nonzero.iter().map(|d| d.unsigned_abs()).collect();
            doubled_midranks(&abs)
                .into_iter()
                .zip(&nonzero)
                .map(|(r, d)| (r, *d > 0))
                .collect()
        }
        ZeroMethod::Pratt => {
            let abs: Vec<u64> = differences.iter().map(|d| d.unsigned_abs()).collect();
            doubled_midranks(&abs)
                .into_iter()
                .zip(differences)
                .filter(|(_, d)| **d != 0)
                .map(|(r, d)| (r, *d > 0))
                .collect()
        }
    }
}

/// Number of sign assignments yielding each doubled positive-rank sum.
fn exact_counts(ranks: &[u64]) -> Vec<u64> {
    let total: u64 = ranks.iter().sum();
    let mut counts = vec![0u64; total as usize + 1];
    counts[0] = 1;
    let mut reach = 0usize;
    for &r in ranks {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] != 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    counts
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn normal_two_sided(z: f64) -> f64 {
    libm::erfc(z.abs() / std::f64::consts::SQRT_2)
}

/// Wilcoxon signed-rank test on raw integer differences.
///
/// Returns a degenerate result (p = 1) when no non-zero differences remain.
pub fn wilcoxon_differences(
    differences: &[i64],
    options: &WilcoxonOptions,
) -> Result<TestResult, StatsError> {
    if differences.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if options.exact_cutoff > MAX_EXACT_CUTOFF {
        return Err(StatsError::CutoffTooLarge(options.exact_cutoff));
    }
    let ranks = signed_ranks(differences, options.zero_method);
    let n = ranks.len();
    if n == 0 {
        return Ok(TestResult {
            n_effective: 0,
            statistic: 0.0,
            p_value: 1.0,
            method: TestMethod::Degenerate,
            corrected_threshold: options.threshold,
            significant: false,
        });
    }

    let total: u64 = ranks.iter().map(|(r, _)| r).sum();
    let positive: u64 = ranks.iter().filter(|(_, p)| *p).map(|(r, _)| r).sum();
    let w_doubled = positive.min(total - positive);
    let statistic = w_doubled as f64 / 2.0;

    let (p, method) = if n <= options.exact_cutoff {
        let only_ranks: Vec<u64> = ranks.iter().map(|(r, _)| *r).collect();
        let counts = exact_counts(&only_ranks);
        let tail: u64 = counts[..=w_doubled as usize].iter().sum();
        let prob = tail as f64 / 2f64.powi(n as i32);
        (2.0 * prob, TestMethod::Exact)
    } else {
        // Under H0 each rank enters the positive sum with probability 1/2, so
        // mean = sum(r)/2 and var = sum(r^2)/4; this is the tie-corrected
        // variance. Continuity correction is half the lattice spacing of the
        // statistic, which is gcd(doubled ranks)/2.
        let mean = total as f64 / 4.0;
        let var: f64 = ranks
            .iter()
            .map(|(r, _)| {
                let r = *r as f64 / 2.0;
                r * r
            })
            .sum::<f64>()
            / 4.0;
        let g = ranks.iter().fold(0u64, |acc, (r, _)| gcd(acc, *r));
        let correction = g as f64 / 4.0;
        let deviation = ((statistic - mean).abs() - correction).max(0.0);
        (
            normal_two_sided(deviation / var.sqrt()),
            TestMethod::NormalApproximation,
        )
    };
    let p_value = p.clamp(0.0, 1.0);
    Ok(TestResult {
        n_effective: n,
        statistic,
        p_value,
        method,
        corrected_threshold: options.threshold,
        significant: p_value < options.threshold,
    })
}

/// Paired test on a Likert sample; differences are `y - x`.
pub fn wilcoxon_signed_rank(
    sample: &PairedSample,
    options: &WilcoxonOptions,
) -> Result<TestResult, StatsError> {
    wilcoxon_differences(&sample.differences(), options)
}

/// Family-wise threshold `alpha / m`, unrounded.
pub fn bonferroni_threshold(alpha: f64, m: usize) -> Result<f64, StatsError> {
    if m == 0 {
        return Err(StatsError::NoComparisons);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StatsError::BadAlpha(alpha));
    }
    Ok(alpha / m as f64)
}
