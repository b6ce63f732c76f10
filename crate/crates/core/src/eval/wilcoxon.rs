//! Paired one-sided Wilcoxon signed-rank test on (soft, hard) rank pairs.
//!
//! Differences are `hard - soft`; zeros are dropped and tied magnitudes get
//! averaged ranks. The null distribution is exact (subset-sum counting over
//! doubled ranks, which keeps half-integer ranks integral) up to
//! [`EXACT_MAX_N`] pairs and normal with tie and continuity corrections
//! beyond that.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::std_normal_sf;

pub const EXACT_MAX_N: usize = 25;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    /// Soft ranks tend to be smaller than hard ranks.
    #[default]
    SoftLess,
    SoftGreater,
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Normal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Pairs left after dropping zero differences.
    pub n: usize,
    /// Rank sum of positive differences (hard worse than soft).
    pub w_plus: f64,
    pub w_minus: f64,
    pub p_value: f64,
    pub method: Method,
}

/// Signed ranks of the nonzero differences: (doubled averaged rank, positive?).
#[derive(Debug, Clone)]
pub struct SignedRanks {
    pub doubled: Vec<u64>,
    pub positive: Vec<bool>,
    /// Sizes of groups of tied magnitudes.
    pub tie_groups: Vec<usize>,
}

impl SignedRanks {
    pub fn from_differences(diffs: &[f64]) -> Result<Self> {
        if let Some(d) = diffs.iter().find(|d| !d.is_finite()) {
            return Err(Error::NonFinite(format!("difference {d}")));
        }
        let mut nz: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
        if nz.is_empty() {
            return Err(Error::Degenerate("all paired differences are zero".into()));
        }
        nz.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
        let n = nz.len();
        let mut doubled = vec![0u64; n];
        let mut tie_groups = Vec::new();
        let mut i = 0;
        while i < n {
            let mut j = i + 1;
            while j < n && nz[j].abs() == nz[i].abs() {
                j += 1;
            }
            // ranks i+1..=j averaged, doubled: (i+1) + j
            let d = (i + 1 + j) as u64;
            doubled[i..j].iter_mut().for_each(|r| *r = d);
            tie_groups.push(j - i);
            i = j;
        }
        let positive = nz.iter().map(|d| *d > 0.0).collect();
        Ok(Self {
            doubled,
            positive,
            tie_groups,
        })
    }

    pub fn n(&self) -> usize {
        self.doubled.len()
    }

    pub fn w_plus(&self) -> f64 {
        self.doubled_w_plus() as f64 / 2.0
    }

    fn doubled_w_plus(&self) -> u64 {
        self.doubled
            .iter()
            .zip(&self.positive)
            .filter(|(_, p)| **p)
            .map(|(r, _)| *r)
            .sum()
    }

    fn total(&self) -> f64 {
        self.doubled.iter().sum::<u64>() as f64 / 2.0
    }

    /// Number of sign assignments giving each doubled `W+`.
    pub fn null_counts(&self) -> Vec<f64> {
        let max: u64 = self.doubled.iter().sum();
        let mut counts = vec![0.0f64; max as usize + 1];
        counts[0] = 1.0;
        let mut reach = 0usize;
        for &r in &self.doubled {
            let r = r as usize;
            for s in (0..=reach).rev() {
                if counts[s] != 0.0 {
                    counts[s + r] += counts[s];
                }
            }
            reach += r;
        }
        counts
    }

    /// Exact `P(W+ >= observed)` and `P(W+ <= observed)` under the null.
    pub fn exact_tails(&self) -> (f64, f64) {
        let counts = self.null_counts();
        let obs = self.doubled_w_plus() as usize;
        let all: f64 = counts.iter().sum();
        let upper: f64 = counts[obs..].iter().sum();
        let lower: f64 = counts[..=obs].iter().sum();
        (upper / all, lower / all)
    }

    /// Normal-approximation tails with tie and continuity corrections.
    pub fn normal_tails(&self) -> (f64, f64) {
        let n = self.n() as f64;
        let mean = n * (n + 1.0) / 4.0;
        let ties: f64 = self
            .tie_groups
            .iter()
            .map(|&t| {
                let t = t as f64;
                t * t * t - t
            })
            .sum();
        let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - ties / 48.0;
        let sd = var.sqrt();
        let w = self.w_plus();
        let upper = std_normal_sf((w - mean - 0.5) / sd);
        let lower = std_normal_sf((mean - w - 0.5) / sd);
        (upper.min(1.0), lower.min(1.0))
    }
}

fn pick(tails: (f64, f64), alternative: Alternative) -> f64 {
    let (upper, lower) = tails;
    let p = match alternative {
        Alternative::SoftLess => upper,
        Alternative::SoftGreater => lower,
        Alternative::TwoSided => (2.0 * upper.min(lower)).min(1.0),
    };
    // keep p inside (0, 1] even when the normal tail underflows
    p.clamp(f64::MIN_POSITIVE, 1.0)
}

fn differences(pairs: &[(f64, f64)]) -> Vec<f64> {
    pairs.iter().map(|(soft, hard)| hard - soft).collect()
}

/// Test with the method chosen by sample size.
pub fn wilcoxon_signed_rank(
    pairs: &[(f64, f64)],
    alternative: Alternative,
) -> Result<WilcoxonResult> {
    let ranks = SignedRanks::from_differences(&differences(pairs))?;
    let method = if ranks.n() <= EXACT_MAX_N {
        Method::Exact
    } else {
        Method::Normal
    };
    Ok(finish(&ranks, alternative, method))
}

/// Test with an explicitly chosen null distribution.
pub fn wilcoxon_with_method(
    pairs: &[(f64, f64)],
    alternative: Alternative,
    method: Method,
) -> Result<WilcoxonResult> {
    let ranks = SignedRanks::from_differences(&differences(pairs))?;
    Ok(finish(&ranks, alternative, method))
}

fn finish(ranks: &SignedRanks, alternative: Alternative, method: Method) -> WilcoxonResult {
    let tails = match method {
        Method::Exact => ranks.exact_tails(),
        Method::Normal => ranks.normal_tails(),
    };
    let w_plus = ranks.w_plus();
    WilcoxonResult {
        n: ranks.n(),
        w_plus,
        w_minus: ranks.total() - w_plus,
        p_value: pick(tails, alternative),
        method,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_hard_worse_n5() {
        let pairs = [(1.0, 2.0), (1.0, 4.0), (2.0, 7.0), (3.0, 10.0), (1.0, 9.0)];
        let r = wilcoxon_signed_rank(&pairs, Alternative::SoftLess).unwrap();
        assert_eq!(r.n, 5);
        assert_eq!(r.w_minus, 0.0);
        assert_eq!(r.w_plus, 15.0);
        assert_eq!(r.method, Method::Exact);
        assert!((r.p_value - 1.0 / 32.0).abs() < 1e-15);
        let g = wilcoxon_signed_rank(&pairs, Alternative::SoftGreater).unwrap();
        assert_eq!(g.p_value, 1.0);
    }

    #[test]
    fn zero_differences_dropped() {
        let pairs = [(3.0, 3.0), (1.0, 2.0), (5.0, 5.0)];
        let r = wilcoxon_signed_rank(&pairs, Alternative::SoftLess).unwrap();
        assert_eq!(r.n, 1);
        assert_eq!(r.p_value, 0.5);
    }

    #[test]
    fn degenerate_input_rejected() {
        assert!(matches!(
            wilcoxon_signed_rank(&[(2.0, 2.0), (4.0, 4.0)], Alternative::SoftLess),
            Err(Error::Degenerate(_))
        ));
        assert!(wilcoxon_signed_rank(&[], Alternative::SoftLess).is_err());
    }

    #[test]
    fn averaged_ranks_for_ties() {
        let r = SignedRanks::from_differences(&[1.0, -1.0, 2.0, 3.0, -3.0, 3.0]).unwrap();
        // |d| sorted: 1,1,2,3,3,3 -> ranks 1.5,1.5,3,5,5,5
        assert_eq!(r.doubled, vec![3, 3, 6, 10, 10, 10]);
        assert_eq!(r.tie_groups, vec![2, 1, 3]);
        assert_eq!(r.null_counts().iter().sum::<f64>(), 64.0);
    }

    #[test]
    fn normal_tail_is_tiny_but_positive_for_huge_effects() {
        let pairs: Vec<(f64, f64)> = (0..5000).map(|i| (1.0, 2.0 + i as f64)).collect();
        let r = wilcoxon_signed_rank(&pairs, Alternative::SoftLess).unwrap();
        assert_eq!(r.method, Method::Normal);
        assert!(r.p_value > 0.0 && r.p_value < 1e-100);
    }
}
