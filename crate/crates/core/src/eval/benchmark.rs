//! End-to-end protocol run: scenario, synthetic log, leave-one-out ranks
//! and a signed-rank test per query.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::loo::{loo_evaluate, measure_miss_rate, EvalRecord};
use super::synthetic::{generate_synthetic_log, ScenarioConfig, SyntheticScenario};
use super::wilcoxon::{wilcoxon_signed_rank, Alternative, Method};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub query: String,
    /// Held-out sessions evaluated.
    pub n_sessions: usize,
    /// Pairs with a nonzero rank difference.
    pub n_pairs: usize,
    pub w_plus: f64,
    pub w_minus: f64,
    pub p_value: f64,
    pub method: Option<Method>,
    pub mean_soft_rank: f64,
    pub mean_hard_rank: f64,
    pub median_soft_rank: f64,
    pub median_hard_rank: f64,
    pub miss_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub seed: u64,
    pub sigma_scale: f64,
    pub analytic_miss_rate: f64,
    pub measured_miss_rate: f64,
    pub total_sessions: usize,
    pub results: Vec<QueryResult>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Summarizes one query's leave-one-out records.
pub fn summarize_query(query: &str, records: &[EvalRecord]) -> Result<QueryResult> {
    if records.is_empty() {
        return Err(Error::NoData(format!("no records for query {query:?}")));
    }
    let n = records.len() as f64;
    let soft: Vec<f64> = records.iter().map(|r| r.soft_rank as f64).collect();
    let hard: Vec<f64> = records.iter().map(|r| r.hard_rank as f64).collect();
    let pairs: Vec<(f64, f64)> = soft.iter().copied().zip(hard.iter().copied()).collect();
    let (n_pairs, w_plus, w_minus, p_value, method) =
        match wilcoxon_signed_rank(&pairs, Alternative::SoftLess) {
            Ok(t) => (t.n, t.w_plus, t.w_minus, t.p_value, Some(t.method)),
            // identical ranks everywhere: no evidence either way
            Err(Error::Degenerate(_)) => (0, 0.0, 0.0, 1.0, None),
            Err(e) => return Err(e),
        };
    Ok(QueryResult {
        query: query.to_string(),
        n_sessions: records.len(),
        n_pairs,
        w_plus,
        w_minus,
        p_value,
        method,
        mean_soft_rank: soft.iter().sum::<f64>() / n,
        mean_hard_rank: hard.iter().sum::<f64>() / n,
        median_soft_rank: median(soft),
        median_hard_rank: median(hard),
        miss_rate: records.iter().filter(|r| r.filter_missed_purchase).count() as f64 / n,
    })
}

/// Runs the full protocol. Queries are evaluated in parallel; each uses its
/// own derived random stream, so the report does not depend on scheduling.
pub fn run_benchmark(config: &ScenarioConfig, seed: u64) -> Result<BenchmarkReport> {
    let scenario = SyntheticScenario::build(config, seed)?;
    let sessions = generate_synthetic_log(&scenario, config.sessions_per_query, seed)?;
    let measured_miss_rate = measure_miss_rate(&sessions, &scenario.catalog)?;
    let per_query = config.sessions_per_query;
    let results = scenario
        .relevance
        .par_iter()
        .enumerate()
        .map(|(qi, (query, _))| {
            let slice = &sessions[qi * per_query..(qi + 1) * per_query];
            let prior = scenario.prior_for(query)?;
            let records = loo_evaluate(query, slice, &scenario.catalog, &prior, &config.model)?;
            summarize_query(query, &records)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BenchmarkReport {
        seed,
        sigma_scale: scenario.sigma_scale,
        analytic_miss_rate: scenario.analytic_miss_rate(scenario.sigma_scale),
        measured_miss_rate,
        total_sessions: sessions.len(),
        results,
    })
}

/// Pass/fail thresholds of the protocol experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcceptanceThresholds {
    pub miss_rate_target: f64,
    pub miss_rate_tolerance: f64,
    pub p_value_below: f64,
    pub min_significant_queries: usize,
    /// Mean soft rank must beat mean hard rank on every query.
    pub require_mean_soft_below_hard: bool,
}

impl Default for AcceptanceThresholds {
    fn default() -> Self {
        Self {
            miss_rate_target: 0.43,
            miss_rate_tolerance: 0.03,
            p_value_below: 1e-4,
            min_significant_queries: 18,
            require_mean_soft_below_hard: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl BenchmarkReport {
    pub fn significant_queries(&self, alpha: f64) -> usize {
        self.results.iter().filter(|r| r.p_value < alpha).count()
    }

    pub fn check(&self, t: &AcceptanceThresholds) -> Vec<CheckOutcome> {
        let miss_ok = (self.measured_miss_rate - t.miss_rate_target).abs() <= t.miss_rate_tolerance;
        let sig = self.significant_queries(t.p_value_below);
        let losing: Vec<&str> = self
            .results
            .iter()
            .filter(|r| r.mean_soft_rank >= r.mean_hard_rank)
            .map(|r| r.query.as_str())
            .collect();
        let mut out = vec![
            CheckOutcome {
                name: "miss rate".into(),
                passed: miss_ok,
                detail: format!(
                    "measured {:.4}, target {} +/- {}",
                    self.measured_miss_rate, t.miss_rate_target, t.miss_rate_tolerance
                ),
            },
            CheckOutcome {
                name: "significant queries".into(),
                passed: sig >= t.min_significant_queries,
                detail: format!(
                    "{sig}/{} queries with p < {:e} (need {})",
                    self.results.len(),
                    t.p_value_below,
                    t.min_significant_queries
                ),
            },
        ];
        if t.require_mean_soft_below_hard {
            out.push(CheckOutcome {
                name: "mean soft rank below hard".into(),
                passed: losing.is_empty(),
                detail: if losing.is_empty() {
                    format!("all {} queries", self.results.len())
                } else {
                    format!("not on: {}", losing.join(", "))
                },
            });
        }
        out
    }

    /// Largest per-query excess of mean soft rank over mean hard rank.
    pub fn worst_soft_regression(&self) -> f64 {
        self.results
            .iter()
            .map(|r| r.mean_soft_rank - r.mean_hard_rank)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for r in &self.results {
            s.push_str(&serde_json::to_string(r).expect("query result serializes"));
            s.push('\n');
        }
        s
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "seed {}  sigma/width {:.4}  miss rate {:.4} (analytic {:.4})  sessions {}",
            self.seed,
            self.sigma_scale,
            self.measured_miss_rate,
            self.analytic_miss_rate,
            self.total_sessions
        );
        let _ = writeln!(
            s,
            "{:<10} {:>6} {:>6} {:>10} {:>10} {:>8} {:>8} {:>7} {:>11}",
            "query",
            "n",
            "pairs",
            "mean soft",
            "mean hard",
            "med sft",
            "med hrd",
            "miss",
            "p-value"
        );
        for r in &self.results {
            let _ = writeln!(
                s,
                "{:<10} {:>6} {:>6} {:>10.2} {:>10.2} {:>8.1} {:>8.1} {:>7.3} {:>11.3e}",
                r.query,
                r.n_sessions,
                r.n_pairs,
                r.mean_soft_rank,
                r.mean_hard_rank,
                r.median_soft_rank,
                r.median_hard_rank,
                r.miss_rate,
                r.p_value
            );
        }
        s
    }
}
