//! Synthetic catalogs and session logs drawn from known action models.
//!
//! Each item has a true price-selection model `N(mu_e, sigma_e^2)` with
//! `mu_e` at the listed price and a true brand-selection vector. A simulated
//! user buys an item drawn from the query's relevance distribution, draws
//! the price they have in mind and clicks the fixed-width price bucket that
//! contains it.

use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::facet::{Catalog, FilterSpec, ItemRecord};
use crate::loglearn::Session;
use crate::models::ModelConfig;
use crate::rerank::{normalize_prior, PriorPropensity};
use crate::special::phi;

/// Scenario knobs, read from the scenario JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub n_items: usize,
    pub n_brands: usize,
    pub n_queries: usize,
    pub sessions_per_query: usize,
    pub price_min: f64,
    pub price_max: f64,
    /// Width of the storefront price buckets; buckets start at multiples of it.
    pub bucket_width: f64,
    /// Relevance of the item at 0-based rank `r` is `(r + 1)^-zipf_exponent`.
    pub zipf_exponent: f64,
    /// True `sigma_e / bucket_width`; calibrated to `target_miss_rate` when absent.
    pub sigma_scale: Option<f64>,
    pub target_miss_rate: f64,
    pub price_action_prob: f64,
    pub brand_action_prob: f64,
    /// True probability of selecting the item's own brand.
    pub brand_fidelity: f64,
    /// Priors used when training on the generated log.
    pub model: ModelConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let bucket_width = 50.0;
        Self {
            n_items: 200,
            n_brands: 8,
            n_queries: 20,
            sessions_per_query: 700,
            price_min: 5.0,
            price_max: 1000.0,
            bucket_width,
            zipf_exponent: 1.0,
            sigma_scale: None,
            target_miss_rate: 0.43,
            price_action_prob: 1.0,
            brand_action_prob: 0.0,
            brand_fidelity: 0.7,
            // prior MAP sigma equal to one bucket width
            model: ModelConfig {
                beta0: 2.5 * bucket_width * bucket_width,
                ..ModelConfig::default()
            },
        }
    }
}

impl ScenarioConfig {
    /// Purchases concentrated at the top of the list and price filters that
    /// always cover the purchase.
    pub fn top_concentrated() -> Self {
        Self {
            zipf_exponent: 2.0,
            sigma_scale: Some(1e-9),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n_items == 0 || self.n_brands == 0 || self.n_queries == 0 {
            return bad("n_items, n_brands and n_queries must be at least 1".into());
        }
        if !(self.price_min >= 0.0
            && self.price_max >= self.price_min
            && self.price_max.is_finite())
        {
            return bad(format!(
                "price range [{}, {}] is invalid",
                self.price_min, self.price_max
            ));
        }
        if !(self.bucket_width > 0.0) || !self.bucket_width.is_finite() {
            return bad(format!(
                "bucket_width must be positive, got {}",
                self.bucket_width
            ));
        }
        if !(self.zipf_exponent >= 0.0) || !self.zipf_exponent.is_finite() {
            return bad(format!(
                "zipf_exponent must be non-negative, got {}",
                self.zipf_exponent
            ));
        }
        if let Some(s) = self.sigma_scale {
            if !(s > 0.0) || !s.is_finite() {
                return bad(format!("sigma_scale must be positive, got {s}"));
            }
        }
        if !(self.target_miss_rate > 0.0 && self.target_miss_rate < 1.0) {
            return bad(format!(
                "target_miss_rate must be in (0, 1), got {}",
                self.target_miss_rate
            ));
        }
        for (name, p) in [
            ("price_action_prob", self.price_action_prob),
            ("brand_action_prob", self.brand_action_prob),
            ("brand_fidelity", self.brand_fidelity),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must be a probability, got {p}"));
            }
        }
        if self.price_action_prob == 0.0 && self.brand_action_prob == 0.0 {
            return bad("at least one action kind must have positive probability".into());
        }
        self.model.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ItemTruth {
    pub mu: f64,
    pub sigma: f64,
    pub brand_probs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SyntheticScenario {
    pub config: ScenarioConfig,
    pub catalog: Catalog,
    /// Per query: relevance scores in descending order.
    pub relevance: Vec<(String, Vec<(String, f64)>)>,
    /// Aligned with catalog order.
    pub truth: Vec<ItemTruth>,
    pub sigma_scale: f64,
}

/// Independent stream seed for a (seed, stream) pair (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const CATALOG_STREAM: u64 = 0;
const RELEVANCE_STREAM: u64 = 1_000;
const SESSION_STREAM: u64 = 1_000_000;

pub fn bucket_of(price: f64, width: f64) -> (f64, f64) {
    let lo = (price / width).floor() * width;
    (lo, lo + width)
}

impl SyntheticScenario {
    pub fn build(config: &ScenarioConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, CATALOG_STREAM));
        let brands: Vec<String> = (0..config.n_brands)
            .map(|b| format!("brand-{b:02}"))
            .collect();
        let records: Vec<ItemRecord> = (0..config.n_items)
            .map(|i| {
                let raw = rng.random_range(config.price_min..=config.price_max);
                let brand = rng.random_range(0..config.n_brands);
                ItemRecord {
                    id: format!("item-{i:04}"),
                    title: format!("{} product {i}", brands[brand]),
                    brand: brands[brand].clone(),
                    price: (raw * 100.0).round() / 100.0,
                }
            })
            .collect();
        let catalog = Catalog::from_records(records)?;

        let relevance = (0..config.n_queries)
            .map(|q| {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(derive_seed(seed, RELEVANCE_STREAM + q as u64));
                let mut order: Vec<usize> = (0..config.n_items).collect();
                order.shuffle(&mut rng);
                let scores = order
                    .iter()
                    .enumerate()
                    .map(|(r, &i)| {
                        let score = ((r + 1) as f64).powf(-config.zipf_exponent);
                        (catalog.items()[i].id.clone(), score)
                    })
                    .collect();
                (format!("query-{q:02}"), scores)
            })
            .collect();

        let mut scenario = Self {
            config: config.clone(),
            catalog,
            relevance,
            truth: Vec::new(),
            sigma_scale: 0.0,
        };
        let sigma_scale = match config.sigma_scale {
            Some(s) => s,
            None => scenario.calibrate_sigma_scale(config.target_miss_rate)?,
        };
        scenario.set_sigma_scale(sigma_scale);
        Ok(scenario)
    }

    fn set_sigma_scale(&mut self, sigma_scale: f64) {
        let k = self.catalog.vocab().len();
        let fid = self.config.brand_fidelity;
        let sigma = sigma_scale * self.config.bucket_width;
        self.sigma_scale = sigma_scale;
        self.truth = self
            .catalog
            .items()
            .iter()
            .map(|it| {
                let brand_probs = if k == 1 {
                    vec![1.0]
                } else {
                    (0..k)
                        .map(|b| {
                            if b == it.brand_index {
                                fid
                            } else {
                                (1.0 - fid) / (k - 1) as f64
                            }
                        })
                        .collect()
                };
                ItemTruth {
                    mu: it.price,
                    sigma,
                    brand_probs,
                }
            })
            .collect();
    }

    pub fn queries(&self) -> impl Iterator<Item = &str> {
        self.relevance.iter().map(|(q, _)| q.as_str())
    }

    pub fn relevance_for(&self, query: &str) -> Option<&[(String, f64)]> {
        self.relevance
            .iter()
            .find(|(q, _)| q == query)
            .map(|(_, s)| s.as_slice())
    }

    pub fn prior_for(&self, query: &str) -> Result<PriorPropensity> {
        let scores = self
            .relevance_for(query)
            .ok_or_else(|| Error::NoData(format!("unknown query {query:?}")))?;
        normalize_prior(scores)
    }

    /// Purchase probability of each catalog item, averaged over queries.
    fn purchase_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.catalog.len()];
        for (_, scores) in &self.relevance {
            let total: f64 = scores.iter().map(|(_, s)| s).sum();
            for (id, s) in scores {
                let i = self
                    .catalog
                    .index_of(id)
                    .expect("relevance ids come from the catalog");
                w[i] += s / total / self.relevance.len() as f64;
            }
        }
        w
    }

    /// Expected share of price filters that miss the purchase when the true
    /// standard deviation is `sigma_scale * bucket_width`.
    pub fn analytic_miss_rate(&self, sigma_scale: f64) -> f64 {
        let width = self.config.bucket_width;
        let sigma = sigma_scale * width;
        self.purchase_weights()
            .iter()
            .zip(self.catalog.items())
            .map(|(w, it)| {
                let (lo, hi) = bucket_of(it.price, width);
                // draws below zero are clamped into the first bucket
                let lower = if lo <= 0.0 {
                    0.0
                } else {
                    phi((lo - it.price) / sigma)
                };
                let mut hit = phi((hi - it.price) / sigma) - lower;
                if it.price == lo && lo > 0.0 {
                    // a price on a bucket edge is also covered by the bucket below
                    let below = if lo - width <= 0.0 {
                        0.0
                    } else {
                        phi(-width / sigma)
                    };
                    hit += 0.5 - below;
                }
                w * (1.0 - hit.min(1.0))
            })
            .sum()
    }

    /// Bisection for the `sigma_scale` whose analytic miss rate hits `target`.
    pub fn calibrate_sigma_scale(&self, target: f64) -> Result<f64> {
        let (mut lo, mut hi) = (1e-9, 1e3);
        if self.analytic_miss_rate(lo) > target || self.analytic_miss_rate(hi) < target {
            return Err(Error::InvalidParameter(format!(
                "miss rate {target} is not reachable for this catalog"
            )));
        }
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            if self.analytic_miss_rate(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi / lo - 1.0 < 1e-12 {
                break;
            }
        }
        Ok((lo * hi).sqrt())
    }

    /// Sessions for one query, from the query's own random stream.
    pub fn generate_query_log(
        &self,
        query_index: usize,
        n_sessions: usize,
        seed: u64,
    ) -> Result<Vec<Session>> {
        let (query, scores) = self
            .relevance
            .get(query_index)
            .ok_or_else(|| Error::NoData(format!("query index {query_index} out of range")))?;
        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_seed(seed, SESSION_STREAM + query_index as u64));
        let picker = WeightedIndex::new(scores.iter().map(|(_, s)| *s))
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let width = self.config.bucket_width;
        let vocab = self.catalog.vocab();
        let mut out = Vec::with_capacity(n_sessions);
        for n in 0..n_sessions {
            let id = &scores[picker.sample(&mut rng)].0;
            let index = self
                .catalog
                .index_of(id)
                .expect("relevance ids come from the catalog");
            let truth = &self.truth[index];
            let mut actions = Vec::new();
            let want_price = rng.random_bool(self.config.price_action_prob);
            if rng.random_bool(self.config.brand_action_prob) {
                let b = WeightedIndex::new(&truth.brand_probs)
                    .map_err(|e| Error::InvalidParameter(e.to_string()))?
                    .sample(&mut rng);
                actions.push(FilterSpec::Brand {
                    value: vocab.name(b).expect("brand index in range").to_string(),
                });
            }
            if want_price || actions.is_empty() {
                let normal = Normal::new(truth.mu, truth.sigma)
                    .map_err(|e| Error::InvalidParameter(e.to_string()))?;
                let x: f64 = normal.sample(&mut rng).max(0.0);
                let (lo, hi) = bucket_of(x, width);
                actions.push(FilterSpec::Price {
                    lo: Some(lo),
                    hi: Some(hi),
                });
            }
            out.push(Session::new(
                format!("{query}#{n:05}"),
                query.clone(),
                actions,
                Some(id.clone()),
            ));
        }
        Ok(out)
    }
}

/// `n_sessions` sessions for every query of the scenario, query by query.
pub fn generate_synthetic_log(
    scenario: &SyntheticScenario,
    n_sessions: usize,
    seed: u64,
) -> Result<Vec<Session>> {
    if n_sessions == 0 {
        return Err(Error::InvalidParameter(
            "n_sessions must be at least 1".into(),
        ));
    }
    let mut all = Vec::with_capacity(n_sessions * scenario.relevance.len());
    for q in 0..scenario.relevance.len() {
        all.extend(scenario.generate_query_log(q, n_sessions, seed)?);
    }
    Ok(all)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::loo::measure_miss_rate;

    fn small() -> ScenarioConfig {
        ScenarioConfig {
            n_items: 40,
            n_queries: 3,
            sessions_per_query: 50,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let sc = SyntheticScenario::build(&small(), 7).unwrap();
        let a = generate_synthetic_log(&sc, 50, 7).unwrap();
        let b =
            generate_synthetic_log(&SyntheticScenario::build(&small(), 7).unwrap(), 50, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 150);
        let c = generate_synthetic_log(&sc, 50, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn tiny_sigma_always_covers() {
        let config = ScenarioConfig {
            sigma_scale: Some(1e-9),
            ..small()
        };
        let sc = SyntheticScenario::build(&config, 3).unwrap();
        let log = generate_synthetic_log(&sc, 200, 3).unwrap();
        assert_eq!(measure_miss_rate(&log, &sc.catalog).unwrap(), 0.0);
    }

    #[test]
    fn calibration_hits_target_analytically() {
        let sc = SyntheticScenario::build(&small(), 11).unwrap();
        assert!((sc.analytic_miss_rate(sc.sigma_scale) - 0.43).abs() < 1e-9);
        assert!(sc.sigma_scale > 0.3 && sc.sigma_scale < 1.0);
    }

    #[test]
    fn buckets_align_to_width() {
        assert_eq!(bucket_of(0.0, 50.0), (0.0, 50.0));
        assert_eq!(bucket_of(149.99, 50.0), (100.0, 150.0));
        assert_eq!(bucket_of(150.0, 50.0), (150.0, 200.0));
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad = ScenarioConfig {
            bucket_width: 0.0,
            ..small()
        };
        assert!(SyntheticScenario::build(&bad, 1).is_err());
        let bad = ScenarioConfig {
            price_action_prob: 0.0,
            brand_action_prob: 0.0,
            ..small()
        };
        assert!(bad.validate().is_err());
        let sc = SyntheticScenario::build(&small(), 1).unwrap();
        assert!(generate_synthetic_log(&sc, 0, 1).is_err());
    }

    #[test]
    fn brand_actions_follow_truth() {
        let config = ScenarioConfig {
            brand_action_prob: 1.0,
            price_action_prob: 0.0,
            brand_fidelity: 1.0,
            ..small()
        };
        let sc = SyntheticScenario::build(&config, 5).unwrap();
        for s in generate_synthetic_log(&sc, 30, 5).unwrap() {
            let item = sc.catalog.get(s.purchased_item().unwrap()).unwrap();
            assert_eq!(s.actions.len(), 1);
            let FilterSpec::Brand { value } = &s.actions[0] else {
                panic!("expected brand")
            };
            assert_eq!(sc.catalog.vocab().index_of(value), Some(item.brand_index));
        }
    }
}
