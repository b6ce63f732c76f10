//! Dirichlet-Categorical action model for categorical facets (brand).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::facet::{BrandVocabulary, FacetFilter, Item};

/// Dirichlet hyper-parameters over the brand vocabulary, prior or posterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDirichlet")]
pub struct DirichletState {
    alpha: Vec<f64>,
}

#[derive(Deserialize)]
struct RawDirichlet {
    alpha: Vec<f64>,
}

impl TryFrom<RawDirichlet> for DirichletState {
    type Error = Error;

    fn try_from(raw: RawDirichlet) -> Result<Self> {
        DirichletState::new(raw.alpha)
    }
}

impl DirichletState {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::InvalidParameter("Dirichlet needs k >= 1".into()));
        }
        if let Some(a) = alpha.iter().find(|a| !(**a > 0.0) || !a.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "Dirichlet pseudo-counts must be positive and finite, got {a}"
            )));
        }
        Ok(Self { alpha })
    }

    /// Prior that puts `own_brand_mass` on the item's own brand on top of a
    /// uniform `smoothing_mass` for every brand.
    pub fn prior_for(
        item: &Item,
        vocab: &BrandVocabulary,
        own_brand_mass: f64,
        smoothing_mass: f64,
    ) -> Result<Self> {
        if !(own_brand_mass > 0.0) || !(smoothing_mass > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "own_brand_mass ({own_brand_mass}) and smoothing_mass ({smoothing_mass}) must be positive"
            )));
        }
        let k = vocab.len();
        if item.brand_index >= k {
            return Err(Error::BrandIndex {
                index: item.brand_index,
                size: k,
            });
        }
        let mut alpha = vec![smoothing_mass; k];
        alpha[item.brand_index] += own_brand_mass;
        Self::new(alpha)
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn k(&self) -> usize {
        self.alpha.len()
    }

    pub fn total(&self) -> f64 {
        self.alpha.iter().sum()
    }

    /// Posterior after observing the given brand selections.
    pub fn update(&self, observations: &[usize]) -> Result<Self> {
        let k = self.k();
        let mut alpha = self.alpha.clone();
        for &b in observations {
            if b >= k {
                return Err(Error::BrandIndex { index: b, size: k });
            }
            alpha[b] += 1.0;
        }
        Ok(Self { alpha })
    }

    /// Posterior mean of the selection probabilities. The MAP-style estimate
    /// and the posterior predictive coincide here.
    pub fn estimate(&self) -> Vec<f64> {
        let total = self.total();
        self.alpha.iter().map(|a| a / total).collect()
    }

    pub fn likelihood(&self, filter: &FacetFilter) -> Result<f64> {
        let FacetFilter::Categorical(b) = *filter else {
            return Err(Error::FilterKind { expected: "brand" });
        };
        let a = self.alpha.get(b).ok_or(Error::BrandIndex {
            index: b,
            size: self.k(),
        })?;
        Ok(a / self.total())
    }
}

pub fn categorical_prior_init(
    item: &Item,
    vocab: &BrandVocabulary,
    own_brand_mass: f64,
    smoothing_mass: f64,
) -> Result<DirichletState> {
    DirichletState::prior_for(item, vocab, own_brand_mass, smoothing_mass)
}

pub fn dirichlet_update(state: &DirichletState, observations: &[usize]) -> Result<DirichletState> {
    state.update(observations)
}

pub fn categorical_estimate(state: &DirichletState) -> Vec<f64> {
    state.estimate()
}

pub fn categorical_likelihood(state: &DirichletState, filter: &FacetFilter) -> Result<f64> {
    state.likelihood(filter)
}
