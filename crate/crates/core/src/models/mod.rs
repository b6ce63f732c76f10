//! Conjugate action models and their shared hyper-parameter configuration.

mod dirichlet;
mod nig;

pub use dirichlet::{
    categorical_estimate, categorical_likelihood, categorical_prior_init, dirichlet_update,
    DirichletState,
};
pub use nig::{
    gaussian_range_likelihood, nig_map_estimate, nig_map_range_likelihood,
    nig_predictive_range_likelihood, nig_prior_init, nig_update, NigState, DEFAULT_SIGMA_MIN,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::facet::{BrandVocabulary, FacetFilter, Item};

/// How a price state is turned into a range likelihood.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    /// Plug-in Gaussian at the posterior mode.
    #[default]
    Map,
    /// Posterior-predictive Student-t.
    Predictive,
}

pub const CONFIG_VERSION: u32 = 1;

/// Every prior hyper-parameter and estimation knob, as one versioned document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub version: u32,
    pub own_brand_mass: f64,
    pub smoothing_mass: f64,
    pub kappa0: f64,
    pub alpha0: f64,
    pub beta0: f64,
    pub open_end_width: f64,
    pub sigma_min: f64,
    pub estimator: Estimator,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            own_brand_mass: 1.0,
            smoothing_mass: 0.1,
            kappa0: 1.0,
            alpha0: 1.0,
            beta0: 1.0,
            open_end_width: 100.0,
            sigma_min: DEFAULT_SIGMA_MIN,
            estimator: Estimator::Map,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::InvalidParameter(format!(
                "unsupported config version {}",
                self.version
            )));
        }
        for (name, v) in [
            ("own_brand_mass", self.own_brand_mass),
            ("smoothing_mass", self.smoothing_mass),
            ("kappa0", self.kappa0),
            ("alpha0", self.alpha0),
            ("beta0", self.beta0),
            ("open_end_width", self.open_end_width),
            ("sigma_min", self.sigma_min),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Both action models for one (query, item) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemModelState {
    pub item_id: String,
    pub dirichlet: DirichletState,
    pub nig: NigState,
}

impl ItemModelState {
    pub fn prior(item: &Item, vocab: &BrandVocabulary, config: &ModelConfig) -> Result<Self> {
        Ok(Self {
            item_id: item.id.clone(),
            dirichlet: DirichletState::prior_for(
                item,
                vocab,
                config.own_brand_mass,
                config.smoothing_mass,
            )?,
            nig: NigState::prior_for(item, config.kappa0, config.alpha0, config.beta0)?,
        })
    }

    pub fn likelihood(&self, filter: &FacetFilter, config: &ModelConfig) -> Result<f64> {
        match filter {
            FacetFilter::Categorical(_) => self.dirichlet.likelihood(filter),
            FacetFilter::Range { .. } => match config.estimator {
                Estimator::Map => self.nig.map_range_likelihood(filter, config.sigma_min),
                Estimator::Predictive => self.nig.predictive_range_likelihood(filter),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_json_shape_and_round_trip() {
        let s = ItemModelState {
            item_id: "sku-1".into(),
            dirichlet: DirichletState::new(vec![1.1, 0.1, 0.1 + 1e-13]).unwrap(),
            nig: NigState::new(599.99, 2.0, 3.0, 50.0 / 3.0).unwrap(),
        };
        let json = serde_json::to_value(&s).unwrap();
        assert_eq!(json["item_id"], "sku-1");
        assert!(json["dirichlet"]["alpha"].is_array());
        for k in ["mu", "kappa", "alpha", "beta"] {
            assert!(json["nig"][k].is_number());
        }
        let back: ItemModelState = serde_json::from_value(json).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn config_defaults_and_validation() {
        let c = ModelConfig::default();
        assert!(c.validate().is_ok());
        assert_eq!(c.own_brand_mass, 1.0);
        assert_eq!(c.smoothing_mass, 0.1);
        let parsed: ModelConfig = serde_json::from_str(r#"{"beta0": 2500}"#).unwrap();
        assert_eq!(parsed.beta0, 2500.0);
        assert_eq!(parsed.kappa0, 1.0);
        let bad = ModelConfig {
            smoothing_mass: 0.0,
            ..ModelConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
