//! Normal-Inverse-Gamma model for ordinal facets (price ranges).
//!
//! The price a user has in mind when picking a range is `N(mu, sigma^2)`
//! with `(mu, sigma^2) ~ NIG(mu0, kappa, alpha, beta)`, i.e.
//! `sigma^2 ~ InvGamma(alpha, beta)` and `mu | sigma^2 ~ N(mu0, sigma^2 / kappa)`.
//! Observations are range midpoints.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::facet::{FacetFilter, Item};
use crate::special::{phi, t_cdf};

/// Smallest standard deviation used when turning a state into a likelihood.
pub const DEFAULT_SIGMA_MIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNig")]
pub struct NigState {
    pub mu: f64,
    pub kappa: f64,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Deserialize)]
struct RawNig {
    mu: f64,
    kappa: f64,
    alpha: f64,
    beta: f64,
}

impl TryFrom<RawNig> for NigState {
    type Error = Error;

    fn try_from(r: RawNig) -> Result<Self> {
        NigState::new(r.mu, r.kappa, r.alpha, r.beta)
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

impl NigState {
    pub fn new(mu: f64, kappa: f64, alpha: f64, beta: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::NonFinite(format!("mu = {mu}")));
        }
        positive("kappa", kappa)?;
        positive("alpha", alpha)?;
        positive("beta", beta)?;
        Ok(Self {
            mu,
            kappa,
            alpha,
            beta,
        })
    }

    /// Prior centred on the item's listed price.
    pub fn prior_for(item: &Item, kappa0: f64, alpha0: f64, beta0: f64) -> Result<Self> {
        Self::new(item.price, kappa0, alpha0, beta0)
    }

    /// Conjugate update from a batch of midpoints via their sample mean and
    /// unbiased sample variance (taken as 0 below two observations).
    pub fn update(&self, midpoints: &[f64]) -> Result<Self> {
        if midpoints.is_empty() {
            return Ok(*self);
        }
        if let Some(m) = midpoints.iter().find(|m| !m.is_finite()) {
            return Err(Error::NonFinite(format!("price observation {m}")));
        }
        let n = midpoints.len() as f64;
        let mean = midpoints.iter().sum::<f64>() / n;
        let ss: f64 = midpoints.iter().map(|m| (m - mean) * (m - mean)).sum();
        // (n - 1) s^2 with the unbiased s^2 is just the centred sum of squares
        let dev = self.mu - mean;
        let kappa = self.kappa + n;
        let state = Self {
            mu: (self.kappa * self.mu + n * mean) / kappa,
            kappa,
            alpha: self.alpha + n / 2.0,
            beta: self.beta + ss / 2.0 + self.kappa * n * dev * dev / (2.0 * kappa),
        };
        Ok(state)
    }

    /// Joint posterior mode `(mu_hat, sigma_sq_hat)`.
    pub fn map_estimate(&self) -> (f64, f64) {
        (self.mu, self.beta / (self.alpha + 1.5))
    }

    /// Location, squared scale and degrees of freedom of the posterior
    /// predictive Student-t.
    pub fn predictive_params(&self) -> (f64, f64, f64) {
        let scale_sq = self.beta * (self.kappa + 1.0) / (self.alpha * self.kappa);
        (self.mu, scale_sq, 2.0 * self.alpha)
    }

    /// Range likelihood from the plug-in MAP Gaussian, with the standard
    /// deviation floored at `sigma_min`.
    pub fn map_range_likelihood(&self, filter: &FacetFilter, sigma_min: f64) -> Result<f64> {
        let (mu, var) = self.map_estimate();
        gaussian_range_likelihood(mu, var.sqrt().max(sigma_min), filter)
    }

    pub fn predictive_range_likelihood(&self, filter: &FacetFilter) -> Result<f64> {
        let FacetFilter::Range { lo, hi } = *filter else {
            return Err(Error::FilterKind { expected: "price" });
        };
        let (mu, scale_sq, dof) = self.predictive_params();
        let scale = scale_sq.sqrt();
        let p = t_cdf((hi - mu) / scale, dof) - t_cdf((lo - mu) / scale, dof);
        Ok(p.clamp(0.0, 1.0))
    }
}

/// Probability mass of `N(mu, sigma^2)` on the closed range of `filter`.
pub fn gaussian_range_likelihood(mu: f64, sigma: f64, filter: &FacetFilter) -> Result<f64> {
    let FacetFilter::Range { lo, hi } = *filter else {
        return Err(Error::FilterKind { expected: "price" });
    };
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "sigma must be positive and finite, got {sigma}"
        )));
    }
    if !mu.is_finite() {
        return Err(Error::NonFinite(format!("mu = {mu}")));
    }
    let upper = phi((hi - mu) / sigma);
    let lower = phi((lo - mu) / sigma);
    Ok((upper - lower).clamp(0.0, 1.0))
}

pub fn nig_prior_init(item: &Item, kappa0: f64, alpha0: f64, beta0: f64) -> Result<NigState> {
    NigState::prior_for(item, kappa0, alpha0, beta0)
}

pub fn nig_update(state: &NigState, midpoints: &[f64]) -> Result<NigState> {
    state.update(midpoints)
}

pub fn nig_map_estimate(state: &NigState) -> (f64, f64) {
    state.map_estimate()
}

pub fn nig_map_range_likelihood(state: &NigState, filter: &FacetFilter) -> Result<f64> {
    state.map_range_likelihood(filter, DEFAULT_SIGMA_MIN)
}

pub fn nig_predictive_range_likelihood(state: &NigState, filter: &FacetFilter) -> Result<f64> {
    state.predictive_range_likelihood(filter)
}
