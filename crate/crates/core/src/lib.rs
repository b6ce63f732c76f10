//! Soft faceted browsing.
//!
//! Facet selections are treated as noisy evidence about which item a user
//! wants rather than as hard constraints. Each item carries a learned action
//! model (Dirichlet-Categorical for brand, Normal-Inverse-Gamma for price
//! ranges) and the result list is re-ranked by posterior propensity
//! `p(e | a) ∝ p(e) p(a | e)`.

// `!(x > 0.0)` is how the parameter checks reject NaN along with non-positives.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod eval;
pub mod facet;
pub mod loglearn;
pub mod models;
pub mod rerank;
pub mod special;

pub use error::{Error, Result};
pub use facet::{BrandVocabulary, Catalog, FacetFilter, FilterSpec, Item, ItemRecord};
pub use models::{DirichletState, Estimator, ItemModelState, ModelConfig, NigState};
pub use rerank::{BrowseSession, Mode, PriorPropensity, RankedEntry, RankedList};
