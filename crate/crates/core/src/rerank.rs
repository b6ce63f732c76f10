//! Posterior re-ranking: `p(e | a) ∝ p(e) · p(a | e)`, applied once per
//! facet action with the posterior feeding the next action as its prior.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::facet::{Catalog, FacetFilter, Item};
use crate::models::{ItemModelState, ModelConfig};

/// Item propensities in ranking order. Position in `entries` is the prior
/// rank used for tie-breaking and for hard-filter ordering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorPropensity {
    entries: Vec<(String, f64)>,
}

impl PriorPropensity {
    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, item_id: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|(id, _)| id == item_id)
            .map(|(_, p)| *p)
    }

    pub fn position(&self, item_id: &str) -> Option<usize> {
        self.entries.iter().position(|(id, _)| id == item_id)
    }

    pub fn item_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(id, _)| id.as_str())
    }
}

/// Normalizes non-negative relevance scores into a propensity, ordered by
/// score (descending) and then item id.
pub fn normalize_prior<S: AsRef<str>>(scores: &[(S, f64)]) -> Result<PriorPropensity> {
    if scores.is_empty() {
        return Err(Error::EmptyPrior);
    }
    let mut seen = std::collections::HashSet::with_capacity(scores.len());
    for (id, s) in scores {
        if !(*s >= 0.0) || !s.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "relevance score for {:?} must be finite and non-negative, got {s}",
                id.as_ref()
            )));
        }
        if !seen.insert(id.as_ref()) {
            return Err(Error::DuplicateItem(id.as_ref().to_string()));
        }
    }
    let total: f64 = scores.iter().map(|(_, s)| s).sum();
    if total <= 0.0 {
        return Err(Error::AllZeroScores);
    }
    let mut entries: Vec<(String, f64)> = scores
        .iter()
        .map(|(id, s)| (id.as_ref().to_string(), s / total))
        .collect();
    entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(PriorPropensity { entries })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub item_id: String,
    pub score: f64,
    /// The item literally satisfies the applied filter(s).
    pub within_filter: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub entries: Vec<RankedEntry>,
}

impl RankedList {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// 1-based rank of `item_id`.
    pub fn rank_of(&self, item_id: &str) -> Option<usize> {
        self.entries
            .iter()
            .position(|e| e.item_id == item_id)
            .map(|p| p + 1)
    }

    pub fn item_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.item_id.as_str())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Soft,
    Hard,
}

/// Source of `p(a | e)`. `index` is the item's position in the catalog.
pub trait ActionModel {
    fn likelihood(&self, index: usize, item: &Item, filter: &FacetFilter) -> Result<f64>;
}

/// `p(a | e) = 1` iff `e` satisfies `a`: the hard-filter special case.
#[derive(Debug, Clone, Copy, Default)]
pub struct IndicatorModel;

impl ActionModel for IndicatorModel {
    fn likelihood(&self, _index: usize, item: &Item, filter: &FacetFilter) -> Result<f64> {
        Ok(if filter.satisfied_by(item) { 1.0 } else { 0.0 })
    }
}

/// Action-model states for one query, aligned with catalog order.
#[derive(Debug, Clone)]
pub struct QueryModels {
    pub config: ModelConfig,
    pub states: Vec<ItemModelState>,
}

impl QueryModels {
    /// Prior-initialized states for every catalog item.
    pub fn priors(catalog: &Catalog, config: &ModelConfig) -> Result<Self> {
        let states = catalog
            .items()
            .iter()
            .map(|it| ItemModelState::prior(it, catalog.vocab(), config))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            config: config.clone(),
            states,
        })
    }
}

impl ActionModel for QueryModels {
    fn likelihood(&self, index: usize, item: &Item, filter: &FacetFilter) -> Result<f64> {
        let state = self.states.get(index).ok_or_else(|| Error::MissingModel {
            item_id: item.id.clone(),
            kind: filter.kind(),
        })?;
        state.likelihood(filter, &self.config)
    }
}

impl<M: ActionModel + ?Sized> ActionModel for &M {
    fn likelihood(&self, index: usize, item: &Item, filter: &FacetFilter) -> Result<f64> {
        (**self).likelihood(index, item, filter)
    }
}

struct Resolved<'a> {
    index: usize,
    item: &'a Item,
}

fn resolve<'a>(prior: &PriorPropensity, catalog: &'a Catalog) -> Result<Vec<Resolved<'a>>> {
    prior
        .entries
        .iter()
        .map(|(id, _)| {
            let index = catalog
                .index_of(id)
                .ok_or_else(|| Error::UnknownItem(id.clone()))?;
            Ok(Resolved {
                index,
                item: &catalog.items()[index],
            })
        })
        .collect()
}

/// One Bayes step. Returns the ranked list and the normalized posterior that
/// serves as the prior for the next action.
pub fn rerank<M: ActionModel>(
    prior: &PriorPropensity,
    filter: &FacetFilter,
    model: &M,
    catalog: &Catalog,
    mode: Mode,
) -> Result<(RankedList, PriorPropensity)> {
    if prior.is_empty() {
        return Err(Error::EmptyPrior);
    }
    let resolved = resolve(prior, catalog)?;
    match mode {
        Mode::Hard => {
            let list = hard_filter_resolved(prior, filter, &resolved);
            if list.is_empty() {
                return Err(Error::Degenerate("no item satisfies the filter".into()));
            }
            let total: f64 = list.entries.iter().map(|e| e.score).sum();
            if total <= 0.0 {
                return Err(Error::Degenerate(
                    "all items satisfying the filter have zero propensity".into(),
                ));
            }
            let posterior = PriorPropensity {
                entries: list
                    .entries
                    .iter()
                    .map(|e| (e.item_id.clone(), e.score))
                    .collect(),
            };
            Ok((list, posterior))
        }
        Mode::Soft => {
            let mut weights = Vec::with_capacity(resolved.len());
            for ((_, p), r) in prior.entries.iter().zip(&resolved) {
                let lik = model.likelihood(r.index, r.item, filter)?;
                weights.push(p * lik);
            }
            let total: f64 = weights.iter().sum();
            if !(total > 0.0) || !total.is_finite() {
                return Err(Error::Degenerate(
                    "filter has zero likelihood under every item with positive propensity".into(),
                ));
            }
            let mut order: Vec<usize> = (0..weights.len()).collect();
            // stable sort: equal posteriors keep prior rank
            order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]));
            let mut entries = Vec::with_capacity(order.len());
            let mut post = Vec::with_capacity(order.len());
            for i in order {
                let id = &prior.entries[i].0;
                let score = weights[i] / total;
                entries.push(RankedEntry {
                    item_id: id.clone(),
                    score,
                    within_filter: filter.satisfied_by(resolved[i].item),
                });
                post.push((id.clone(), score));
            }
            Ok((RankedList { entries }, PriorPropensity { entries: post }))
        }
    }
}

fn hard_filter_resolved(
    prior: &PriorPropensity,
    filter: &FacetFilter,
    resolved: &[Resolved<'_>],
) -> RankedList {
    let kept: Vec<(&str, f64)> = prior
        .entries
        .iter()
        .zip(resolved)
        .filter(|(_, r)| filter.satisfied_by(r.item))
        .map(|((id, p), _)| (id.as_str(), *p))
        .collect();
    let total: f64 = kept.iter().map(|(_, p)| p).sum();
    let entries = kept
        .into_iter()
        .map(|(id, p)| RankedEntry {
            item_id: id.to_string(),
            score: if total > 0.0 { p / total } else { p },
            within_filter: true,
        })
        .collect();
    RankedList { entries }
}

/// Traditional filtering: only satisfying items, in prior order, with
/// renormalized scores. Price intervals are closed.
pub fn hard_filter(
    prior: &PriorPropensity,
    filter: &FacetFilter,
    catalog: &Catalog,
) -> Result<RankedList> {
    let resolved = resolve(prior, catalog)?;
    Ok(hard_filter_resolved(prior, filter, &resolved))
}

/// Unfiltered view of a propensity, in its stored order.
pub fn prior_list(prior: &PriorPropensity) -> RankedList {
    RankedList {
        entries: prior
            .entries
            .iter()
            .map(|(id, p)| RankedEntry {
                item_id: id.clone(),
                score: *p,
                within_filter: true,
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BrowseSession {
    pub session_id: String,
    pub query: String,
    /// Propensity before any filter; the replay origin for deselection.
    pub base_prior: PriorPropensity,
    pub current_propensity: PriorPropensity,
    pub applied_filters: Vec<(FacetFilter, Mode)>,
}

impl BrowseSession {
    pub fn new(
        session_id: impl Into<String>,
        query: impl Into<String>,
        prior: PriorPropensity,
    ) -> Self {
        Self {
            session_id: session_id.into(),
            query: query.into(),
            base_prior: prior.clone(),
            current_propensity: prior,
            applied_filters: Vec::new(),
        }
    }

    /// Current ranking; `within_filter` means the item satisfies every
    /// applied filter.
    pub fn ranked(&self, catalog: &Catalog) -> Result<RankedList> {
        let resolved = resolve(&self.current_propensity, catalog)?;
        let entries = self
            .current_propensity
            .entries
            .iter()
            .zip(&resolved)
            .map(|((id, p), r)| RankedEntry {
                item_id: id.clone(),
                score: *p,
                within_filter: self
                    .applied_filters
                    .iter()
                    .all(|(f, _)| f.satisfied_by(r.item)),
            })
            .collect();
        Ok(RankedList { entries })
    }
}

/// Folds `rerank` over `filters`, threading the posterior through.
pub fn apply_filter_sequence<M: ActionModel>(
    session: &BrowseSession,
    filters: &[FacetFilter],
    model: &M,
    catalog: &Catalog,
    mode: Mode,
) -> Result<BrowseSession> {
    let mut next = session.clone();
    for f in filters {
        let (_, posterior) = rerank(&next.current_propensity, f, model, catalog, mode)?;
        next.current_propensity = posterior;
        next.applied_filters.push((*f, mode));
    }
    Ok(next)
}

/// Recomputes the session from its base prior over the given filter history.
pub fn replay<M: ActionModel>(
    session: &BrowseSession,
    history: &[(FacetFilter, Mode)],
    model: &M,
    catalog: &Catalog,
) -> Result<BrowseSession> {
    let mut next = BrowseSession {
        current_propensity: session.base_prior.clone(),
        applied_filters: Vec::with_capacity(history.len()),
        ..session.clone()
    };
    for (f, mode) in history {
        let (_, posterior) = rerank(&next.current_propensity, f, model, catalog, *mode)?;
        next.current_propensity = posterior;
        next.applied_filters.push((*f, *mode));
    }
    Ok(next)
}

/// Deselects the most recent filter by replaying the rest from the base prior.
pub fn remove_last_filter<M: ActionModel>(
    session: &BrowseSession,
    model: &M,
    catalog: &Catalog,
) -> Result<BrowseSession> {
    let Some((_, rest)) = session.applied_filters.split_last() else {
        return Err(Error::NoData("no filter to remove".into()));
    };
    replay(session, rest, model, catalog)
}
