//! Leave-one-session-out comparison of soft re-ranking against hard
//! filtering, with the miss-penalty rank for the hard scheme.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::facet::{Catalog, FacetFilter, Item};
use crate::loglearn::{session_observations, Observation, RejectReport, Session};
use crate::models::{ItemModelState, ModelConfig};
use crate::rerank::{
    hard_filter, prior_list, rerank, ActionModel, Mode, PriorPropensity, QueryModels, RankedList,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub query: String,
    pub session_id: String,
    pub soft_rank: usize,
    pub hard_rank: usize,
    pub filter_missed_purchase: bool,
}

/// Rank charged to hard filtering: the filtered rank when the purchase
/// survives the filter, otherwise the whole filtered list plus the
/// purchase's rank in the unfiltered list.
pub fn hard_rank_with_miss_penalty(
    filtered: &RankedList,
    unfiltered: &RankedList,
    purchased: &str,
) -> Result<usize> {
    let unfiltered_rank = unfiltered.rank_of(purchased).ok_or_else(|| {
        Error::NoData(format!(
            "purchased item {purchased:?} missing from unfiltered list"
        ))
    })?;
    Ok(match filtered.rank_of(purchased) {
        Some(r) => r,
        None => filtered.len() + unfiltered_rank,
    })
}

/// Fraction of price filters, in purchasing sessions, that exclude the
/// purchased item's price.
pub fn measure_miss_rate(sessions: &[Session], catalog: &Catalog) -> Result<f64> {
    let mut total = 0usize;
    let mut missed = 0usize;
    for s in sessions {
        let Some(item) = s.purchased_item().and_then(|id| catalog.get(id)) else {
            continue;
        };
        for spec in &s.actions {
            if let Ok(f @ FacetFilter::Range { .. }) = spec.resolve(catalog.vocab()) {
                total += 1;
                if !f.satisfied_by(item) {
                    missed += 1;
                }
            }
        }
    }
    if total == 0 {
        return Err(Error::NoData(
            "no price filters in purchasing sessions".into(),
        ));
    }
    Ok(missed as f64 / total as f64)
}

struct Fold<'a> {
    session: &'a Session,
    item_index: usize,
    filters: Vec<FacetFilter>,
    brand_obs: Vec<usize>,
    price_obs: Vec<f64>,
}

/// `base` with one item's state swapped out.
struct WithOverride<'a> {
    base: &'a QueryModels,
    index: usize,
    state: &'a ItemModelState,
}

impl ActionModel for WithOverride<'_> {
    fn likelihood(&self, index: usize, item: &Item, filter: &FacetFilter) -> Result<f64> {
        if index == self.index {
            self.state.likelihood(filter, &self.base.config)
        } else {
            self.base.likelihood(index, item, filter)
        }
    }
}

/// Leave-one-session-out evaluation for one query.
///
/// Each fold trains on every other purchasing session of the query and
/// ranks the held-out purchase under the held-out session's filters. Only
/// the held-out purchase's state differs from the all-sessions model, so
/// that state alone is recomputed per fold.
pub fn loo_evaluate(
    query: &str,
    sessions: &[Session],
    catalog: &Catalog,
    prior: &PriorPropensity,
    config: &ModelConfig,
) -> Result<Vec<EvalRecord>> {
    config.validate()?;
    let mut rejects = RejectReport::default();
    let mut folds = Vec::new();
    for s in sessions.iter().filter(|s| s.query == query) {
        let Some(item_index) = s.purchased_item().and_then(|id| catalog.index_of(id)) else {
            continue;
        };
        let mut fold = Fold {
            session: s,
            item_index,
            filters: Vec::new(),
            brand_obs: Vec::new(),
            price_obs: Vec::new(),
        };
        for spec in &s.actions {
            if let Ok(f) = spec.resolve(catalog.vocab()) {
                fold.filters.push(f);
            }
        }
        for o in session_observations(s, catalog, config.open_end_width, &mut rejects) {
            match o {
                Observation::Brand(b) => fold.brand_obs.push(b),
                Observation::Price(m) => fold.price_obs.push(m),
            }
        }
        if !fold.filters.is_empty() {
            folds.push(fold);
        }
    }
    if folds.len() < 2 {
        return Err(Error::NoData(format!(
            "query {query:?} needs at least 2 purchasing sessions with filters, found {}",
            folds.len()
        )));
    }

    let priors = QueryModels::priors(catalog, config)?;
    let mut full = priors.clone();
    let mut per_item: Vec<Vec<usize>> = vec![Vec::new(); catalog.len()];
    for (fi, f) in folds.iter().enumerate() {
        per_item[f.item_index].push(fi);
    }
    for (idx, fold_ids) in per_item.iter().enumerate() {
        if fold_ids.is_empty() {
            continue;
        }
        full.states[idx] = train_from(&priors.states[idx], fold_ids.iter().map(|&i| &folds[i]))?;
    }

    let unfiltered = prior_list(prior);
    let mut records = Vec::with_capacity(folds.len());
    for (fi, fold) in folds.iter().enumerate() {
        let idx = fold.item_index;
        let held_out_state = train_from(
            &priors.states[idx],
            per_item[idx]
                .iter()
                .filter(|&&i| i != fi)
                .map(|&i| &folds[i]),
        )?;
        let model = WithOverride {
            base: &full,
            index: idx,
            state: &held_out_state,
        };
        let purchased = &catalog.items()[idx].id;

        let mut current = prior.clone();
        let mut soft = RankedList::default();
        for f in &fold.filters {
            let (list, posterior) = rerank(&current, f, &model, catalog, Mode::Soft)?;
            soft = list;
            current = posterior;
        }
        let soft_rank = soft
            .rank_of(purchased)
            .ok_or_else(|| Error::UnknownItem(purchased.clone()))?;

        let mut filtered = hard_filter(prior, &fold.filters[0], catalog)?;
        for f in &fold.filters[1..] {
            filtered
                .entries
                .retain(|e| catalog.get(&e.item_id).is_some_and(|it| f.satisfied_by(it)));
        }
        let hard_rank = hard_rank_with_miss_penalty(&filtered, &unfiltered, purchased)?;
        records.push(EvalRecord {
            query: query.to_string(),
            session_id: fold.session.session_id.clone(),
            soft_rank,
            hard_rank,
            filter_missed_purchase: filtered.rank_of(purchased).is_none(),
        });
    }
    Ok(records)
}

fn train_from<'a>(
    prior: &ItemModelState,
    folds: impl Iterator<Item = &'a Fold<'a>>,
) -> Result<ItemModelState> {
    let mut brands = Vec::new();
    let mut prices = Vec::new();
    for f in folds {
        brands.extend_from_slice(&f.brand_obs);
        prices.extend_from_slice(&f.price_obs);
    }
    Ok(ItemModelState {
        item_id: prior.item_id.clone(),
        dirichlet: prior.dirichlet.update(&brands)?,
        nig: prior.nig.update(&prices)?,
    })
}
