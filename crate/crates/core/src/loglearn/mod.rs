//! Learning action models from purchase-ending search sessions.
//!
//! Every filter selected in a session that ends with a purchase is an
//! observation for the purchased item under the session's query: brand
//! selections feed the item's Dirichlet state, price ranges feed its NIG
//! state through the range midpoint.

pub mod io;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::facet::{range_midpoint, Catalog, FacetFilter, FilterSpec};
use crate::models::{ItemModelState, ModelConfig};
use crate::rerank::QueryModels;

/// Purchases recorded for a session. Accepts `null`, one id or a list.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Purchased {
    #[default]
    None,
    One(String),
    Many(Vec<String>),
}

impl Purchased {
    pub fn ids(&self) -> &[String] {
        match self {
            Purchased::None => &[],
            Purchased::One(id) => std::slice::from_ref(id),
            Purchased::Many(ids) => ids,
        }
    }
}

/// One logged search episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub query: String,
    #[serde(default)]
    pub actions: Vec<FilterSpec>,
    #[serde(default, skip_serializing_if = "is_none_purchase")]
    pub purchased: Purchased,
}

fn is_none_purchase(p: &Purchased) -> bool {
    matches!(p, Purchased::None)
}

impl Session {
    pub fn new(
        session_id: impl Into<String>,
        query: impl Into<String>,
        actions: Vec<FilterSpec>,
        purchased: Option<String>,
    ) -> Self {
        Self {
            session_id: session_id.into(),
            query: query.into(),
            actions,
            purchased: purchased.map(Purchased::One).unwrap_or_default(),
        }
    }

    /// Single purchased item, if any (the first when several were bought).
    pub fn purchased_item(&self) -> Option<&str> {
        self.purchased.ids().first().map(String::as_str)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Observations {
    pub brand_obs: Vec<usize>,
    pub price_midpoints: Vec<f64>,
}

impl Observations {
    pub fn is_empty(&self) -> bool {
        self.brand_obs.is_empty() && self.price_midpoints.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectReport {
    pub unknown_items: usize,
    pub unknown_brands: usize,
    pub invalid_ranges: usize,
}

impl RejectReport {
    pub fn total(&self) -> usize {
        self.unknown_items + self.unknown_brands + self.invalid_ranges
    }
}

pub type PairKey = (String, String);

/// Observations keyed by (query, item id).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObservationSet {
    pub pairs: BTreeMap<PairKey, Observations>,
    pub rejects: RejectReport,
}

impl ObservationSet {
    pub fn get(&self, query: &str, item_id: &str) -> Option<&Observations> {
        self.pairs.get(&(query.to_string(), item_id.to_string()))
    }

    pub fn brand_count(&self) -> usize {
        self.pairs.values().map(|o| o.brand_obs.len()).sum()
    }

    pub fn price_count(&self) -> usize {
        self.pairs.values().map(|o| o.price_midpoints.len()).sum()
    }
}

/// A resolved action attributed to a purchase.
pub(crate) enum Observation {
    Brand(usize),
    Price(f64),
}

/// Resolves a session's actions against the catalog, counting rejects.
pub(crate) fn session_observations(
    session: &Session,
    catalog: &Catalog,
    open_end_width: f64,
    rejects: &mut RejectReport,
) -> Vec<Observation> {
    let mut out = Vec::with_capacity(session.actions.len());
    for spec in &session.actions {
        match spec.resolve(catalog.vocab()) {
            Ok(FacetFilter::Categorical(b)) => out.push(Observation::Brand(b)),
            Ok(f @ FacetFilter::Range { .. }) => match range_midpoint(&f, open_end_width) {
                Ok(m) => out.push(Observation::Price(m)),
                Err(_) => rejects.invalid_ranges += 1,
            },
            Err(Error::UnknownBrand(_)) => rejects.unknown_brands += 1,
            Err(_) => rejects.invalid_ranges += 1,
        }
    }
    out
}

/// Attributes every filter of each purchasing session to the purchased
/// item(s) under the session's query.
pub fn extract_observations(
    sessions: &[Session],
    catalog: &Catalog,
    open_end_width: f64,
) -> ObservationSet {
    let mut set = ObservationSet::default();
    for s in sessions {
        let purchases = s.purchased.ids();
        if purchases.is_empty() {
            continue;
        }
        let known: Vec<&String> = purchases
            .iter()
            .filter(|id| {
                let ok = catalog.get(id).is_some();
                if !ok {
                    set.rejects.unknown_items += 1;
                }
                ok
            })
            .collect();
        if known.is_empty() {
            continue;
        }
        let obs = session_observations(s, catalog, open_end_width, &mut set.rejects);
        for id in known {
            let entry = set.pairs.entry((s.query.clone(), id.clone())).or_default();
            for o in &obs {
                match *o {
                    Observation::Brand(b) => entry.brand_obs.push(b),
                    Observation::Price(m) => entry.price_midpoints.push(m),
                }
            }
        }
    }
    set
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub session_count: usize,
    /// Unix seconds; left unset by the library so training stays reproducible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trained_at: Option<u64>,
    #[serde(default)]
    pub rejects: RejectReport,
}

/// Per (query, item) action-model states. Pairs without observations are
/// not stored; they resolve to prior-initialized states on lookup.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub config: ModelConfig,
    pub brands: Vec<String>,
    pub states: BTreeMap<PairKey, ItemModelState>,
    pub metadata: TrainingMetadata,
}

fn fold_pairs(
    catalog: &Catalog,
    config: &ModelConfig,
    existing: &BTreeMap<PairKey, ItemModelState>,
    observations: &ObservationSet,
) -> Result<Vec<(PairKey, ItemModelState)>> {
    observations
        .pairs
        .par_iter()
        .map(|(key, obs)| {
            let base = match existing.get(key) {
                Some(s) => s.clone(),
                None => {
                    let item = catalog
                        .get(&key.1)
                        .ok_or_else(|| Error::UnknownItem(key.1.clone()))?;
                    ItemModelState::prior(item, catalog.vocab(), config)?
                }
            };
            let state = ItemModelState {
                item_id: base.item_id,
                dirichlet: base.dirichlet.update(&obs.brand_obs)?,
                nig: base.nig.update(&obs.price_midpoints)?,
            };
            Ok((key.clone(), state))
        })
        .collect()
}

/// Prior initialization followed by one batch update per observed pair.
pub fn train(
    catalog: &Catalog,
    sessions: &[Session],
    config: &ModelConfig,
) -> Result<TrainedModel> {
    config.validate()?;
    let observations = extract_observations(sessions, catalog, config.open_end_width);
    let states = fold_pairs(catalog, config, &BTreeMap::new(), &observations)?
        .into_iter()
        .collect();
    Ok(TrainedModel {
        config: config.clone(),
        brands: catalog.vocab().names().to_vec(),
        states,
        metadata: TrainingMetadata {
            session_count: sessions.len(),
            trained_at: None,
            rejects: observations.rejects,
        },
    })
}

/// Folds observations from `new_sessions` into an existing model.
pub fn incremental_update(
    model: &TrainedModel,
    catalog: &Catalog,
    new_sessions: &[Session],
) -> Result<TrainedModel> {
    model.check_catalog(catalog)?;
    let observations = extract_observations(new_sessions, catalog, model.config.open_end_width);
    let mut next = model.clone();
    for (key, state) in fold_pairs(catalog, &model.config, &model.states, &observations)? {
        next.states.insert(key, state);
    }
    next.metadata.session_count += new_sessions.len();
    let r = &mut next.metadata.rejects;
    r.unknown_items += observations.rejects.unknown_items;
    r.unknown_brands += observations.rejects.unknown_brands;
    r.invalid_ranges += observations.rejects.invalid_ranges;
    Ok(next)
}

impl TrainedModel {
    pub fn check_catalog(&self, catalog: &Catalog) -> Result<()> {
        if self.brands.as_slice() != catalog.vocab().names() {
            return Err(Error::InvalidParameter(
                "model brand vocabulary does not match the catalog".into(),
            ));
        }
        Ok(())
    }

    pub fn state(&self, query: &str, item_id: &str) -> Option<&ItemModelState> {
        self.states.get(&(query.to_string(), item_id.to_string()))
    }

    pub fn has_query(&self, query: &str) -> bool {
        self.states
            .range((query.to_string(), String::new())..)
            .next()
            .is_some_and(|((q, _), _)| q == query)
    }

    pub fn queries(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self.states.keys().map(|(q, _)| q.as_str()).collect();
        out.dedup();
        out
    }

    /// States for every catalog item under `query`, trained where available.
    pub fn query_models(&self, query: &str, catalog: &Catalog) -> Result<QueryModels> {
        self.check_catalog(catalog)?;
        let states = catalog
            .items()
            .iter()
            .map(|it| match self.state(query, &it.id) {
                Some(s) => Ok(s.clone()),
                None => ItemModelState::prior(it, catalog.vocab(), &self.config),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(QueryModels {
            config: self.config.clone(),
            states,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::facet::ItemRecord;
    use crate::models::NigState;

    fn catalog() -> Catalog {
        let recs = [("E", "b0", 12.0), ("F", "b1", 180.0), ("G", "b2", 250.0)]
            .iter()
            .map(|(id, b, p)| ItemRecord {
                id: id.to_string(),
                title: String::new(),
                brand: b.to_string(),
                price: *p,
            })
            .collect();
        Catalog::from_records(recs).unwrap()
    }

    fn brand(b: &str) -> FilterSpec {
        FilterSpec::Brand { value: b.into() }
    }

    fn price(lo: f64, hi: f64) -> FilterSpec {
        FilterSpec::Price {
            lo: Some(lo),
            hi: Some(hi),
        }
    }

    #[test]
    fn extraction_rule() {
        let cat = catalog();
        let s = vec![Session::new(
            "1",
            "q",
            vec![brand("b2"), price(150.0, 200.0)],
            Some("E".into()),
        )];
        let obs = extract_observations(&s, &cat, 100.0);
        let o = obs.get("q", "E").unwrap();
        assert_eq!(o.brand_obs, vec![2]);
        assert_eq!(o.price_midpoints, vec![175.0]);
        assert_eq!(obs.rejects.total(), 0);
    }

    #[test]
    fn non_purchasing_sessions_contribute_nothing() {
        let cat = catalog();
        let s = vec![Session::new("1", "q", vec![brand("b0")], None)];
        assert!(extract_observations(&s, &cat, 100.0).pairs.is_empty());
    }

    #[test]
    fn midpoints_from_two_sessions() {
        let cat = catalog();
        let s = vec![
            Session::new("1", "q", vec![price(100.0, 200.0)], Some("E".into())),
            Session::new("2", "q", vec![price(200.0, 300.0)], Some("E".into())),
        ];
        let obs = extract_observations(&s, &cat, 100.0);
        assert_eq!(
            obs.get("q", "E").unwrap().price_midpoints,
            vec![150.0, 250.0]
        );
    }

    #[test]
    fn rejects_are_counted() {
        let cat = catalog();
        let s = vec![
            Session::new("1", "q", vec![brand("nope"), brand("b1")], Some("E".into())),
            Session::new("2", "q", vec![brand("b1")], Some("ghost".into())),
            Session::new(
                "3",
                "q",
                vec![FilterSpec::Price { lo: None, hi: None }],
                Some("F".into()),
            ),
        ];
        let obs = extract_observations(&s, &cat, 100.0);
        assert_eq!(
            obs.rejects,
            RejectReport {
                unknown_items: 1,
                unknown_brands: 1,
                invalid_ranges: 1
            }
        );
        // conservation: categorical actions in purchasing sessions minus rejects
        assert_eq!(obs.brand_count(), 1);
    }

    #[test]
    fn multi_purchase_copies_attribution() {
        let cat = catalog();
        let s = Session {
            session_id: "1".into(),
            query: "q".into(),
            actions: vec![brand("b0")],
            purchased: Purchased::Many(vec!["E".into(), "F".into()]),
        };
        let obs = extract_observations(&[s], &cat, 100.0);
        assert_eq!(obs.get("q", "E").unwrap().brand_obs, vec![0]);
        assert_eq!(obs.get("q", "F").unwrap().brand_obs, vec![0]);
    }

    #[test]
    fn train_reproduces_nig_example() {
        let cat = catalog();
        let s = vec![
            Session::new("1", "q", vec![price(8.0, 12.0)], Some("E".into())),
            Session::new("2", "q", vec![price(12.0, 16.0)], Some("E".into())),
        ];
        let model = train(&cat, &s, &ModelConfig::default()).unwrap();
        assert_eq!(
            model.state("q", "E").unwrap().nig,
            NigState::new(12.0, 3.0, 2.0, 5.0).unwrap()
        );
        assert_eq!(model.metadata.session_count, 2);
        assert!(model.has_query("q"));
        assert!(!model.has_query("p"));
    }

    #[test]
    fn empty_log_gives_priors() {
        let cat = catalog();
        let config = ModelConfig::default();
        let model = train(&cat, &[], &config).unwrap();
        assert!(model.states.is_empty());
        let qm = model.query_models("anything", &cat).unwrap();
        for (it, st) in cat.items().iter().zip(&qm.states) {
            assert_eq!(
                st,
                &ItemModelState::prior(it, cat.vocab(), &config).unwrap()
            );
        }
    }

    #[test]
    fn incremental_edge_cases() {
        let cat = catalog();
        let base = vec![Session::new("1", "q", vec![brand("b1")], Some("E".into()))];
        let model = train(&cat, &base, &ModelConfig::default()).unwrap();
        assert_eq!(incremental_update(&model, &cat, &[]).unwrap(), model);

        let more = vec![Session::new("2", "q", vec![brand("b2")], Some("E".into()))];
        let next = incremental_update(&model, &cat, &more).unwrap();
        let before = model.state("q", "E").unwrap().dirichlet.alpha();
        let after = next.state("q", "E").unwrap().dirichlet.alpha();
        let changed: Vec<usize> = (0..3).filter(|&i| before[i] != after[i]).collect();
        assert_eq!(changed, vec![2]);
        assert_eq!(after[2] - before[2], 1.0);
        assert_eq!(next.metadata.session_count, 2);
    }

    #[test]
    fn batch_order_does_not_matter_for_dirichlet() {
        let cat = catalog();
        let a = vec![Session::new(
            "1",
            "q",
            vec![brand("b1"), brand("b0")],
            Some("E".into()),
        )];
        let b = vec![Session::new("2", "q", vec![brand("b2")], Some("E".into()))];
        let empty = train(&cat, &[], &ModelConfig::default()).unwrap();
        let ab =
            incremental_update(&incremental_update(&empty, &cat, &a).unwrap(), &cat, &b).unwrap();
        let ba =
            incremental_update(&incremental_update(&empty, &cat, &b).unwrap(), &cat, &a).unwrap();
        assert_eq!(
            ab.state("q", "E").unwrap().dirichlet,
            ba.state("q", "E").unwrap().dirichlet
        );
    }

    #[test]
    fn vocabulary_mismatch_rejected() {
        let cat = catalog();
        let mut model = train(&cat, &[], &ModelConfig::default()).unwrap();
        model.brands.reverse();
        assert!(model.query_models("q", &cat).is_err());
    }
}
