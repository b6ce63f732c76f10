//! Catalog items, the brand vocabulary and facet filters.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Item {
    pub id: String,
    pub brand_index: usize,
    pub price: f64,
    pub title: String,
}

/// Ordered, duplicate-free list of brand names. Position is the brand index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BrandVocabulary {
    names: Vec<String>,
    lookup: HashMap<String, usize>,
}

impl BrandVocabulary {
    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(Error::InvalidParameter(
                "brand vocabulary must contain at least one brand".into(),
            ));
        }
        let mut lookup = HashMap::with_capacity(names.len());
        for (i, n) in names.iter().enumerate() {
            if lookup.insert(n.clone(), i).is_some() {
                return Err(Error::InvalidParameter(format!("duplicate brand {n:?}")));
            }
        }
        Ok(Self { names, lookup })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.lookup.get(name).copied()
    }

    pub fn name(&self, index: usize) -> Option<&str> {
        self.names.get(index).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// A user action on the facet panel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FacetFilter {
    Categorical(usize),
    /// Closed price interval; either end may be infinite for open buckets.
    Range {
        lo: f64,
        hi: f64,
    },
}

impl FacetFilter {
    pub fn range(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() {
            return Err(Error::NonFinite("range bound is NaN".into()));
        }
        if lo > hi {
            return Err(Error::InvalidParameter(format!(
                "range lower bound {lo} exceeds upper bound {hi}"
            )));
        }
        if lo == f64::INFINITY || hi == f64::NEG_INFINITY {
            return Err(Error::InvalidParameter("empty range at infinity".into()));
        }
        Ok(FacetFilter::Range { lo, hi })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            FacetFilter::Categorical(_) => "brand",
            FacetFilter::Range { .. } => "price",
        }
    }

    /// Literal (hard) filter membership. Price intervals are closed.
    pub fn satisfied_by(&self, item: &Item) -> bool {
        match *self {
            FacetFilter::Categorical(b) => item.brand_index == b,
            FacetFilter::Range { lo, hi } => lo <= item.price && item.price <= hi,
        }
    }

    pub fn to_spec(&self, vocab: &BrandVocabulary) -> Result<FilterSpec> {
        match *self {
            FacetFilter::Categorical(b) => {
                let name = vocab.name(b).ok_or(Error::BrandIndex {
                    index: b,
                    size: vocab.len(),
                })?;
                Ok(FilterSpec::Brand {
                    value: name.to_string(),
                })
            }
            FacetFilter::Range { lo, hi } => Ok(FilterSpec::Price {
                lo: lo.is_finite().then_some(lo),
                hi: hi.is_finite().then_some(hi),
            }),
        }
    }
}

/// Midpoint of a price range. An open end is replaced by the finite bound
/// shifted by `open_end_width` before averaging.
pub fn range_midpoint(filter: &FacetFilter, open_end_width: f64) -> Result<f64> {
    let FacetFilter::Range { lo, hi } = *filter else {
        return Err(Error::FilterKind { expected: "price" });
    };
    if !(open_end_width > 0.0) || !open_end_width.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "open_end_width must be positive, got {open_end_width}"
        )));
    }
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => Ok(0.5 * (lo + hi)),
        (true, false) => Ok(0.5 * (lo + (lo + open_end_width))),
        (false, true) => Ok(0.5 * ((hi - open_end_width) + hi)),
        (false, false) => Err(Error::InvalidParameter(
            "range is unbounded on both ends; no midpoint".into(),
        )),
    }
}

/// Wire form of a filter: `{"facet":"brand","value":..}` or
/// `{"facet":"price","lo":..,"hi":..}` with `null` for open ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "facet", rename_all = "lowercase")]
pub enum FilterSpec {
    Brand {
        value: String,
    },
    Price {
        #[serde(default)]
        lo: Option<f64>,
        #[serde(default)]
        hi: Option<f64>,
    },
}

impl FilterSpec {
    pub fn resolve(&self, vocab: &BrandVocabulary) -> Result<FacetFilter> {
        match self {
            FilterSpec::Brand { value } => vocab
                .index_of(value)
                .map(FacetFilter::Categorical)
                .ok_or_else(|| Error::UnknownBrand(value.clone())),
            FilterSpec::Price { lo, hi } => {
                FacetFilter::range(lo.unwrap_or(f64::NEG_INFINITY), hi.unwrap_or(f64::INFINITY))
            }
        }
    }
}

/// Catalog line: `{"id","title","brand","price"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemRecord {
    pub id: String,
    #[serde(default)]
    pub title: String,
    pub brand: String,
    pub price: f64,
}

#[derive(Debug, Clone)]
pub struct Catalog {
    vocab: BrandVocabulary,
    items: Vec<Item>,
    by_id: HashMap<String, usize>,
}

impl Catalog {
    pub fn new(vocab: BrandVocabulary, items: Vec<Item>) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            if !(item.price >= 0.0) || !item.price.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "item {:?} has invalid price {}",
                    item.id, item.price
                )));
            }
            if item.brand_index >= vocab.len() {
                return Err(Error::BrandIndex {
                    index: item.brand_index,
                    size: vocab.len(),
                });
            }
            if by_id.insert(item.id.clone(), i).is_some() {
                return Err(Error::DuplicateItem(item.id.clone()));
            }
        }
        Ok(Self {
            vocab,
            items,
            by_id,
        })
    }

    /// Builds the vocabulary from brands in order of first appearance.
    pub fn from_records(records: Vec<ItemRecord>) -> Result<Self> {
        let mut names: Vec<String> = Vec::new();
        let mut seen: HashMap<String, usize> = HashMap::new();
        let mut items = Vec::with_capacity(records.len());
        for r in records {
            let next = names.len();
            let brand_index = *seen.entry(r.brand.clone()).or_insert_with(|| {
                names.push(r.brand.clone());
                next
            });
            items.push(Item {
                id: r.id,
                brand_index,
                price: r.price,
                title: r.title,
            });
        }
        Self::new(BrandVocabulary::new(names)?, items)
    }

    pub fn records(&self) -> Vec<ItemRecord> {
        self.items
            .iter()
            .map(|it| ItemRecord {
                id: it.id.clone(),
                title: it.title.clone(),
                brand: self.vocab.names[it.brand_index].clone(),
                price: it.price,
            })
            .collect()
    }

    pub fn vocab(&self) -> &BrandVocabulary {
        &self.vocab
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&Item> {
        self.by_id.get(id).map(|&i| &self.items[i])
    }
}
