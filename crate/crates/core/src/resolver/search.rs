//! Constraint-first search over the variation space.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::catalog::{Inventory, Money, ProductCatalog, Variation};
use crate::error::{Error, Result};

pub const DEFAULT_PER_PAGE: u64 = 20;
pub const MAX_PER_PAGE: u64 = 200;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchRequest {
    /// One entry per catalog dimension; `None` leaves it unconstrained.
    pub constraints: Vec<Option<u32>>,
    pub page: u64,
    pub per_page: u64,
}

impl SearchRequest {
    pub fn unconstrained(catalog: &ProductCatalog) -> Self {
        SearchRequest {
            constraints: vec![None; catalog.dimensions().len()],
            page: 1,
            per_page: DEFAULT_PER_PAGE,
        }
    }

    /// Validates raw query pairs. `page` and `per_page` are reserved; every
    /// other key must name a dimension and appear at most once.
    pub fn from_pairs<'a, I>(catalog: &ProductCatalog, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut request = SearchRequest::unconstrained(catalog);
        let mut seen_page = false;
        let mut seen_per_page = false;
        let number = |key: &str, value: &str| -> Result<u64> {
            value
                .parse::<u64>()
                .map_err(|_| Error::Validation(format!("{key} must be a positive integer, got {value:?}")))
        };
        for (key, value) in pairs {
            match key {
                "page" | "per_page" => {
                    let seen = if key == "page" {
                        &mut seen_page
                    } else {
                        &mut seen_per_page
                    };
                    if std::mem::replace(seen, true) {
                        return Err(Error::Validation(format!("duplicate parameter {key:?}")));
                    }
                    let n = number(key, value)?;
                    if key == "page" {
                        if n == 0 {
                            return Err(Error::Validation("page must be at least 1".into()));
                        }
                        request.page = n;
                    } else {
                        if !(1..=MAX_PER_PAGE).contains(&n) {
                            return Err(Error::Validation(format!(
                                "per_page must be between 1 and {MAX_PER_PAGE}, got {n}"
                            )));
                        }
                        request.per_page = n;
                    }
                }
                _ => {
                    let (di, dim) = catalog
                        .dimension(key)
                        .ok_or_else(|| Error::Validation(format!("unknown dimension {key:?}")))?;
                    let vi = dim
                        .index_of(value)
                        .ok_or_else(|| Error::Validation(format!("unknown value {value:?} for dimension {key:?}")))?;
                    if request.constraints[di].replace(vi).is_some() {
                        return Err(Error::Validation(format!("duplicate constraint on {key:?}")));
                    }
                }
            }
        }
        Ok(request)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConcreteOffer {
    pub canonical_id: String,
    pub assignments: BTreeMap<String, String>,
    pub price: Money,
    pub currency: String,
    pub available: bool,
    pub book_url: String,
}

impl ConcreteOffer {
    pub fn new(catalog: &ProductCatalog, inventory: &Inventory, v: &Variation, book_url: &str) -> Self {
        ConcreteOffer {
            canonical_id: catalog.canonical_id(v),
            assignments: catalog
                .assignments(v)
                .into_iter()
                .map(|(n, x)| (n.to_string(), x.to_string()))
                .collect(),
            price: catalog.price(v).expect("variation from the catalog"),
            currency: catalog.currency().to_string(),
            available: inventory.is_available(catalog, v),
            book_url: book_url.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchResponse {
    pub epoch: u64,
    pub offers: Vec<ConcreteOffer>,
    pub page: u64,
    pub per_page: u64,
    pub total_count: u64,
}

/// Available variations consistent with the constraints, in enumeration
/// order. Only the constrained sub-space is walked.
pub fn search(
    catalog: &ProductCatalog,
    inventory: &Inventory,
    request: &SearchRequest,
    book_url: &str,
) -> SearchResponse {
    let skip = (request.page - 1).saturating_mul(request.per_page);
    let mut total = 0u64;
    let mut offers = Vec::new();
    for v in catalog
        .enumerate_consistent(&request.constraints)
        .filter(|v| inventory.is_available(catalog, v))
    {
        if total >= skip && total - skip < request.per_page {
            offers.push(ConcreteOffer::new(catalog, inventory, &v, book_url));
        }
        total += 1;
    }
    SearchResponse {
        epoch: inventory.epoch(),
        offers,
        page: request.page,
        per_page: request.per_page,
        total_count: total,
    }
}
