//! The multi-dimensional product model.
//!
//! A [`ProductCatalog`] is the ground truth every publication heuristic
//! materializes from: product metadata, an ordered list of dimensions whose
//! Cartesian product is the variation space, an additive pricing model and the
//! seed for the simulated inventory.

mod inventory;
mod pricing;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use chrono::{Days, NaiveDate};
use percent_encoding::{percent_decode_str, utf8_percent_encode, AsciiSet, CONTROLS};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use inventory::{availability_score, BookingOutcome, Inventory};
pub use pricing::{Money, PricingModel};

/// Characters escaped inside canonical-id values.
const ID_VALUE: &AsciiSet = &CONTROLS.add(b'%').add(b'|').add(b'=');

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DimensionKind {
    Categorical,
    Temporal,
    Ordinal,
}

/// Summary of a dimension's value domain, as published for non-fixed dimensions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RangeSummary {
    /// Categorical dimensions list every value.
    Values(Vec<String>),
    /// Ordinal and temporal dimensions are summarized by their bounds.
    Span { min: String, max: String, count: usize },
}

impl RangeSummary {
    pub fn count(&self) -> usize {
        match self {
            RangeSummary::Values(v) => v.len(),
            RangeSummary::Span { count, .. } => *count,
        }
    }

    /// A single-valued dimension is reported but not actually abstracted.
    pub fn is_abstracted(&self) -> bool {
        self.count() > 1
    }
}

#[derive(Clone, Debug)]
pub struct DimensionDef {
    name: String,
    kind: DimensionKind,
    label: String,
    values: Vec<String>,
    index: HashMap<String, u32>,
    summary: RangeSummary,
}

impl DimensionDef {
    pub fn new(
        name: impl Into<String>,
        kind: DimensionKind,
        label: impl Into<String>,
        values: Vec<String>,
    ) -> Result<Self> {
        let name = name.into();
        if name.is_empty() || !name.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_') {
            return Err(Error::InvalidCatalog(format!(
                "dimension name {name:?} must be non-empty and use only [A-Za-z0-9_]"
            )));
        }
        if values.is_empty() {
            return Err(Error::InvalidCatalog(format!("dimension {name} has no values")));
        }
        if values.len() > u32::MAX as usize {
            return Err(Error::InvalidCatalog(format!("dimension {name} is too long")));
        }
        let mut index = HashMap::with_capacity(values.len());
        for (i, v) in values.iter().enumerate() {
            if index.insert(v.clone(), i as u32).is_some() {
                return Err(Error::InvalidCatalog(format!(
                    "dimension {name} lists value {v:?} twice"
                )));
            }
        }
        let summary = match kind {
            DimensionKind::Categorical => RangeSummary::Values(values.clone()),
            DimensionKind::Ordinal => {
                let mut parsed = Vec::with_capacity(values.len());
                for v in &values {
                    let n: i64 = v.parse().map_err(|_| {
                        Error::InvalidCatalog(format!("ordinal value {v:?} of {name} is not an integer"))
                    })?;
                    if n.to_string() != *v {
                        return Err(Error::InvalidCatalog(format!(
                            "ordinal value {v:?} of {name} is not in canonical integer form"
                        )));
                    }
                    parsed.push(n);
                }
                let min = parsed.iter().min().expect("non-empty");
                let max = parsed.iter().max().expect("non-empty");
                RangeSummary::Span {
                    min: min.to_string(),
                    max: max.to_string(),
                    count: values.len(),
                }
            }
            DimensionKind::Temporal => {
                for v in &values {
                    parse_date(v).map_err(|_| {
                        Error::InvalidCatalog(format!("temporal value {v:?} of {name} is not an ISO-8601 date"))
                    })?;
                }
                // YYYY-MM-DD sorts chronologically as text.
                let min = values.iter().min().expect("non-empty").clone();
                let max = values.iter().max().expect("non-empty").clone();
                RangeSummary::Span {
                    min,
                    max,
                    count: values.len(),
                }
            }
        };
        Ok(DimensionDef {
            label: label.into(),
            name,
            kind,
            values,
            index,
            summary,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> DimensionKind {
        self.kind
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn values(&self) -> &[String] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_abstractable(&self) -> bool {
        self.values.len() > 1
    }

    pub fn index_of(&self, value: &str) -> Option<u32> {
        self.index.get(value).copied()
    }

    pub fn summary(&self) -> &RangeSummary {
        &self.summary
    }
}

fn parse_date(s: &str) -> std::result::Result<NaiveDate, chrono::ParseError> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
}

/// Static product metadata shared by every variation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductInfo {
    pub name: String,
    pub description: String,
    #[serde(rename = "image")]
    pub image_url: String,
    pub area_served: String,
}

/// One value assignment per dimension, stored as value indices in declared
/// dimension order. The derived ordering is the enumeration order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Variation {
    indices: Vec<u32>,
}

impl Variation {
    pub fn from_indices(indices: Vec<u32>) -> Self {
        Variation { indices }
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum CanonicalIdError {
    #[error("malformed canonical id: {0}")]
    Malformed(String),
    #[error("canonical id is not in the variation space: {0}")]
    NotInSpace(String),
}

#[derive(Clone, Debug)]
pub struct ProductCatalog {
    product: ProductInfo,
    dimensions: Vec<DimensionDef>,
    pricing: PricingModel,
    inventory_seed: u64,
    base_availability_rate: f64,
    // deltas[d][i]: price modifier for value i of dimension d
    deltas: Vec<Vec<Money>>,
    delta_bounds: Vec<(Money, Money)>,
    by_name: HashMap<String, usize>,
    count: u64,
}

impl ProductCatalog {
    pub fn new(
        product: ProductInfo,
        dimensions: Vec<DimensionDef>,
        pricing: PricingModel,
        inventory_seed: u64,
        base_availability_rate: f64,
    ) -> Result<Self> {
        if dimensions.is_empty() {
            return Err(Error::InvalidCatalog("a catalog needs at least one dimension".into()));
        }
        if !(0.0..=1.0).contains(&base_availability_rate) {
            return Err(Error::InvalidCatalog(format!(
                "availability rate {base_availability_rate} is outside [0, 1]"
            )));
        }
        pricing.validate_currency()?;

        let mut by_name = HashMap::new();
        for (i, d) in dimensions.iter().enumerate() {
            if by_name.insert(d.name.clone(), i).is_some() {
                return Err(Error::InvalidCatalog(format!("duplicate dimension {}", d.name)));
            }
        }

        let mut count: u64 = 1;
        for d in &dimensions {
            count = count
                .checked_mul(d.len() as u64)
                .ok_or_else(|| Error::InvalidCatalog("variation count does not fit in 64 bits".into()))?;
        }

        let mut deltas: Vec<Vec<Money>> = dimensions.iter().map(|d| vec![Money::ZERO; d.len()]).collect();
        for ((dim, value), delta) in &pricing.modifiers {
            let di = *by_name
                .get(dim)
                .ok_or_else(|| Error::InvalidCatalog(format!("price modifier names unknown dimension {dim}")))?;
            let vi = dimensions[di].index_of(value).ok_or_else(|| {
                Error::InvalidCatalog(format!("price modifier names unknown value {value:?} of {dim}"))
            })?;
            deltas[di][vi as usize] = *delta;
        }
        let delta_bounds: Vec<(Money, Money)> = deltas
            .iter()
            .map(|row| {
                let min = *row.iter().min().expect("non-empty");
                let max = *row.iter().max().expect("non-empty");
                (min, max)
            })
            .collect();

        let cheapest = pricing.base_price + delta_bounds.iter().map(|b| b.0).sum::<Money>();
        if !cheapest.is_positive() {
            return Err(Error::InvalidCatalog(format!(
                "pricing yields a non-positive price ({cheapest}) for some variation"
            )));
        }

        Ok(ProductCatalog {
            product,
            dimensions,
            pricing,
            inventory_seed,
            base_availability_rate,
            deltas,
            delta_bounds,
            by_name,
            count,
        })
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: CatalogFile =
            serde_json::from_str(text).map_err(|e| Error::InvalidCatalog(format!("catalog JSON: {e}")))?;
        file.into_catalog()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    /// The catalog in its on-disk JSON form, with every value list expanded.
    pub fn to_json_value(&self) -> serde_json::Value {
        let file = CatalogFile {
            product: self.product.clone(),
            dimensions: self
                .dimensions
                .iter()
                .map(|d| DimensionFile {
                    name: d.name.clone(),
                    kind: d.kind,
                    label: Some(d.label.clone()),
                    values: ValuesFile::List(d.values.iter().cloned().map(Literal::Text).collect()),
                })
                .collect(),
            pricing: PricingFile {
                base: self.pricing.base_price,
                currency: self.pricing.currency.clone(),
                modifiers: self
                    .pricing
                    .modifiers
                    .iter()
                    .map(|((dimension, value), delta)| ModifierFile {
                        dimension: dimension.clone(),
                        value: Literal::Text(value.clone()),
                        delta: *delta,
                    })
                    .collect(),
            },
            inventory: InventoryFile {
                seed: self.inventory_seed,
                availability_rate: self.base_availability_rate,
            },
        };
        serde_json::to_value(file).expect("catalog file serializes")
    }

    pub fn product(&self) -> &ProductInfo {
        &self.product
    }

    pub fn dimensions(&self) -> &[DimensionDef] {
        &self.dimensions
    }

    pub fn dimension(&self, name: &str) -> Option<(usize, &DimensionDef)> {
        self.by_name.get(name).map(|&i| (i, &self.dimensions[i]))
    }

    pub fn pricing(&self) -> &PricingModel {
        &self.pricing
    }

    pub fn currency(&self) -> &str {
        &self.pricing.currency
    }

    pub fn inventory_seed(&self) -> u64 {
        self.inventory_seed
    }

    pub fn availability_rate(&self) -> f64 {
        self.base_availability_rate
    }

    /// Product of the dimension lengths; no enumeration.
    pub fn count_variations(&self) -> u64 {
        self.count
    }

    /// Every variation in lexicographic order of value indices.
    pub fn enumerate_variations(&self, limit: Option<u64>) -> VariationIter {
        VariationIter::new(self.radices(), vec![None; self.dimensions.len()], limit)
    }

    /// Variations agreeing with every `Some` entry of `fixed`, in enumeration order.
    /// Only the free dimensions are iterated.
    pub fn enumerate_consistent(&self, fixed: &[Option<u32>]) -> VariationIter {
        assert_eq!(fixed.len(), self.dimensions.len(), "fixed set arity");
        VariationIter::new(self.radices(), fixed.to_vec(), None)
    }

    /// Up to `limit` variations starting at enumeration position `start`.
    pub fn enumerate_range(&self, start: u64, limit: Option<u64>) -> VariationIter {
        let mut it = VariationIter::new(self.radices(), vec![None; self.dimensions.len()], limit);
        it.next = self.variation_at(start).map(|v| v.indices);
        it
    }

    /// Number of variations consistent with a fixed set.
    pub fn count_consistent(&self, fixed: &[Option<u32>]) -> u64 {
        self.dimensions
            .iter()
            .zip(fixed)
            .map(|(d, f)| if f.is_some() { 1 } else { d.len() as u64 })
            .product()
    }

    fn radices(&self) -> Vec<u32> {
        self.dimensions.iter().map(|d| d.len() as u32).collect()
    }

    fn check(&self, v: &Variation) -> Result<()> {
        if v.indices.len() != self.dimensions.len() {
            return Err(Error::Validation(format!(
                "variation assigns {} dimensions, catalog has {}",
                v.indices.len(),
                self.dimensions.len()
            )));
        }
        for (d, &i) in self.dimensions.iter().zip(&v.indices) {
            if i as usize >= d.len() {
                return Err(Error::Validation(format!(
                    "value index {i} out of range for dimension {}",
                    d.name
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, v: &Variation) -> bool {
        self.check(v).is_ok()
    }

    /// Position of a variation in the enumeration order.
    pub fn rank(&self, v: &Variation) -> u64 {
        self.dimensions
            .iter()
            .zip(&v.indices)
            .fold(0u64, |acc, (d, &i)| acc * d.len() as u64 + i as u64)
    }

    pub fn variation_at(&self, mut rank: u64) -> Option<Variation> {
        if rank >= self.count {
            return None;
        }
        let mut indices = vec![0u32; self.dimensions.len()];
        for (slot, d) in indices.iter_mut().zip(&self.dimensions).rev() {
            let len = d.len() as u64;
            *slot = (rank % len) as u32;
            rank /= len;
        }
        Some(Variation { indices })
    }

    pub fn value(&self, dim: usize, index: u32) -> &str {
        &self.dimensions[dim].values[index as usize]
    }

    pub fn assignments<'a>(&'a self, v: &Variation) -> Vec<(&'a str, &'a str)> {
        self.dimensions
            .iter()
            .zip(&v.indices)
            .map(|(d, &i)| (d.name.as_str(), d.values[i as usize].as_str()))
            .collect()
    }

    /// `name=value|name=value…` in declared order with `%`, `|` and `=` escaped in values.
    pub fn canonical_id(&self, v: &Variation) -> String {
        let fixed: Vec<Option<u32>> = v.indices.iter().copied().map(Some).collect();
        self.fixed_set_key(&fixed)
    }

    /// Canonical-id encoding restricted to the fixed dimensions of a partial assignment.
    pub fn fixed_set_key(&self, fixed: &[Option<u32>]) -> String {
        let mut out = String::new();
        for (d, f) in self.dimensions.iter().zip(fixed) {
            if let Some(i) = f {
                if !out.is_empty() {
                    out.push('|');
                }
                out.push_str(&d.name);
                out.push('=');
                out.extend(utf8_percent_encode(&d.values[*i as usize], ID_VALUE));
            }
        }
        out
    }

    pub fn parse_canonical_id(&self, id: &str) -> std::result::Result<Variation, CanonicalIdError> {
        if id.is_empty() {
            return Err(CanonicalIdError::Malformed("empty id".into()));
        }
        let mut pairs = Vec::new();
        for part in id.split('|') {
            let (name, raw) = part
                .split_once('=')
                .ok_or_else(|| CanonicalIdError::Malformed(format!("segment {part:?} lacks '='")))?;
            if raw.contains('=') {
                return Err(CanonicalIdError::Malformed(format!("unescaped '=' in {part:?}")));
            }
            let value = percent_decode_str(raw)
                .decode_utf8()
                .map_err(|_| CanonicalIdError::Malformed(format!("bad escape in {part:?}")))?;
            pairs.push((name, value.into_owned()));
        }
        if pairs.len() != self.dimensions.len() {
            return Err(CanonicalIdError::NotInSpace(id.to_string()));
        }
        let mut indices = Vec::with_capacity(pairs.len());
        for (d, (name, value)) in self.dimensions.iter().zip(&pairs) {
            if d.name != *name {
                return Err(CanonicalIdError::NotInSpace(id.to_string()));
            }
            let i = d
                .index_of(value)
                .ok_or_else(|| CanonicalIdError::NotInSpace(id.to_string()))?;
            indices.push(i);
        }
        Ok(Variation { indices })
    }

    /// Builds a variation from a name → value map covering every dimension.
    pub fn variation_from_assignments<'a, I>(&self, assignments: I) -> Result<Variation>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let fixed = self.fixed_from_assignments(assignments)?;
        if let Some(d) = self.dimensions.iter().zip(&fixed).find(|(_, f)| f.is_none()) {
            return Err(Error::Validation(format!("no value given for dimension {}", d.0.name)));
        }
        Ok(Variation {
            indices: fixed.into_iter().map(|f| f.expect("checked")).collect(),
        })
    }

    /// Resolves a partial name → value map into a fixed set.
    pub fn fixed_from_assignments<'a, I>(&self, assignments: I) -> Result<Vec<Option<u32>>>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut fixed = vec![None; self.dimensions.len()];
        for (name, value) in assignments {
            let (di, d) = self
                .dimension(name)
                .ok_or_else(|| Error::Validation(format!("unknown dimension {name:?}")))?;
            let vi = d
                .index_of(value)
                .ok_or_else(|| Error::Validation(format!("unknown value {value:?} for dimension {name}")))?;
            if fixed[di].replace(vi).is_some() {
                return Err(Error::Validation(format!("dimension {name} assigned twice")));
            }
        }
        Ok(fixed)
    }

    pub fn price(&self, v: &Variation) -> Result<Money> {
        self.check(v)?;
        Ok(self.price_unchecked(v))
    }

    pub(crate) fn price_unchecked(&self, v: &Variation) -> Money {
        self.pricing.base_price
            + self
                .deltas
                .iter()
                .zip(&v.indices)
                .map(|(row, &i)| row[i as usize])
                .sum::<Money>()
    }

    /// Min and max price over all variations consistent with a fixed set.
    /// Closed form, valid because pricing is additive.
    pub fn price_bounds(&self, fixed: &[Option<u32>]) -> (Money, Money) {
        let mut lo = self.pricing.base_price;
        let mut hi = self.pricing.base_price;
        for ((row, bounds), f) in self.deltas.iter().zip(&self.delta_bounds).zip(fixed) {
            match f {
                Some(i) => {
                    lo += row[*i as usize];
                    hi += row[*i as usize];
                }
                None => {
                    lo += bounds.0;
                    hi += bounds.1;
                }
            }
        }
        (lo, hi)
    }

    /// Seeded pseudo-inventory: pure in (seed, canonical id, rate).
    pub fn initial_availability(&self, v: &Variation) -> bool {
        self.initially_available_with(self.inventory_seed, v)
    }

    pub(crate) fn initially_available_with(&self, seed: u64, v: &Variation) -> bool {
        availability_score(seed, &self.canonical_id(v)) < self.base_availability_rate
    }

    /// A copy of this catalog whose named dimension has `n` values. Temporal
    /// dimensions continue day by day from their first date, ordinal ones count
    /// up from their first value. Price modifiers on dropped values are removed.
    pub fn with_dimension_length(&self, name: &str, n: usize) -> Result<Self> {
        let (di, d) = self
            .dimension(name)
            .ok_or_else(|| Error::Validation(format!("unknown dimension {name:?}")))?;
        if n == 0 {
            return Err(Error::Validation("dimension length must be at least 1".into()));
        }
        let first = &d.values[0];
        let values = match d.kind {
            DimensionKind::Temporal => expand_dates(first, n)?,
            DimensionKind::Ordinal => expand_ordinals(first.parse().expect("validated"), n)?,
            DimensionKind::Categorical => {
                return Err(Error::Validation(format!(
                    "categorical dimension {name} cannot be resized"
                )))
            }
        };
        let resized = DimensionDef::new(d.name.clone(), d.kind, d.label.clone(), values)?;
        let mut pricing = self.pricing.clone();
        pricing
            .modifiers
            .retain(|(dim, value), _| dim != name || resized.index_of(value).is_some());
        let mut dimensions = self.dimensions.clone();
        dimensions[di] = resized;
        ProductCatalog::new(
            self.product.clone(),
            dimensions,
            pricing,
            self.inventory_seed,
            self.base_availability_rate,
        )
    }

    pub fn with_availability_rate(&self, rate: f64) -> Result<Self> {
        ProductCatalog::new(
            self.product.clone(),
            self.dimensions.clone(),
            self.pricing.clone(),
            self.inventory_seed,
            rate,
        )
    }

    pub fn with_inventory_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.inventory_seed = seed;
        c
    }
}

fn expand_dates(first: &str, n: usize) -> Result<Vec<String>> {
    let start = parse_date(first).map_err(|_| Error::InvalidCatalog(format!("{first:?} is not an ISO-8601 date")))?;
    (0..n as u64)
        .map(|i| {
            start
                .checked_add_days(Days::new(i))
                .map(|d| d.format("%Y-%m-%d").to_string())
                .ok_or_else(|| Error::InvalidCatalog("date range overflows the calendar".into()))
        })
        .collect()
}

fn expand_ordinals(first: i64, n: usize) -> Result<Vec<String>> {
    (0..n as i64)
        .map(|i| {
            first
                .checked_add(i)
                .map(|v| v.to_string())
                .ok_or_else(|| Error::InvalidCatalog("ordinal range overflows".into()))
        })
        .collect()
}

/// Streaming odometer over the variation space; holds one variation at a time.
#[derive(Clone, Debug)]
pub struct VariationIter {
    radices: Vec<u32>,
    fixed: Vec<Option<u32>>,
    next: Option<Vec<u32>>,
    remaining: Option<u64>,
}

impl VariationIter {
    fn new(radices: Vec<u32>, fixed: Vec<Option<u32>>, limit: Option<u64>) -> Self {
        let start: Vec<u32> = fixed.iter().map(|f| f.unwrap_or(0)).collect();
        let valid = radices.iter().zip(&start).all(|(&r, &s)| r > 0 && s < r);
        VariationIter {
            next: valid.then_some(start),
            radices,
            fixed,
            remaining: limit,
        }
    }

    fn advance(&mut self) {
        let Some(current) = self.next.as_mut() else {
            return;
        };
        for pos in (0..current.len()).rev() {
            if self.fixed[pos].is_some() {
                continue;
            }
            current[pos] += 1;
            if current[pos] < self.radices[pos] {
                return;
            }
            current[pos] = 0;
        }
        self.next = None;
    }
}

impl Iterator for VariationIter {
    type Item = Variation;

    fn next(&mut self) -> Option<Variation> {
        if let Some(rem) = self.remaining.as_mut() {
            if *rem == 0 {
                return None;
            }
            *rem -= 1;
        }
        let out = self.next.clone()?;
        self.advance();
        Some(Variation { indices: out })
    }
}

impl fmt::Display for Variation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.indices)
    }
}

// On-disk catalog format.

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogFile {
    product: ProductInfo,
    dimensions: Vec<DimensionFile>,
    pricing: PricingFile,
    inventory: InventoryFile,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DimensionFile {
    name: String,
    kind: DimensionKind,
    #[serde(default)]
    label: Option<String>,
    values: ValuesFile,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ValuesFile {
    List(Vec<Literal>),
    /// Compact form for temporal and ordinal dimensions, expanded at load.
    Range {
        from: Literal,
        count: usize,
    },
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum Literal {
    Int(i64),
    Text(String),
}

impl Literal {
    fn into_string(self) -> String {
        match self {
            Literal::Int(i) => i.to_string(),
            Literal::Text(s) => s,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PricingFile {
    base: Money,
    currency: String,
    #[serde(default)]
    modifiers: Vec<ModifierFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModifierFile {
    dimension: String,
    value: Literal,
    delta: Money,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InventoryFile {
    seed: u64,
    availability_rate: f64,
}

impl CatalogFile {
    fn into_catalog(self) -> Result<ProductCatalog> {
        let mut dimensions = Vec::with_capacity(self.dimensions.len());
        for d in self.dimensions {
            let values = match d.values {
                ValuesFile::List(list) => list.into_iter().map(Literal::into_string).collect(),
                ValuesFile::Range { from, count } => match (d.kind, from) {
                    (DimensionKind::Temporal, Literal::Text(start)) => expand_dates(&start, count)?,
                    (DimensionKind::Ordinal, Literal::Int(start)) => expand_ordinals(start, count)?,
                    _ => {
                        return Err(Error::InvalidCatalog(format!(
                            "dimension {}: compact ranges need a date (temporal) or integer (ordinal) start",
                            d.name
                        )))
                    }
                },
            };
            let label = d.label.unwrap_or_else(|| d.name.clone());
            dimensions.push(DimensionDef::new(d.name, d.kind, label, values)?);
        }
        let mut modifiers = BTreeMap::new();
        for m in self.pricing.modifiers {
            let key = (m.dimension, m.value.into_string());
            if modifiers.insert(key.clone(), m.delta).is_some() {
                return Err(Error::InvalidCatalog(format!(
                    "duplicate price modifier for {}={}",
                    key.0, key.1
                )));
            }
        }
        let pricing = PricingModel {
            base_price: self.pricing.base,
            currency: self.pricing.currency,
            modifiers,
        };
        ProductCatalog::new(
            self.product,
            dimensions,
            pricing,
            self.inventory.seed,
            self.inventory.availability_rate,
        )
    }
}
