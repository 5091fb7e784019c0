//! JSON-LD serialization of publication items, the elevation step that
//! attaches a search service to non-concrete offers, and the annotated HTML
//! pages that carry them.

mod canonical;
pub mod conformity;
pub mod html;
pub mod page;
pub mod uri_template;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::catalog::{DimensionKind, Money, ProductCatalog, RangeSummary};
use crate::error::{Error, Result};
use crate::heuristics::{ItemKind, PriceInfo, PublicationItem};

pub use canonical::to_canonical_string;
pub use conformity::{conformity_check, ConformityReport, Orphan};
pub use page::{render_page, PageMode, PageStats, PageWriter};

pub const SCHEMA_CONTEXT: &str = "https://schema.org";
pub const IN_STOCK: &str = "https://schema.org/InStock";
pub const OUT_OF_STOCK: &str = "https://schema.org/OutOfStock";
pub const SEARCH_PATH: &str = "/api/search";
pub const BOOK_PATH: &str = "/api/book";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Search,
    Book,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputType {
    Offer,
    BookingConfirmation,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputParam {
    pub name: String,
    pub value_domain: RangeSummary,
    pub required: bool,
}

/// The web-service description attached by elevation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceDescription {
    pub action_kind: ActionKind,
    pub target_url_template: String,
    pub inputs: Vec<InputParam>,
    pub output_type: OutputType,
}

/// Attaches a search action whose inputs are the dimensions the item leaves
/// open. Concrete items get every dimension as input so clients can look for
/// sibling variations.
pub fn elevate(item: &PublicationItem, catalog: &ProductCatalog, endpoint_base: &str) -> Result<ServiceDescription> {
    if !item.requires_elevation() {
        return Err(Error::Contract(
            "elevation requested for an item that does not require it".into(),
        ));
    }
    let base = endpoint_base.trim_end_matches('/');
    let concrete = item.kind() == ItemKind::Concrete;
    let mut inputs = Vec::new();
    let mut literal_query = Vec::new();
    for (d, f) in catalog.dimensions().iter().zip(item.fixed_indices()) {
        match f {
            Some(i) if !concrete => literal_query.push(format!(
                "{}={}",
                d.name(),
                uri_template::encode_component(&d.values()[*i as usize])
            )),
            _ => inputs.push(InputParam {
                name: d.name().to_string(),
                value_domain: d.summary().clone(),
                required: true,
            }),
        }
    }
    let names: Vec<&str> = inputs.iter().map(|p| p.name.as_str()).collect();
    let mut target = format!("{base}{SEARCH_PATH}");
    if literal_query.is_empty() {
        target.push_str(&format!("{{?{}}}", names.join(",")));
    } else {
        target.push('?');
        target.push_str(&literal_query.join("&"));
        if !names.is_empty() {
            target.push_str(&format!("{{&{}}}", names.join(",")));
        }
    }
    Ok(ServiceDescription {
        action_kind: ActionKind::Search,
        target_url_template: target,
        inputs,
        output_type: OutputType::Offer,
    })
}

/// One serialized JSON-LD document together with its page anchor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Annotation {
    item: PublicationItem,
    jsonld: String,
    dom_anchor_id: String,
}

impl Annotation {
    pub fn item(&self) -> &PublicationItem {
        &self.item
    }

    pub fn jsonld(&self) -> &str {
        &self.jsonld
    }

    pub fn byte_size(&self) -> usize {
        self.jsonld.len()
    }

    pub fn dom_anchor_id(&self) -> &str {
        &self.dom_anchor_id
    }
}

/// `item-` followed by a hash prefix of the item's canonical fixed-set string.
pub fn dom_anchor_id(item: &PublicationItem, catalog: &ProductCatalog) -> String {
    let key = catalog.fixed_set_key(item.fixed_indices());
    let digest = Sha256::digest(key.as_bytes());
    let mut id = String::with_capacity(21);
    id.push_str("item-");
    for b in &digest[..8] {
        id.push_str(&format!("{b:02x}"));
    }
    id
}

fn literal(kind: DimensionKind, value: &str) -> Value {
    match kind {
        DimensionKind::Ordinal => value
            .parse::<i64>()
            .map(Value::from)
            .unwrap_or_else(|_| Value::from(value)),
        _ => Value::from(value),
    }
}

fn regex_alternation(values: &[String]) -> String {
    values
        .iter()
        .map(|v| {
            let mut out = String::with_capacity(v.len());
            for c in v.chars() {
                if "\\.+*?()|[]{}^$".contains(c) {
                    out.push('\\');
                }
                out.push(c);
            }
            out
        })
        .collect::<Vec<_>>()
        .join("|")
}

fn property_value(name: &str, label: &str) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("@type".into(), "PropertyValue".into());
    m.insert("name".into(), label.into());
    m.insert("propertyID".into(), name.into());
    m
}

fn action_node(service: &ServiceDescription, catalog: &ProductCatalog) -> Result<Value> {
    let action_type = match service.action_kind {
        ActionKind::Search => "SearchAction",
        ActionKind::Book => "ReserveAction",
    };
    let result_type = match service.output_type {
        OutputType::Offer => "Offer",
        OutputType::BookingConfirmation => "Reservation",
    };
    let mut node = Map::new();
    node.insert("@type".into(), action_type.into());
    node.insert(
        "target".into(),
        json!({
            "@type": "EntryPoint",
            "contentType": "application/json",
            "httpMethod": "GET",
            "urlTemplate": service.target_url_template,
        }),
    );
    node.insert("result".into(), json!({ "@type": result_type }));
    for input in &service.inputs {
        let (_, dim) = catalog
            .dimension(&input.name)
            .ok_or_else(|| Error::Contract(format!("service input {} is not a catalog dimension", input.name)))?;
        let mut spec = Map::new();
        spec.insert("@type".into(), "PropertyValueSpecification".into());
        spec.insert("valueName".into(), input.name.clone().into());
        spec.insert("valueRequired".into(), input.required.into());
        match &input.value_domain {
            RangeSummary::Values(values) => {
                spec.insert("valuePattern".into(), regex_alternation(values).into());
            }
            RangeSummary::Span { min, max, .. } => {
                spec.insert("minValue".into(), literal(dim.kind(), min));
                spec.insert("maxValue".into(), literal(dim.kind(), max));
            }
        }
        node.insert(format!("{}-input", input.name), Value::Object(spec));
    }
    Ok(Value::Object(node))
}

fn jsonld_value(
    item: &PublicationItem,
    service: Option<&ServiceDescription>,
    catalog: &ProductCatalog,
    anchor: &str,
) -> Result<Value> {
    let product = catalog.product();
    let mut properties = Vec::with_capacity(catalog.dimensions().len());
    for (d, f) in catalog.dimensions().iter().zip(item.fixed_indices()) {
        let mut pv = property_value(d.name(), d.label());
        match (f, d.summary()) {
            (Some(i), _) => {
                pv.insert("value".into(), literal(d.kind(), &d.values()[*i as usize]));
            }
            (None, RangeSummary::Values(values)) => {
                pv.insert("value".into(), values.clone().into());
            }
            (None, RangeSummary::Span { min, max, count }) => {
                pv.insert("minValue".into(), literal(d.kind(), min));
                pv.insert("maxValue".into(), literal(d.kind(), max));
                pv.insert(
                    "valueReference".into(),
                    json!({ "@type": "QuantitativeValue", "value": count }),
                );
            }
        }
        properties.push(Value::Object(pv));
    }

    let mut offer = Map::new();
    offer.insert("@type".into(), "Offer".into());
    offer.insert("areaServed".into(), product.area_served.clone().into());
    offer.insert(
        "availability".into(),
        if item.available() { IN_STOCK } else { OUT_OF_STOCK }.into(),
    );
    offer.insert("priceCurrency".into(), catalog.currency().into());
    match item.price() {
        PriceInfo::Exact(p) => {
            offer.insert("price".into(), p.to_string().into());
        }
        PriceInfo::Range { min, max } => {
            offer.insert(
                "priceSpecification".into(),
                json!({
                    "@type": "PriceSpecification",
                    "maxPrice": max.to_string(),
                    "minPrice": min.to_string(),
                    "priceCurrency": catalog.currency(),
                }),
            );
        }
    }
    if let Some(v) = item.variation() {
        offer.insert("sku".into(), catalog.canonical_id(&v).into());
    }
    if let Some(service) = service {
        offer.insert("potentialAction".into(), action_node(service, catalog)?);
    }

    Ok(json!({
        "@context": SCHEMA_CONTEXT,
        "@id": format!("#{anchor}"),
        "@type": "Product",
        "additionalProperty": properties,
        "description": product.description,
        "image": product.image_url,
        "name": product.name,
        "offers": Value::Object(offer),
    }))
}

/// Serializes an item to canonical JSON-LD (sorted keys, no whitespace, `<`
/// escaped so the document can sit inside a script element).
pub fn serialize(
    item: &PublicationItem,
    service: Option<&ServiceDescription>,
    catalog: &ProductCatalog,
) -> Result<Annotation> {
    if item.requires_elevation() != service.is_some() {
        return Err(Error::Contract(format!(
            "a service description must be given exactly when the item requires elevation (requires_elevation = {})",
            item.requires_elevation()
        )));
    }
    let anchor = dom_anchor_id(item, catalog);
    let value = jsonld_value(item, service, catalog, &anchor)?;
    Ok(Annotation {
        item: item.clone(),
        jsonld: to_canonical_string(&value),
        dom_anchor_id: anchor,
    })
}

/// Elevates when required, then serializes.
pub fn annotate(item: PublicationItem, catalog: &ProductCatalog, endpoint_base: &str) -> Result<Annotation> {
    let service = if item.requires_elevation() {
        Some(elevate(&item, catalog, endpoint_base)?)
    } else {
        None
    };
    serialize(&item, service.as_ref(), catalog)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedInput {
    pub name: String,
    pub required: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedAction {
    pub kind: ActionKind,
    pub target_url_template: String,
    pub inputs: Vec<ParsedInput>,
}

/// What a consumer can recover from a published JSON-LD document.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedAnnotation {
    pub anchor: String,
    pub fixed: Vec<(String, String)>,
    pub ranges: Vec<(String, RangeSummary)>,
    pub price: PriceInfo,
    pub currency: String,
    pub available: bool,
    pub sku: Option<String>,
    pub action: Option<ParsedAction>,
}

impl ParsedAnnotation {
    pub fn is_concrete(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn dimension_names(&self) -> impl Iterator<Item = &str> {
        self.fixed
            .iter()
            .map(|(n, _)| n.as_str())
            .chain(self.ranges.iter().map(|(n, _)| n.as_str()))
    }

    /// The fixed set in canonical-id form, used to order annotations.
    pub fn fixed_key(&self) -> String {
        self.fixed
            .iter()
            .map(|(n, v)| format!("{n}={v}"))
            .collect::<Vec<_>>()
            .join("|")
    }
}

fn scalar_text(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn money_at(node: &Value, key: &str) -> Result<Money> {
    node.get(key)
        .and_then(scalar_text)
        .ok_or_else(|| Error::Protocol(format!("missing {key}")))?
        .parse()
}

/// Parses a document produced by [`serialize`].
pub fn parse_annotation(doc: &Value) -> Result<ParsedAnnotation> {
    let missing = |what: &str| Error::Protocol(format!("annotation lacks {what}"));
    if doc.get("@type").and_then(Value::as_str) != Some("Product") {
        return Err(Error::Protocol("top-level node is not a Product".into()));
    }
    let anchor = doc
        .get("@id")
        .and_then(Value::as_str)
        .and_then(|s| s.strip_prefix('#'))
        .ok_or_else(|| missing("an @id anchor"))?
        .to_string();

    let mut fixed = Vec::new();
    let mut ranges = Vec::new();
    for pv in doc
        .get("additionalProperty")
        .and_then(Value::as_array)
        .ok_or_else(|| missing("additionalProperty"))?
    {
        let name = pv
            .get("propertyID")
            .and_then(Value::as_str)
            .ok_or_else(|| missing("propertyID"))?
            .to_string();
        match pv.get("value") {
            Some(Value::Array(values)) => {
                let values = values
                    .iter()
                    .map(scalar_text)
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| missing("scalar range values"))?;
                ranges.push((name, RangeSummary::Values(values)));
            }
            Some(v) => {
                fixed.push((name, scalar_text(v).ok_or_else(|| missing("a scalar value"))?));
            }
            None => {
                let min = pv
                    .get("minValue")
                    .and_then(scalar_text)
                    .ok_or_else(|| missing("minValue"))?;
                let max = pv
                    .get("maxValue")
                    .and_then(scalar_text)
                    .ok_or_else(|| missing("maxValue"))?;
                let count = pv
                    .pointer("/valueReference/value")
                    .and_then(Value::as_u64)
                    .ok_or_else(|| missing("a value count"))? as usize;
                ranges.push((name, RangeSummary::Span { min, max, count }));
            }
        }
    }

    let offer = doc.get("offers").ok_or_else(|| missing("an Offer"))?;
    if offer.get("@type").and_then(Value::as_str) != Some("Offer") {
        return Err(missing("an Offer node"));
    }
    let currency = offer
        .get("priceCurrency")
        .and_then(Value::as_str)
        .ok_or_else(|| missing("priceCurrency"))?
        .to_string();
    let price = match offer.get("priceSpecification") {
        Some(spec) => PriceInfo::Range {
            min: money_at(spec, "minPrice")?,
            max: money_at(spec, "maxPrice")?,
        },
        None => PriceInfo::Exact(money_at(offer, "price")?),
    };
    let available = match offer.get("availability").and_then(Value::as_str) {
        Some(IN_STOCK) => true,
        Some(OUT_OF_STOCK) => false,
        _ => return Err(missing("a known availability")),
    };
    let sku = offer.get("sku").and_then(Value::as_str).map(str::to_string);

    let action = match offer.get("potentialAction") {
        None => None,
        Some(node) => {
            let kind = match node.get("@type").and_then(Value::as_str) {
                Some("SearchAction") => ActionKind::Search,
                Some("ReserveAction") => ActionKind::Book,
                _ => return Err(missing("a known action type")),
            };
            let target_url_template = node
                .pointer("/target/urlTemplate")
                .and_then(Value::as_str)
                .ok_or_else(|| missing("an action target"))?
                .to_string();
            let mut inputs: Vec<ParsedInput> = node
                .as_object()
                .expect("action is an object")
                .iter()
                .filter(|(k, _)| k.ends_with("-input"))
                .map(|(_, spec)| {
                    Ok(ParsedInput {
                        name: spec
                            .get("valueName")
                            .and_then(Value::as_str)
                            .ok_or_else(|| missing("an input valueName"))?
                            .to_string(),
                        required: spec.get("valueRequired").and_then(Value::as_bool).unwrap_or(false),
                    })
                })
                .collect::<Result<_>>()?;
            // Keys are sorted; restore template order.
            let order = uri_template::variables(&target_url_template)?;
            inputs.sort_by_key(|p| order.iter().position(|n| *n == p.name).unwrap_or(usize::MAX));
            Some(ParsedAction {
                kind,
                target_url_template,
                inputs,
            })
        }
    };

    Ok(ParsedAnnotation {
        anchor,
        fixed,
        ranges,
        price,
        currency,
        available,
        sku,
        action,
    })
}
