//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use matpub::catalog::{DimensionDef, DimensionKind, Money, PricingModel, ProductCatalog, ProductInfo, Variation};
use matpub::heuristics::PublishOptions;
use matpub::resolver::{self, ServerHandle};
use proptest::prelude::*;

pub fn repo_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

pub fn load_catalog(name: &str) -> ProductCatalog {
    ProductCatalog::load(repo_path(&format!("catalogs/{name}.json"))).expect("bundled catalog loads")
}

/// The evaluation hotel with the in-advance dimension resized to `n`.
pub fn eval_hotel(n: usize) -> ProductCatalog {
    load_catalog("eval-hotel").with_dimension_length("arrival", n).unwrap()
}

pub async fn serve(catalog: ProductCatalog, options: PublishOptions) -> ServerHandle {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    resolver::spawn(listener, Arc::new(catalog), options, None)
        .await
        .unwrap()
}

pub fn assignments(catalog: &ProductCatalog, v: &Variation) -> Vec<(String, String)> {
    catalog
        .assignments(v)
        .into_iter()
        .map(|(k, x)| (k.to_string(), x.to_string()))
        .collect()
}

/// Every variation by nested loops over the lengths, independent of the
/// catalog's own odometer.
pub fn brute_force_variations(catalog: &ProductCatalog) -> Vec<Variation> {
    let lengths: Vec<u32> = catalog.dimensions().iter().map(|d| d.len() as u32).collect();
    let mut out = vec![Vec::new()];
    for &len in &lengths {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<u32>| {
                (0..len).map(move |i| {
                    let mut p = prefix.clone();
                    p.push(i);
                    p
                })
            })
            .collect();
    }
    out.into_iter().map(Variation::from_indices).collect()
}

/// Price recomputed from the raw modifier table.
pub fn brute_force_price(catalog: &ProductCatalog, v: &Variation) -> Money {
    let pricing = catalog.pricing();
    let mut total = pricing.base_price;
    for (name, value) in catalog.assignments(v) {
        if let Some(delta) = pricing.modifiers.get(&(name.to_string(), value.to_string())) {
            total += *delta;
        }
    }
    total
}

fn product() -> ProductInfo {
    ProductInfo {
        name: "Generated product".into(),
        description: "Catalog drawn by a property test".into(),
        image_url: "https://example.org/p.png".into(),
        area_served: "Anywhere".into(),
    }
}

/// Catalogs with at most `max_dims` dimensions of length at most
/// `max_len`, at most `max_count` variations and positive prices.
pub fn arb_catalog(max_dims: usize, max_len: usize, max_count: u64) -> impl Strategy<Value = ProductCatalog> {
    let dims = prop::collection::vec(1..=max_len, 1..=max_dims).prop_filter("variation count", move |ls| {
        ls.iter().map(|&l| l as u64).product::<u64>() <= max_count
    });
    (dims, any::<u64>(), 0u8..=4)
        .prop_flat_map(|(lengths, seed, rate_step)| {
            let deltas = lengths
                .iter()
                .map(|&l| prop::collection::vec(-500i64..=2000, l))
                .collect::<Vec<_>>();
            let kinds = prop::collection::vec(0u8..3, lengths.len());
            (Just(lengths), deltas, kinds, Just(seed), Just(rate_step))
        })
        .prop_map(|(lengths, deltas, kinds, seed, rate_step)| {
            let mut pricing = PricingModel::new(Money::from_minor(50_000), "EUR");
            let mut dims = Vec::new();
            for (i, (&len, kind)) in lengths.iter().zip(kinds).enumerate() {
                let name = format!("d{i}");
                let (kind, values): (DimensionKind, Vec<String>) = match kind {
                    0 => (DimensionKind::Categorical, (0..len).map(|j| format!("v{j}")).collect()),
                    1 => (
                        DimensionKind::Ordinal,
                        (0..len).map(|j| (j as i64 * 3 - 4).to_string()).collect(),
                    ),
                    _ => (
                        DimensionKind::Temporal,
                        (0..len).map(|j| format!("2024-03-{:02}", j + 1)).collect(),
                    ),
                };
                for (value, delta) in values.iter().zip(&deltas[i]) {
                    if *delta != 0 {
                        pricing = pricing.with_modifier(name.clone(), value.clone(), Money::from_minor(*delta));
                    }
                }
                dims.push(DimensionDef::new(name.clone(), kind, name, values).unwrap());
            }
            let rate = f64::from(rate_step) / 4.0;
            ProductCatalog::new(product(), dims, pricing, seed, rate).unwrap()
        })
}
