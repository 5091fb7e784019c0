//! The booking resolver over real HTTP.

mod common;

use std::collections::BTreeSet;

use common::{eval_hotel, load_catalog, serve};
use futures::future::join_all;
use matpub::annotate::{conformity_check, PageMode};
use matpub::catalog::{Inventory, ProductCatalog};
use matpub::consumer::extract_annotations;
use matpub::heuristics::{Heuristic, PickerPolicy, PublishOptions};
use matpub::publish::write_page;
use matpub::resolver::{BookingResult, BookingStatus, ErrorBody, ResetResponse, SearchResponse, EPOCH_HEADER};
use reqwest::StatusCode;
use serde_json::json;

fn epoch_of(r: &reqwest::Response) -> u64 {
    r.headers()
        .get(EPOCH_HEADER)
        .expect("epoch header")
        .to_str()
        .unwrap()
        .parse()
        .unwrap()
}

async fn get(url: &str) -> reqwest::Response {
    reqwest::get(url).await.unwrap()
}

async fn book(client: &reqwest::Client, base: &str, id: &str) -> (StatusCode, BookingResult) {
    let r = client
        .post(format!("{base}/api/book"))
        .json(&json!({ "canonical_id": id }))
        .send()
        .await
        .unwrap();
    let status = r.status();
    (status, r.json().await.unwrap())
}

async fn search(base: &str, query: &str) -> SearchResponse {
    let r = get(&format!("{base}/api/search?{query}")).await;
    assert_eq!(r.status(), StatusCode::OK, "{query}");
    r.json().await.unwrap()
}

async fn reset(client: &reqwest::Client, base: &str, seed: Option<u64>) -> ResetResponse {
    let mut request = client.post(format!("{base}/admin/reset"));
    if let Some(seed) = seed {
        request = request.json(&json!({ "seed": seed }));
    }
    request.send().await.unwrap().json().await.unwrap()
}

fn with_rate(c: ProductCatalog, rate: f64) -> ProductCatalog {
    c.with_availability_rate(rate).unwrap()
}

#[tokio::test]
async fn pages_carry_the_expected_annotations() {
    let server = serve(eval_hotel(6), PublishOptions::default()).await;
    let expected = [
        (Heuristic::Full, 1440),
        (Heuristic::Abstraction, 1),
        (Heuristic::Specialization, 1),
        (Heuristic::TypeLevel, 42),
        (Heuristic::Selective, 8),
    ];
    for (h, count) in expected {
        let r = get(&format!("{}/page/{h}", server.url())).await;
        assert_eq!(r.status(), StatusCode::OK);
        assert!(r.headers()["content-type"].to_str().unwrap().starts_with("text/html"));
        let body = r.bytes().await.unwrap();
        let extraction = extract_annotations(&body);
        assert!(extraction.warnings.is_empty());
        assert_eq!(extraction.annotations.len(), count, "{h}");
        assert!(conformity_check(&body[..]).unwrap().conforms);
    }
    server.shutdown().await.unwrap();
}

#[tokio::test]
async fn served_page_equals_generated_page() {
    let catalog = eval_hotel(2);
    let server = serve(catalog.clone(), PublishOptions::default()).await;
    for h in Heuristic::ALL {
        let served = get(&format!("{}/page/{h}", server.url())).await.bytes().await.unwrap();
        let inv = Inventory::new(&catalog);
        let (local, _) = write_page(
            h,
            &catalog,
            &inv,
            &PublishOptions::default(),
            &server.url(),
            PageMode::Bulk,
            Vec::new(),
            |_| Ok(()),
        )
        .unwrap();
        assert_eq!(&served[..], &local[..], "{h}");
    }
    server.shutdown().await.unwrap();
}

#[tokio::test]
async fn unknown_pages_and_routes_are_404() {
    let server = serve(load_catalog("tshirt"), PublishOptions::default()).await;
    for path in ["/page/everything", "/nope", "/api/offers"] {
        let r = get(&format!("{}{path}", server.url())).await;
        assert_eq!(r.status(), StatusCode::NOT_FOUND, "{path}");
        let body: ErrorBody = r.json().await.unwrap();
        assert!(!body.message.is_empty());
    }
    server.shutdown().await.unwrap();
}

#[tokio::test]
async fn full_page_over_the_cap_is_refused_before_any_body() {
    let options = PublishOptions {
        hard_cap: 100,
        ..PublishOptions::default()
    };
    let server = serve(eval_hotel(1), options).await;
    let r = get(&format!("{}/page/full", server.url())).await;
    assert_eq!(r.status(), StatusCode::UNPROCESSABLE_ENTITY);
    let body: ErrorBody = r.json().await.unwrap();
    assert_eq!(body.error, "cap_exceeded");
    let ok = get(&format!("{}/page/type-level", server.url())).await;
    assert_eq!(ok.status(), StatusCode::OK);
    server.shutdown().await.unwrap();
}

#[tokio::test]
async fn paginated_pages_partition_the_bulk_page() {
    let catalog = load_catalog("tshirt");
    let server = serve(catalog.clone(), PublishOptions::default()).await;
    let bulk = get(&format!("{}/page/full", server.url())).await.bytes().await.unwrap();
    let bulk = extract_annotations(&bulk).annotations;
    let mut joined = Vec::new();
    for page in 1..=3 {
        let r = get(&format!("{}/page/full?page={page}&per_page=10", server.url())).await;
        assert_eq!(r.status(), StatusCode::OK);
        let body = r.bytes().await.unwrap();
        assert!(conformity_check(&body[..]).unwrap().conforms);
        let text = String::from_utf8(body.to_vec()).unwrap();
        assert_eq!(text.contains("rel=\"next\""), page < 3, "page {page}");
        assert_eq!(text.contains("rel=\"prev\""), page > 1, "page {page}");
        joined.extend(extract_annotations(text.as_bytes()).annotations);
    }
    assert_eq!(joined.len(), 27);
    assert_eq!(joined, bulk);

    let beyond = get(&format!("{}/page/full?page=4&per_page=10", server.url())).await;
    assert_eq!(beyond.status(), StatusCode::NOT_FOUND);
    for bad in [
        "page=0",
        "per_page=0",
        "per_page=201",
        "page=x",
        "sort=price",
        "page=1&page=2",
    ] {
        let r = get(&format!("{}/page/full?{bad}", server.url())).await;
        assert_eq!(r.status(), StatusCode::BAD_REQUEST, "{bad}");
    }
    server.shutdown().await.unwrap();
}

#[tokio::test]
async fn search_filters_and_paginates() {
    let catalog = with_rate(eval_hotel(365), 1.0);
    let server = serve(catalog, PublishOptions::default()).await;
    let base = server.url();

    let all = search(&base, "").await;
    assert_eq!(all.total_count, 87_600);
    assert_eq!(all.offers.len(), 20);
    assert_eq!(
        all.offers[0].canonical_id,
        "type=normal|catering=breakfast|occupancy=single|arrival=2019-01-01|stay=1"
    );

    let point = search(
        &base,
        "type=comfort&catering=half-board&occupancy=double&arrival=2019-06-01&stay=7",
    )
    .await;
    assert_eq!(point.total_count, 1);
    assert_eq!(point.offers[0].price.to_string(), "555.00");
    assert_eq!(point.offers[0].book_url, format!("{base}/api/book"));

    let partial = search(&base, "arrival=2019-03-15&stay=2&per_page=5&page=2").await;
    assert_eq!(partial.total_count, 8);
    assert_eq!((partial.page, partial.per_page, partial.offers.len()), (2, 5, 3));

    for bad in [
        "colour=red",
        "type=deluxe",
        "type=normal&type=comfort",
        "page=0",
        "per_page=500",
        "stay=abc",
    ] {
        let r = get(&format!("{base}/api/search?{bad}")).await;
        assert_eq!(r.status(), StatusCode::BAD_REQUEST, "{bad}");
        let body: ErrorBody = r.json().await.unwrap();
        assert_eq!(body.error, "bad_request");
    }
    server.shutdown().await.unwrap();
}

#[tokio::test]
async fn booking_statuses() {
    let catalog = with_rate(load_catalog("tshirt"), 1.0);
    let server = serve(catalog, PublishOptions::default()).await;
    let base = server.url();
    let client = reqwest::Client::new();
    let id = "color=red|size=M|cut=slim";

    let (status, first) = book(&client, &base, id).await;
    assert_eq!(
        (status, first.status, first.epoch_after),
        (StatusCode::OK, BookingStatus::Confirmed, 1)
    );
    let (status, again) = book(&client, &base, id).await;
    assert_eq!(
        (status, again.status, again.epoch_after),
        (StatusCode::CONFLICT, BookingStatus::AlreadyBooked, 1)
    );
    let (status, unknown) = book(&client, &base, "color=gold|size=M|cut=slim").await;
    assert_eq!(
        (status, unknown.status),
        (StatusCode::NOT_FOUND, BookingStatus::UnknownOffer)
    );

    // Well-formed ids outside the space are unknown offers, not bad requests.
    for id in ["color=red", "size=M|color=red|cut=slim"] {
        let (status, r) = book(&client, &base, id).await;
        assert_eq!(
            (status, r.status),
            (StatusCode::NOT_FOUND, BookingStatus::UnknownOffer),
            "{id}"
        );
    }
    for body in [
        "{",
        "{}",
        r#"{"canonical_id": 3}"#,
        r#"{"canonical_id": ""}"#,
        r#"{"canonical_id": "color"}"#,
    ] {
        let r = client
            .post(format!("{base}/api/book"))
            .header("content-type", "application/json")
            .body(body)
            .send()
            .await
            .unwrap();
        assert_eq!(r.status(), StatusCode::BAD_REQUEST, "{body}");
    }
    server.shutdown().await.unwrap();
}

#[tokio::test]
async fn concurrent_bookings_of_one_variation_confirm_once() {
    let server = serve(with_rate(eval_hotel(30), 1.0), PublishOptions::default()).await;
    let base = server.url();
    let client = reqwest::Client::new();
    let id = "type=normal|catering=breakfast|occupancy=single|arrival=2019-01-10|stay=3";
    let results = join_all((0..100).map(|_| book(&client, &base, id))).await;
    let confirmed = results
        .iter()
        .filter(|(_, r)| r.status == BookingStatus::Confirmed)
        .count();
    let conflicts = results.iter().filter(|(s, _)| *s == StatusCode::CONFLICT).count();
    assert_eq!((confirmed, conflicts), (1, 99));
    assert!(results.iter().all(|(_, r)| r.epoch_after == 1));
    server.shutdown().await.unwrap();
}

#[tokio::test]
async fn bookings_are_visible_to_the_next_read() {
    let server = serve(with_rate(eval_hotel(30), 1.0), PublishOptions::default()).await;
    let base = server.url();
    let client = reqwest::Client::new();
    let query = "type=comfort&catering=breakfast&occupancy=double&arrival=2019-01-05";
    let before = search(&base, query).await;
    assert_eq!(before.total_count, 30);
    for (k, offer) in before.offers.iter().take(5).enumerate() {
        let (_, r) = book(&client, &base, &offer.canonical_id).await;
        assert_eq!(r.epoch_after, k as u64 + 1);
        let after = search(&base, query).await;
        assert_eq!(after.epoch, r.epoch_after);
        assert_eq!(after.total_count, 30 - (k as u64 + 1));
        assert!(after.offers.iter().all(|o| o.canonical_id != offer.canonical_id));
    }
    server.shutdown().await.unwrap();
}

#[tokio::test]
async fn reset_restores_the_seeded_inventory() {
    let catalog = eval_hotel(30);
    let rate = catalog.availability_rate();
    let total = catalog.count_variations() as f64;
    let server = serve(catalog.clone(), PublishOptions::default()).await;
    let base = server.url();
    let client = reqwest::Client::new();

    let initial = search(&base, "per_page=200").await;
    for offer in &initial.offers[..10] {
        book(&client, &base, &offer.canonical_id).await;
    }
    let reset_to_default = reset(&client, &base, None).await;
    assert_eq!(
        (reset_to_default.epoch, reset_to_default.seed),
        (0, catalog.inventory_seed())
    );
    assert_eq!(search(&base, "per_page=200").await, initial);

    let reseeded = reset(&client, &base, Some(99)).await;
    assert_eq!(reseeded.seed, 99);
    let other = search(&base, "per_page=200").await;
    assert_ne!(other.offers, initial.offers);
    // Binomial 99.9% band around the configured rate.
    let observed = other.total_count as f64 / total;
    let band = 3.3 * (rate * (1.0 - rate) / total).sqrt();
    assert!((observed - rate).abs() < band, "{observed} vs {rate}");
    server.shutdown().await.unwrap();
}

#[tokio::test]
async fn resets_interleaved_with_bookings_leave_consistent_state() {
    let catalog = with_rate(eval_hotel(30), 1.0);
    let total = catalog.count_variations();
    let server = serve(catalog.clone(), PublishOptions::default()).await;
    let base = server.url();
    let client = reqwest::Client::new();
    let ids: Vec<String> = catalog
        .enumerate_variations(Some(300))
        .map(|v| catalog.canonical_id(&v))
        .collect();
    let bookings = join_all(ids.iter().map(|id| book(&client, &base, id)));
    let resets = join_all((0..5).map(|_| reset(&client, &base, None)));
    let (results, _) = tokio::join!(bookings, resets);
    assert!(results.iter().all(|(s, _)| s.is_success()));
    // Every epoch bump is exactly one booked variation since the last reset.
    let after = search(&base, "").await;
    assert_eq!(total - after.total_count, after.epoch);
    assert_eq!(server.state().snapshot().booked_count() as u64, after.epoch);
    server.shutdown().await.unwrap();
}

#[tokio::test]
async fn specialization_moves_on_after_its_representative_is_booked() {
    let catalog = with_rate(load_catalog("tshirt"), 1.0);
    let server = serve(catalog, PublishOptions::default()).await;
    let base = server.url();
    let client = reqwest::Client::new();
    let mut seen = BTreeSet::new();
    for _ in 0..27 {
        let r = get(&format!("{base}/page/specialization")).await;
        assert_eq!(r.status(), StatusCode::OK);
        let page = r.bytes().await.unwrap();
        let annotations = extract_annotations(&page).annotations;
        assert_eq!(annotations.len(), 1);
        let sku = annotations[0].sku.clone().expect("concrete representative");
        assert!(seen.insert(sku.clone()), "{sku} published twice");
        let (status, _) = book(&client, &base, &sku).await;
        assert_eq!(status, StatusCode::OK);
    }
    let exhausted = get(&format!("{base}/page/specialization")).await;
    assert_eq!(exhausted.status(), StatusCode::CONFLICT);
    assert_eq!(epoch_of(&exhausted), 27);
    server.shutdown().await.unwrap();
}

#[tokio::test]
async fn picker_choice_shapes_the_representative() {
    let catalog = with_rate(load_catalog("tshirt"), 1.0);
    let options = PublishOptions {
        picker: PickerPolicy::Fixed {
            canonical_id: "color=blue|size=L|cut=loose".into(),
        },
        ..PublishOptions::default()
    };
    let server = serve(catalog, options).await;
    let page = get(&format!("{}/page/specialization", server.url()))
        .await
        .bytes()
        .await
        .unwrap();
    let annotations = extract_annotations(&page).annotations;
    assert_eq!(annotations[0].sku.as_deref(), Some("color=blue|size=L|cut=loose"));
    server.shutdown().await.unwrap();
}

#[tokio::test]
async fn every_response_carries_the_epoch() {
    let server = serve(with_rate(load_catalog("tshirt"), 1.0), PublishOptions::default()).await;
    let base = server.url();
    let client = reqwest::Client::new();
    book(&client, &base, "color=red|size=S|cut=slim").await;
    for path in [
        "/",
        "/page/abstraction",
        "/page/full?page=9",
        "/api/search",
        "/api/search?x=1",
        "/missing",
    ] {
        let r = get(&format!("{base}{path}")).await;
        assert_eq!(epoch_of(&r), 1, "{path}");
    }
    let r = client.post(format!("{base}/api/book")).body("{").send().await.unwrap();
    assert_eq!(epoch_of(&r), 1);
    let r = client.post(format!("{base}/admin/reset")).send().await.unwrap();
    assert_eq!(epoch_of(&r), 0);
    server.shutdown().await.unwrap();
}
