//! The crawler against a live resolver.

mod common;

use common::{assignments, brute_force_price, eval_hotel, load_catalog, serve};
use matpub::catalog::{availability_score, ProductCatalog};
use matpub::consumer::{
    hit_ratio_experiment, resolve, resolve_on, sample_queries, Client, Outcome, PageContext, DEFAULT_CONCURRENCY,
};
use matpub::heuristics::{Heuristic, PublishOptions};
use matpub::Error;

fn rated(c: ProductCatalog, rate: f64) -> ProductCatalog {
    c.with_availability_rate(rate).unwrap()
}

/// Availability recomputed from the seed, without the inventory type.
fn oracle_available(c: &ProductCatalog, desired: &[(String, String)]) -> bool {
    let id = desired
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join("|");
    availability_score(c.inventory_seed(), &id) < c.availability_rate()
}

#[tokio::test]
async fn abstraction_needs_a_search_then_a_booking() {
    let catalog = rated(eval_hotel(30), 1.0);
    let server = serve(catalog.clone(), PublishOptions::default()).await;
    let client = Client::new();
    let page = format!("{}/page/abstraction", server.url());
    let desired = assignments(&catalog, &catalog.variation_at(4000).unwrap());

    let looked = resolve(&client, &page, &desired, false).await.unwrap();
    assert_eq!((looked.outcome, looked.api_calls), (Outcome::FoundNotBooked, 1));
    assert!(looked.steps[0].request_url.contains("/api/search?"));

    let booked = resolve(&client, &page, &desired, true).await.unwrap();
    assert_eq!((booked.outcome, booked.api_calls), (Outcome::Booked, 2));
    assert_eq!(booked.steps.len(), booked.api_calls);
    assert_eq!(booked.steps[1].method, "POST");

    // Soundness: the booked variation is gone and the epoch moved by one.
    let offer = booked.offer.unwrap();
    let v = catalog.parse_canonical_id(&offer.canonical_id).unwrap();
    let inventory = server.state().snapshot();
    assert!(!inventory.is_available(&catalog, &v));
    assert_eq!((inventory.epoch(), booked.booking.unwrap().epoch_after), (1, 1));
    assert_eq!(offer.price, brute_force_price(&catalog, &v));
    assert_eq!(assignments(&catalog, &v), desired);

    let again = resolve(&client, &page, &desired, true).await.unwrap();
    assert_eq!(again.outcome, Outcome::DeadEnd);
    server.shutdown().await.unwrap();
}

#[tokio::test]
async fn full_page_books_without_searching() {
    let catalog = rated(load_catalog("tshirt"), 1.0);
    let server = serve(catalog.clone(), PublishOptions::default()).await;
    let client = Client::new();
    let page = format!("{}/page/full", server.url());
    let body = client.fetch_page(&page).await.unwrap();
    let context = PageContext::new(&page, &body).unwrap();
    let desired = assignments(&catalog, &catalog.variation_at(13).unwrap());
    let trace = resolve_on(&client, &context, &desired, true).await.unwrap();
    assert_eq!((trace.outcome, trace.api_calls), (Outcome::Booked, 1));
    // The same page is now stale: the booking fails and a point query confirms it.
    let stale = resolve_on(&client, &context, &desired, true).await.unwrap();
    assert_eq!(stale.outcome, Outcome::DeadEnd);
    assert_eq!(stale.api_calls, 2);
    // A fresh page shows it unavailable; only the point query remains.
    let fresh = resolve(&client, &page, &desired, true).await.unwrap();
    assert_eq!((fresh.outcome, fresh.api_calls), (Outcome::DeadEnd, 1));
    server.shutdown().await.unwrap();
}

#[tokio::test]
async fn specialization_dead_ends_on_an_unavailable_sibling() {
    let catalog = rated(eval_hotel(30), 0.8);
    let server = serve(catalog.clone(), PublishOptions::default()).await;
    let client = Client::new();
    let page = format!("{}/page/specialization", server.url());
    let unavailable = catalog
        .enumerate_variations(None)
        .map(|v| assignments(&catalog, &v))
        .find(|d| !oracle_available(&catalog, d))
        .expect("some variation is unavailable at rate 0.8");
    let trace = resolve(&client, &page, &unavailable, false).await.unwrap();
    assert_eq!(trace.outcome, Outcome::DeadEnd);
    assert_eq!(trace.api_calls, 1);
    assert_eq!(trace.steps[0].response_count, 0);
    server.shutdown().await.unwrap();
}

#[tokio::test]
async fn type_level_tshirt_page_parses_into_nine_annotations() {
    let server = serve(load_catalog("tshirt"), PublishOptions::default()).await;
    let body = Client::new()
        .fetch_page(&format!("{}/page/type-level", server.url()))
        .await
        .unwrap();
    let extraction = matpub::consumer::extract_annotations(&body);
    assert_eq!((extraction.annotations.len(), extraction.warnings.len()), (9, 0));
    server.shutdown().await.unwrap();
}

#[tokio::test]
async fn dead_end_rate_tracks_availability() {
    for rate in [1.0, 0.0] {
        let catalog = rated(eval_hotel(30), rate);
        let server = serve(catalog.clone(), PublishOptions::default()).await;
        let client = Client::new();
        for h in Heuristic::ALL {
            let page = format!("{}/page/{h}", server.url());
            let result = hit_ratio_experiment(&client, &page, &catalog, 100, 3, false, DEFAULT_CONCURRENCY).await;
            if rate == 0.0 && h == Heuristic::Specialization {
                // Nothing to specialize on: the page itself is refused.
                assert!(matches!(result, Err(Error::Protocol(_))));
                continue;
            }
            let (summary, _) = result.unwrap();
            assert_eq!(summary.dead_end_rate, 1.0 - rate, "{h} at {rate}");
            assert_eq!(summary.hit_ratio + summary.dead_end_rate, 1.0);
        }
        server.shutdown().await.unwrap();
    }
}

#[tokio::test]
async fn dead_ends_are_exactly_the_unavailable_queries() {
    let catalog = rated(eval_hotel(30), 0.8);
    let server = serve(catalog.clone(), PublishOptions::default()).await;
    let client = Client::new();
    let queries = sample_queries(&catalog, 1000, 11).unwrap();
    let expected: Vec<bool> = queries.iter().map(|q| !oracle_available(&catalog, q)).collect();
    for h in [Heuristic::Abstraction, Heuristic::TypeLevel, Heuristic::Selective] {
        let page = format!("{}/page/{h}", server.url());
        let (summary, traces) = hit_ratio_experiment(&client, &page, &catalog, 1000, 11, false, DEFAULT_CONCURRENCY)
            .await
            .unwrap();
        let got: Vec<bool> = traces.iter().map(|t| t.outcome == Outcome::DeadEnd).collect();
        assert_eq!(got, expected, "{h}");
        assert!(
            (0.15..=0.25).contains(&summary.dead_end_rate),
            "{}",
            summary.dead_end_rate
        );
        for t in &traces {
            if let Some(offer) = &t.offer {
                let v = catalog.parse_canonical_id(&offer.canonical_id).unwrap();
                assert_eq!(offer.price, brute_force_price(&catalog, &v));
            }
        }
    }
    server.shutdown().await.unwrap();
}

#[tokio::test]
async fn concrete_pages_need_the_fewest_round_trips() {
    let catalog = rated(eval_hotel(6), 1.0);
    let mut means = Vec::new();
    for h in [
        Heuristic::Full,
        Heuristic::Selective,
        Heuristic::TypeLevel,
        Heuristic::Abstraction,
    ] {
        // A fresh server per heuristic keeps every run on the same inventory.
        let server = serve(catalog.clone(), PublishOptions::default()).await;
        let page = format!("{}/page/{h}", server.url());
        let (summary, _) = hit_ratio_experiment(&Client::new(), &page, &catalog, 200, 5, true, DEFAULT_CONCURRENCY)
            .await
            .unwrap();
        assert_eq!(summary.booked, 200, "{h}");
        means.push(summary.mean_api_calls);
        server.shutdown().await.unwrap();
    }
    assert!(
        means[0] <= means[1] && means[1] <= means[2] && means[1] <= means[3],
        "{means:?}"
    );
}

#[tokio::test]
async fn unreachable_server_is_a_transport_error() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    let started = std::time::Instant::now();
    let err = Client::new()
        .fetch_page(&format!("http://{addr}/page/full"))
        .await
        .unwrap_err();
    assert!(matches!(err, Error::Transport(_)), "{err}");
    // Two backoffs: 100 ms then 200 ms.
    assert!(started.elapsed() >= std::time::Duration::from_millis(300));
}

#[tokio::test]
async fn seeded_experiments_repeat() {
    let catalog = rated(eval_hotel(30), 1.0);
    let server = serve(catalog.clone(), PublishOptions::default()).await;
    let page = format!("{}/page/type-level", server.url());
    let client = Client::new();
    let (a, ta) = hit_ratio_experiment(&client, &page, &catalog, 100, 7, false, 4)
        .await
        .unwrap();
    let (b, tb) = hit_ratio_experiment(&client, &page, &catalog, 100, 7, false, 8)
        .await
        .unwrap();
    assert_eq!(
        (a.booked, a.found_not_booked, a.dead_ends),
        (b.booked, b.found_not_booked, b.dead_ends)
    );
    let queries = |t: &[matpub::consumer::ResolutionTrace]| t.iter().map(|x| x.query.clone()).collect::<Vec<_>>();
    assert_eq!(queries(&ta), queries(&tb));
    server.shutdown().await.unwrap();
}
