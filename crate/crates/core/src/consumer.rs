//! A B2B crawler: reads annotated pages, follows their search actions and
//! books, recording every round trip.

use std::collections::{BTreeMap, HashMap};
use std::time::{Duration, Instant};

use futures::stream::{self, StreamExt};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use reqwest::{StatusCode, Url};
use serde::{Deserialize, Serialize};

use crate::annotate::html::json_ld_blocks;
use crate::annotate::{parse_annotation, uri_template, ParsedAnnotation, BOOK_PATH, SEARCH_PATH};
use crate::catalog::ProductCatalog;
use crate::error::{Error, Result};
use crate::resolver::{BookingResult, BookingStatus, ConcreteOffer, SearchResponse};

pub const ATTEMPTS: u32 = 3;
pub const FIRST_BACKOFF: Duration = Duration::from_millis(100);
pub const DEFAULT_CONCURRENCY: usize = 8;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExtractionWarning {
    /// Position of the block among the page's JSON-LD blocks.
    pub block: usize,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Extraction {
    pub annotations: Vec<ParsedAnnotation>,
    pub warnings: Vec<ExtractionWarning>,
}

/// Parses every JSON-LD block of a page. Blocks that do not parse into an
/// offer annotation become warnings; other scripts are ignored.
pub fn extract_annotations(page: &[u8]) -> Extraction {
    let mut out = Extraction::default();
    for (block, body) in json_ld_blocks(page).enumerate() {
        let parsed = body
            .map_err(Error::from)
            .and_then(|b| serde_json::from_slice(&b).map_err(Error::from))
            .and_then(|doc| parse_annotation(&doc));
        match parsed {
            Ok(a) => out.annotations.push(a),
            Err(e) => out.warnings.push(ExtractionWarning {
                block,
                message: e.to_string(),
            }),
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Booked,
    FoundNotBooked,
    DeadEnd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub method: String,
    pub request_url: String,
    pub status: u16,
    /// Offers returned by a search; 1 for a confirmed booking, else 0.
    pub response_count: u64,
    pub elapsed_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolutionTrace {
    pub heuristic: String,
    pub query: BTreeMap<String, String>,
    pub steps: Vec<Step>,
    pub outcome: Outcome,
    pub api_calls: usize,
    pub offer: Option<ConcreteOffer>,
    pub booking: Option<BookingResult>,
}

/// HTTP access with bounded retries on transport failures. Application-level
/// answers, including empty ones, are never retried.
#[derive(Clone, Debug)]
pub struct Client {
    http: reqwest::Client,
}

impl Default for Client {
    fn default() -> Self {
        Self::new()
    }
}

impl Client {
    pub fn new() -> Self {
        Client {
            http: reqwest::Client::builder()
                .connect_timeout(Duration::from_secs(5))
                .build()
                .expect("static client configuration"),
        }
    }

    async fn send<F>(&self, url: &str, idempotent: bool, build: F) -> Result<reqwest::Response>
    where
        F: Fn(&reqwest::Client) -> reqwest::RequestBuilder,
    {
        let mut backoff = FIRST_BACKOFF;
        let mut attempt = 1;
        loop {
            match build(&self.http).send().await {
                Ok(r) => return Ok(r),
                // A request that may have reached the server is only
                // repeated when repeating it is harmless.
                Err(e) if attempt < ATTEMPTS && (idempotent || e.is_connect()) => {
                    tracing::debug!(url, attempt, error = %e, "retrying");
                    tokio::time::sleep(backoff).await;
                    backoff *= 2;
                    attempt += 1;
                }
                Err(e) => {
                    return Err(Error::Transport(format!("{url}: {e} (after {attempt} attempts)")));
                }
            }
        }
    }

    /// GETs a page and returns its body.
    pub async fn fetch_page(&self, url: &str) -> Result<Vec<u8>> {
        let mut response = self.send(url, true, |c| c.get(url)).await?;
        if !response.status().is_success() {
            return Err(Error::Protocol(format!("{url} answered {}", response.status())));
        }
        let mut body = Vec::new();
        while let Some(chunk) = response
            .chunk()
            .await
            .map_err(|e| Error::Transport(format!("{url}: {e}")))?
        {
            body.extend_from_slice(&chunk);
        }
        Ok(body)
    }

    /// GETs a URL and counts the body bytes without keeping them.
    pub async fn drain(&self, url: &str) -> Result<u64> {
        let mut response = self.send(url, true, |c| c.get(url)).await?;
        if !response.status().is_success() {
            return Err(Error::Protocol(format!("{url} answered {}", response.status())));
        }
        let mut bytes = 0u64;
        while let Some(chunk) = response
            .chunk()
            .await
            .map_err(|e| Error::Transport(format!("{url}: {e}")))?
        {
            bytes += chunk.len() as u64;
        }
        Ok(bytes)
    }

    pub async fn search(&self, url: &str) -> Result<(StatusCode, SearchResponse)> {
        let response = self.send(url, true, |c| c.get(url)).await?;
        let status = response.status();
        let text = response
            .text()
            .await
            .map_err(|e| Error::Transport(format!("{url}: {e}")))?;
        if !status.is_success() {
            return Err(Error::Protocol(format!("search {url} answered {status}: {text}")));
        }
        let body = serde_json::from_str(&text)
            .map_err(|e| Error::Protocol(format!("search {url} returned an unexpected body: {e}")))?;
        Ok((status, body))
    }

    pub async fn book(&self, url: &str, canonical_id: &str) -> Result<(StatusCode, BookingResult)> {
        let body = serde_json::json!({ "canonical_id": canonical_id });
        let response = self.send(url, false, |c| c.post(url).json(&body)).await?;
        let status = response.status();
        let text = response
            .text()
            .await
            .map_err(|e| Error::Transport(format!("{url}: {e}")))?;
        match serde_json::from_str::<BookingResult>(&text) {
            Ok(result) => Ok((status, result)),
            Err(_) => Err(Error::Protocol(format!("booking at {url} answered {status}: {text}"))),
        }
    }
}

/// What the client will do for one desired variation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Plan {
    /// Book a published, available concrete offer straight away.
    Book { book_url: String, canonical_id: String },
    /// Issue a fully constrained search.
    Search { url: String },
    /// Nothing on the page leads to the variation.
    Nothing,
}

fn key_of<'a, I: IntoIterator<Item = (&'a str, &'a str)>>(pairs: I) -> String {
    let mut v: Vec<(&str, &str)> = pairs.into_iter().collect();
    v.sort_unstable();
    v.iter()
        .map(|(n, x)| format!("{n}={x}"))
        .collect::<Vec<_>>()
        .join("\u{1f}")
}

/// A fetched page, indexed for repeated resolution.
#[derive(Clone, Debug)]
pub struct PageContext {
    pub page_url: String,
    pub heuristic: String,
    origin: String,
    pub extraction: Extraction,
    concrete: HashMap<String, usize>,
    elevated: Vec<usize>,
}

impl PageContext {
    pub fn new(page_url: &str, page: &[u8]) -> Result<Self> {
        let url = Url::parse(page_url).map_err(|e| Error::Validation(format!("page URL {page_url:?}: {e}")))?;
        let origin = url.origin().ascii_serialization();
        let heuristic = url
            .path_segments()
            .and_then(|mut s| s.next_back())
            .unwrap_or("")
            .to_string();
        let extraction = extract_annotations(page);
        let mut concrete = HashMap::new();
        let mut elevated = Vec::new();
        for (i, a) in extraction.annotations.iter().enumerate() {
            if a.is_concrete() {
                concrete
                    .entry(key_of(a.fixed.iter().map(|(n, v)| (n.as_str(), v.as_str()))))
                    .or_insert(i);
            }
            if a.action.is_some() {
                elevated.push(i);
            }
        }
        Ok(PageContext {
            page_url: page_url.to_string(),
            heuristic,
            origin,
            extraction,
            concrete,
            elevated,
        })
    }

    pub fn annotations(&self) -> &[ParsedAnnotation] {
        &self.extraction.annotations
    }

    fn point_search_url(&self, desired: &[(String, String)]) -> String {
        let query: Vec<String> = desired
            .iter()
            .map(|(n, v)| format!("{n}={}", uri_template::encode_component(v)))
            .collect();
        format!("{}{SEARCH_PATH}?{}", self.origin, query.join("&"))
    }

    /// Chooses how to reach `desired`, without any network access.
    pub fn plan(&self, desired: &[(String, String)], book: bool) -> Result<Plan> {
        let wanted: HashMap<&str, &str> = desired.iter().map(|(n, v)| (n.as_str(), v.as_str())).collect();
        if wanted.len() != desired.len() {
            return Err(Error::Validation("desired assignment names a dimension twice".into()));
        }
        if let Some(a) = self.annotations().first() {
            if let Some(missing) = a.dimension_names().find(|n| !wanted.contains_key(n)) {
                return Err(Error::Validation(format!(
                    "desired assignment lacks dimension {missing:?}"
                )));
            }
        }

        let key = key_of(wanted.iter().map(|(n, v)| (*n, *v)));
        if let Some(&i) = self.concrete.get(&key) {
            let a = &self.annotations()[i];
            match (&a.action, &a.sku) {
                (None, Some(sku)) if book && a.available => {
                    return Ok(Plan::Book {
                        book_url: format!("{}{BOOK_PATH}", self.origin),
                        canonical_id: sku.clone(),
                    })
                }
                (None, _) => {
                    return Ok(Plan::Search {
                        url: self.point_search_url(desired),
                    })
                }
                (Some(_), _) => {}
            }
        }

        // An elevated annotation leads to `desired` when every dimension is
        // either fixed to the desired value or an input of its action. The
        // one agreeing on the most fixed values wins; ties by fixed set.
        let score = |a: &ParsedAnnotation| -> Option<usize> {
            let action = a.action.as_ref()?;
            let is_input = |n: &str| action.inputs.iter().any(|p| p.name == n);
            let mut agreeing = 0;
            for (n, v) in &a.fixed {
                if wanted.get(n.as_str()) == Some(&v.as_str()) {
                    agreeing += 1;
                } else if !is_input(n) {
                    return None;
                }
            }
            a.ranges.iter().all(|(n, _)| is_input(n)).then_some(agreeing)
        };
        let best = self
            .elevated
            .iter()
            .map(|&i| &self.annotations()[i])
            .filter_map(|a| score(a).map(|s| (s, a)))
            .min_by(|(sa, a), (sb, b)| sb.cmp(sa).then_with(|| a.fixed_key().cmp(&b.fixed_key())))
            .map(|(_, a)| a);
        match best {
            Some(a) => {
                let template = &a.action.as_ref().expect("elevated").target_url_template;
                let url = uri_template::expand(template, |n| wanted.get(n).map(|v| v.to_string()))?;
                Ok(Plan::Search { url })
            }
            None => Ok(Plan::Nothing),
        }
    }
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

async fn timed_search(client: &Client, url: &str, steps: &mut Vec<Step>) -> Result<SearchResponse> {
    let started = Instant::now();
    let (status, response) = client.search(url).await?;
    steps.push(Step {
        method: "GET".into(),
        request_url: url.to_string(),
        status: status.as_u16(),
        response_count: response.offers.len() as u64,
        elapsed_ms: ms(started.elapsed()),
    });
    Ok(response)
}

async fn timed_book(client: &Client, url: &str, id: &str, steps: &mut Vec<Step>) -> Result<BookingResult> {
    let started = Instant::now();
    let (status, result) = client.book(url, id).await?;
    steps.push(Step {
        method: "POST".into(),
        request_url: url.to_string(),
        status: status.as_u16(),
        response_count: u64::from(result.status == BookingStatus::Confirmed),
        elapsed_ms: ms(started.elapsed()),
    });
    Ok(result)
}

/// Resolves `desired` against an already fetched page.
pub async fn resolve_on(
    client: &Client,
    context: &PageContext,
    desired: &[(String, String)],
    book: bool,
) -> Result<ResolutionTrace> {
    let mut steps = Vec::new();
    let mut offer = None;
    let mut booking = None;
    let outcome = match context.plan(desired, book)? {
        Plan::Nothing => Outcome::DeadEnd,
        Plan::Book { book_url, canonical_id } => {
            let result = timed_book(client, &book_url, &canonical_id, &mut steps).await?;
            let confirmed = result.status == BookingStatus::Confirmed;
            booking = Some(result);
            if confirmed {
                Outcome::Booked
            } else {
                // The page was stale; verify like any other client would.
                let url = context.point_search_url(desired);
                let response = timed_search(client, &url, &mut steps).await?;
                settle(client, response, book, &mut steps, &mut offer, &mut booking).await?
            }
        }
        Plan::Search { url } => {
            let response = timed_search(client, &url, &mut steps).await?;
            settle(client, response, book, &mut steps, &mut offer, &mut booking).await?
        }
    };
    Ok(ResolutionTrace {
        heuristic: context.heuristic.clone(),
        query: desired.iter().cloned().collect(),
        api_calls: steps.len(),
        steps,
        outcome,
        offer,
        booking,
    })
}

async fn settle(
    client: &Client,
    response: SearchResponse,
    book: bool,
    steps: &mut Vec<Step>,
    offer: &mut Option<ConcreteOffer>,
    booking: &mut Option<BookingResult>,
) -> Result<Outcome> {
    let Some(found) = response.offers.into_iter().next() else {
        return Ok(Outcome::DeadEnd);
    };
    let outcome = if book {
        let result = timed_book(client, &found.book_url, &found.canonical_id, steps).await?;
        let confirmed = result.status == BookingStatus::Confirmed;
        *booking = Some(result);
        if confirmed {
            Outcome::Booked
        } else {
            Outcome::FoundNotBooked
        }
    } else {
        Outcome::FoundNotBooked
    };
    *offer = Some(found);
    Ok(outcome)
}

/// Fetches the page and resolves one desired variation.
pub async fn resolve(
    client: &Client,
    page_url: &str,
    desired: &[(String, String)],
    book: bool,
) -> Result<ResolutionTrace> {
    let page = client.fetch_page(page_url).await?;
    let context = PageContext::new(page_url, &page)?;
    resolve_on(client, &context, desired, book).await
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub heuristic: String,
    pub n_queries: usize,
    pub booked: usize,
    pub found_not_booked: usize,
    pub dead_ends: usize,
    pub hit_ratio: f64,
    pub dead_end_rate: f64,
    pub mean_api_calls: f64,
}

impl ExperimentSummary {
    pub fn from_traces(heuristic: &str, traces: &[ResolutionTrace]) -> Self {
        let count = |o: Outcome| traces.iter().filter(|t| t.outcome == o).count();
        let n = traces.len();
        let booked = count(Outcome::Booked);
        let found_not_booked = count(Outcome::FoundNotBooked);
        let dead_ends = count(Outcome::DeadEnd);
        let rate = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
        ExperimentSummary {
            heuristic: heuristic.to_string(),
            n_queries: n,
            booked,
            found_not_booked,
            dead_ends,
            hit_ratio: rate(booked + found_not_booked),
            dead_end_rate: rate(dead_ends),
            mean_api_calls: if n == 0 {
                0.0
            } else {
                traces.iter().map(|t| t.api_calls).sum::<usize>() as f64 / n as f64
            },
        }
    }
}

/// `n` distinct variations drawn uniformly with a seeded generator, as
/// desired assignments.
pub fn sample_queries(catalog: &ProductCatalog, n: usize, seed: u64) -> Result<Vec<Vec<(String, String)>>> {
    let total = catalog.count_variations();
    if n == 0 {
        return Err(Error::Validation("at least one query is required".into()));
    }
    if n as u64 > total {
        return Err(Error::Validation(format!(
            "cannot draw {n} distinct queries from {total} variations"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ranks = rand::seq::index::sample(&mut rng, total as usize, n);
    Ok(ranks
        .into_iter()
        .map(|r| {
            let v = catalog.variation_at(r as u64).expect("rank below count");
            catalog
                .assignments(&v)
                .into_iter()
                .map(|(k, x)| (k.to_string(), x.to_string()))
                .collect()
        })
        .collect())
}

/// Resolves seeded random queries against one page fetch, at most
/// `concurrency` at a time. Traces come back in query order.
pub async fn hit_ratio_experiment(
    client: &Client,
    page_url: &str,
    catalog: &ProductCatalog,
    n_queries: usize,
    seed: u64,
    book: bool,
    concurrency: usize,
) -> Result<(ExperimentSummary, Vec<ResolutionTrace>)> {
    let queries = sample_queries(catalog, n_queries, seed)?;
    let page = client.fetch_page(page_url).await?;
    let context = PageContext::new(page_url, &page)?;
    drop(page);
    let traces: Vec<ResolutionTrace> = stream::iter(queries.iter())
        .map(|q| resolve_on(client, &context, q, book))
        .buffered(concurrency.max(1))
        .collect::<Vec<_>>()
        .await
        .into_iter()
        .collect::<Result<_>>()?;
    Ok((ExperimentSummary::from_traces(&context.heuristic, &traces), traces))
}
