//! The simulated booking engine: annotated pages per heuristic, the search
//! endpoint their actions point to, and a mutable inventory behind a single
//! lock.

pub mod search;

use std::io::{self, Write};
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use axum::body::{Body, Bytes};
use axum::extract::{Path, RawQuery, Request, State};
use axum::http::{HeaderName, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::serve::ListenerExt;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use tokio::sync::{mpsc, oneshot};
use tokio::task::JoinHandle;

use crate::annotate::{PageMode, BOOK_PATH};
use crate::catalog::{BookingOutcome, CanonicalIdError, Inventory, ProductCatalog};
use crate::error::{Error, Result};
use crate::heuristics::{Heuristic, PublishOptions};
use crate::publish::{page_items, write_items};

pub use search::{search, ConcreteOffer, SearchRequest, SearchResponse, DEFAULT_PER_PAGE, MAX_PER_PAGE};

pub const EPOCH_HEADER: &str = "x-inventory-epoch";
const CHUNK_BYTES: usize = 64 * 1024;

pub struct AppState {
    catalog: Arc<ProductCatalog>,
    inventory: Mutex<Inventory>,
    options: PublishOptions,
    endpoint_base: String,
}

impl AppState {
    pub fn new(catalog: Arc<ProductCatalog>, options: PublishOptions, endpoint_base: &str) -> Self {
        let inventory = Mutex::new(Inventory::new(&catalog));
        AppState {
            catalog,
            inventory,
            options,
            endpoint_base: endpoint_base.trim_end_matches('/').to_string(),
        }
    }

    pub fn catalog(&self) -> &Arc<ProductCatalog> {
        &self.catalog
    }

    pub fn options(&self) -> &PublishOptions {
        &self.options
    }

    pub fn endpoint_base(&self) -> &str {
        &self.endpoint_base
    }

    pub fn book_url(&self) -> String {
        format!("{}{BOOK_PATH}", self.endpoint_base)
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Inventory> {
        // A panicking holder cannot leave the inventory half-updated.
        self.inventory.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// An immutable copy of the current inventory.
    pub fn snapshot(&self) -> Inventory {
        self.lock().clone()
    }

    pub fn epoch(&self) -> u64 {
        self.lock().epoch()
    }

    pub fn book(&self, canonical_id: &str) -> std::result::Result<BookingResult, CanonicalIdError> {
        let v = self.catalog.parse_canonical_id(canonical_id);
        let mut inventory = self.lock();
        let (status, epoch_after) = match v {
            Ok(v) => match inventory.book(&self.catalog, &v) {
                BookingOutcome::Confirmed { epoch } => (BookingStatus::Confirmed, epoch),
                BookingOutcome::AlreadyBooked { epoch } => (BookingStatus::AlreadyBooked, epoch),
            },
            Err(CanonicalIdError::NotInSpace(_)) => (BookingStatus::UnknownOffer, inventory.epoch()),
            Err(e) => return Err(e),
        };
        Ok(BookingResult {
            status,
            canonical_id: canonical_id.to_string(),
            epoch_after,
        })
    }

    pub fn reset(&self, seed: Option<u64>) -> u64 {
        let seed = seed.unwrap_or(self.catalog.inventory_seed());
        self.lock().reset(seed);
        seed
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BookingStatus {
    Confirmed,
    AlreadyBooked,
    UnknownOffer,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BookingResult {
    pub status: BookingStatus,
    pub canonical_id: String,
    pub epoch_after: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BookRequest {
    canonical_id: String,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ResetRequest {
    seed: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ResetResponse {
    pub epoch: u64,
    pub seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

fn error_response(status: StatusCode, code: &str, message: impl Into<String>) -> Response {
    let body = ErrorBody {
        error: code.to_string(),
        message: message.into(),
    };
    (status, Json(body)).into_response()
}

fn from_error(e: &Error) -> Response {
    let (status, code) = match e {
        Error::Validation(_) => (StatusCode::BAD_REQUEST, "bad_request"),
        Error::PageNotFound { .. } => (StatusCode::NOT_FOUND, "page_not_found"),
        Error::CapExceeded { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "cap_exceeded"),
        Error::EmptyInventory | Error::PickerRejected(_) => (StatusCode::CONFLICT, "nothing_to_publish"),
        _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
    };
    error_response(status, code, e.to_string())
}

fn with_epoch(mut response: Response, epoch: u64) -> Response {
    response
        .headers_mut()
        .insert(HeaderName::from_static(EPOCH_HEADER), HeaderValue::from(epoch));
    response
}

fn query_pairs(raw: Option<&str>) -> Result<Vec<(String, String)>> {
    serde_urlencoded::from_str(raw.unwrap_or("")).map_err(|e| Error::Validation(format!("malformed query string: {e}")))
}

fn page_mode(pairs: &[(String, String)]) -> Result<PageMode> {
    let mut page = None;
    let mut per_page = None;
    for (k, v) in pairs {
        let slot = match k.as_str() {
            "page" => &mut page,
            "per_page" => &mut per_page,
            _ => return Err(Error::Validation(format!("unknown parameter {k:?}"))),
        };
        let n: u64 = v
            .parse()
            .map_err(|_| Error::Validation(format!("{k} must be a positive integer, got {v:?}")))?;
        if slot.replace(n).is_some() {
            return Err(Error::Validation(format!("duplicate parameter {k:?}")));
        }
    }
    if page == Some(0) {
        return Err(Error::Validation("page must be at least 1".into()));
    }
    if let Some(n) = per_page {
        if !(1..=MAX_PER_PAGE).contains(&n) {
            return Err(Error::Validation(format!(
                "per_page must be between 1 and {MAX_PER_PAGE}, got {n}"
            )));
        }
    }
    Ok(match (page, per_page) {
        (None, None) => PageMode::Bulk,
        (page, per_page) => PageMode::Paginated {
            page: page.unwrap_or(1),
            per_page: per_page.unwrap_or(DEFAULT_PER_PAGE),
        },
    })
}

/// Buffers page bytes into chunks for a streamed response body.
struct ChannelWriter {
    tx: mpsc::Sender<io::Result<Bytes>>,
    buf: Vec<u8>,
}

impl ChannelWriter {
    fn send(&mut self) -> io::Result<()> {
        if self.buf.is_empty() {
            return Ok(());
        }
        let chunk = Bytes::from(std::mem::replace(&mut self.buf, Vec::with_capacity(CHUNK_BYTES)));
        self.tx
            .blocking_send(Ok(chunk))
            .map_err(|_| io::Error::new(io::ErrorKind::BrokenPipe, "client went away"))
    }
}

impl Write for ChannelWriter {
    fn write(&mut self, data: &[u8]) -> io::Result<usize> {
        self.buf.extend_from_slice(data);
        if self.buf.len() >= CHUNK_BYTES {
            self.send()?;
        }
        Ok(data.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        self.send()
    }
}

async fn page_handler(
    State(state): State<Arc<AppState>>,
    Path(name): Path<String>,
    RawQuery(query): RawQuery,
) -> Response {
    let Ok(heuristic) = name.parse::<Heuristic>() else {
        return error_response(
            StatusCode::NOT_FOUND,
            "unknown_heuristic",
            format!("no heuristic named {name:?}"),
        );
    };
    let mode = match query_pairs(query.as_deref()).and_then(|p| page_mode(&p)) {
        Ok(m) => m,
        Err(e) => return from_error(&e),
    };
    let inventory = state.snapshot();
    let epoch = inventory.epoch();
    let (ready_tx, ready_rx) = oneshot::channel::<Result<()>>();
    let (tx, mut rx) = mpsc::channel::<io::Result<Bytes>>(8);
    let worker = state.clone();
    tokio::task::spawn_blocking(move || {
        let catalog = &worker.catalog;
        let (items, nav) = match page_items(heuristic, catalog, &inventory, &worker.options, mode) {
            Ok(x) => x,
            Err(e) => {
                let _ = ready_tx.send(Err(e));
                return;
            }
        };
        let _ = ready_tx.send(Ok(()));
        let out = ChannelWriter {
            tx: tx.clone(),
            buf: Vec::with_capacity(CHUNK_BYTES),
        };
        if let Err(e) = write_items(heuristic, catalog, items, nav, &worker.endpoint_base, out, |_| Ok(())) {
            tracing::warn!(%heuristic, error = %e, "page generation aborted");
            let _ = tx.blocking_send(Err(io::Error::other(e.to_string())));
        }
    });
    match ready_rx.await {
        Ok(Ok(())) => {}
        Ok(Err(e)) => return with_epoch(from_error(&e), epoch),
        Err(_) => return error_response(StatusCode::INTERNAL_SERVER_ERROR, "internal", "page worker failed"),
    }
    let stream = futures::stream::poll_fn(move |cx| rx.poll_recv(cx));
    let response = Response::builder()
        .header("content-type", "text/html; charset=utf-8")
        .body(Body::from_stream(stream))
        .expect("static response parts");
    with_epoch(response, epoch)
}

async fn search_handler(State(state): State<Arc<AppState>>, RawQuery(query): RawQuery) -> Response {
    let request = query_pairs(query.as_deref()).and_then(|pairs| {
        SearchRequest::from_pairs(&state.catalog, pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))
    });
    let request = match request {
        Ok(r) => r,
        Err(e) => return from_error(&e),
    };
    let inventory = state.snapshot();
    let worker = state.clone();
    let result =
        tokio::task::spawn_blocking(move || search(&worker.catalog, &inventory, &request, &worker.book_url())).await;
    match result {
        Ok(response) => {
            let epoch = response.epoch;
            with_epoch(Json(response).into_response(), epoch)
        }
        Err(_) => error_response(StatusCode::INTERNAL_SERVER_ERROR, "internal", "search worker failed"),
    }
}

async fn book_handler(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let request: BookRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => {
            return error_response(
                StatusCode::BAD_REQUEST,
                "bad_request",
                format!("malformed booking request: {e}"),
            )
        }
    };
    match state.book(&request.canonical_id) {
        Ok(result) => {
            let status = match result.status {
                BookingStatus::Confirmed => StatusCode::OK,
                BookingStatus::AlreadyBooked => StatusCode::CONFLICT,
                BookingStatus::UnknownOffer => StatusCode::NOT_FOUND,
            };
            let epoch = result.epoch_after;
            with_epoch((status, Json(result)).into_response(), epoch)
        }
        Err(e) => error_response(
            StatusCode::BAD_REQUEST,
            "bad_request",
            format!("malformed canonical id: {e}"),
        ),
    }
}

async fn reset_handler(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let request: ResetRequest = if body.iter().all(u8::is_ascii_whitespace) {
        ResetRequest::default()
    } else {
        match serde_json::from_slice(&body) {
            Ok(r) => r,
            Err(e) => {
                return error_response(
                    StatusCode::BAD_REQUEST,
                    "bad_request",
                    format!("malformed reset request: {e}"),
                )
            }
        }
    };
    let seed = state.reset(request.seed);
    tracing::info!(seed, "inventory reset");
    with_epoch(Json(ResetResponse { epoch: 0, seed }).into_response(), 0)
}

async fn index_handler(State(state): State<Arc<AppState>>) -> Response {
    let links: String = Heuristic::ALL
        .iter()
        .map(|h| format!("<li><a href=\"/page/{h}\">{h}</a></li>"))
        .collect();
    let html = format!(
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head><meta charset=\"utf-8\"><title>{name}</title></head>\n<body><h1>{name}</h1><ul>{links}</ul></body>\n</html>\n",
        name = crate::annotate::page::escape_html(&state.catalog.product().name),
    );
    ([("content-type", "text/html; charset=utf-8")], html).into_response()
}

async fn not_found() -> Response {
    error_response(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
}

/// Stamps every response with the epoch and logs it.
async fn observe(State(state): State<Arc<AppState>>, request: Request, next: Next) -> Response {
    let started = Instant::now();
    let method = request.method().clone();
    let path = request.uri().path().to_string();
    let mut response = next.run(request).await;
    if !response.headers().contains_key(EPOCH_HEADER) {
        response = with_epoch(response, state.epoch());
    }
    let epoch = response
        .headers()
        .get(EPOCH_HEADER)
        .and_then(|v| v.to_str().ok())
        .unwrap_or("")
        .to_string();
    tracing::info!(
        %method,
        %path,
        status = response.status().as_u16(),
        %epoch,
        elapsed_ms = started.elapsed().as_secs_f64() * 1e3,
        "request"
    );
    response
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/", get(index_handler))
        .route("/page/{heuristic}", get(page_handler))
        .route("/api/search", get(search_handler))
        .route("/api/book", post(book_handler))
        .route("/admin/reset", post(reset_handler))
        .fallback(not_found)
        .layer(middleware::from_fn_with_state(state.clone(), observe))
        .with_state(state)
}

/// A server running on the current tokio runtime.
pub struct ServerHandle {
    addr: SocketAddr,
    state: Arc<AppState>,
    shutdown: Option<oneshot::Sender<()>>,
    task: JoinHandle<io::Result<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn state(&self) -> &Arc<AppState> {
        &self.state
    }

    pub async fn shutdown(mut self) -> io::Result<()> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        self.task.await.map_err(io::Error::other)?
    }
}

/// Serves on `listener` in the background. Annotations point at
/// `public_url` when given, else at the bound address.
pub async fn spawn(
    listener: TcpListener,
    catalog: Arc<ProductCatalog>,
    options: PublishOptions,
    public_url: Option<&str>,
) -> io::Result<ServerHandle> {
    let addr = listener.local_addr()?;
    let base = public_url.map_or_else(|| format!("http://{addr}"), str::to_string);
    let state = Arc::new(AppState::new(catalog, options, &base));
    let (tx, rx) = oneshot::channel::<()>();
    let app = router(state.clone());
    // Streamed bodies go out in several writes; without this, Nagle plus
    // delayed ACKs add ~40 ms to some responses.
    let listener = listener.tap_io(|tcp| {
        let _ = tcp.set_nodelay(true);
    });
    let task = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await
    });
    Ok(ServerHandle {
        addr,
        state,
        shutdown: Some(tx),
        task,
    })
}
