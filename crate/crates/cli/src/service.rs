//! Interactive browsing sessions over HTTP.
//!
//! All endpoints live under `/v1`, speak `application/json`, and report
//! failures as `{"error": {"code", "message"}}`. Session state is in memory
//! with idle eviction; each session sits behind its own lock so updates to
//! one session are serialized while different sessions proceed independently.

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use softfacet::loglearn::io::{read_catalog, read_json, read_model, read_relevance};
use softfacet::loglearn::TrainedModel;
use softfacet::rerank::{normalize_prior, remove_last_filter, rerank, QueryModels};
use softfacet::{BrowseSession, Catalog, Error as CoreError, FilterSpec, Mode, RankedList};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub listen: String,
    pub model_path: PathBuf,
    pub catalog_path: PathBuf,
    /// Optional JSON-lines file of per-query relevance scores.
    pub relevance_path: Option<PathBuf>,
    pub page_size: usize,
    pub default_mode: Mode,
    pub session_ttl_secs: u64,
    /// Width of the price buckets advertised on the facet panel.
    pub price_bucket_width: f64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8080".into(),
            model_path: PathBuf::from("model.json"),
            catalog_path: PathBuf::from("catalog.jsonl"),
            relevance_path: None,
            page_size: 20,
            default_mode: Mode::Soft,
            session_ttl_secs: 30 * 60,
            price_bucket_width: 50.0,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{0}")]
    Invalid(String),
}

impl ServiceConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Ok(read_json(path)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.page_size == 0 {
            return Err(ConfigError::Invalid("page_size must be at least 1".into()));
        }
        if !(self.price_bucket_width > 0.0) {
            return Err(ConfigError::Invalid(
                "price_bucket_width must be positive".into(),
            ));
        }
        for p in [&self.model_path, &self.catalog_path]
            .into_iter()
            .chain(self.relevance_path.as_ref())
        {
            if !p.exists() {
                return Err(ConfigError::Invalid(format!(
                    "{} does not exist",
                    p.display()
                )));
            }
        }
        self.listen
            .parse::<SocketAddr>()
            .map_err(|e| ConfigError::Invalid(format!("listen address {:?}: {e}", self.listen)))?;
        Ok(())
    }
}

/// Read-only state shared by every request.
pub struct Engine {
    pub catalog: Catalog,
    pub model: TrainedModel,
    pub relevance: BTreeMap<String, BTreeMap<String, f64>>,
    pub page_size: usize,
    pub default_mode: Mode,
    pub session_ttl: Duration,
    pub price_bucket_width: f64,
}

impl Engine {
    pub fn load(config: &ServiceConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let catalog = read_catalog(&config.catalog_path)?;
        let model = read_model(&config.model_path)?;
        model.check_catalog(&catalog)?;
        let relevance = match &config.relevance_path {
            Some(p) => read_relevance(p)?,
            None => BTreeMap::new(),
        };
        Ok(Self {
            catalog,
            model,
            relevance,
            page_size: config.page_size,
            default_mode: config.default_mode,
            session_ttl: Duration::from_secs(config.session_ttl_secs),
            price_bucket_width: config.price_bucket_width,
        })
    }

    /// Relevance scores for a query: the relevance file when it has the
    /// query, otherwise `1 + number of query tokens found in the title`.
    fn scores(&self, query: &str) -> Vec<(String, f64)> {
        if let Some(s) = self.relevance.get(query) {
            let out: Vec<(String, f64)> = self
                .catalog
                .items()
                .iter()
                .filter_map(|it| s.get(&it.id).map(|v| (it.id.clone(), *v)))
                .collect();
            if out.iter().any(|(_, v)| *v > 0.0) {
                return out;
            }
        }
        let tokens: Vec<String> = query.split_whitespace().map(str::to_lowercase).collect();
        self.catalog
            .items()
            .iter()
            .map(|it| {
                let title = it.title.to_lowercase();
                let hits = tokens.iter().filter(|t| title.contains(t.as_str())).count();
                (it.id.clone(), 1.0 + hits as f64)
            })
            .collect()
    }
}

struct SessionSlot {
    session: BrowseSession,
    models: Arc<QueryModels>,
    trained: bool,
    last_access: Instant,
}

pub struct AppState {
    engine: Arc<Engine>,
    sessions: Mutex<HashMap<String, Arc<tokio::sync::Mutex<SessionSlot>>>>,
    next_id: AtomicU64,
}

impl AppState {
    pub fn new(engine: Engine) -> Arc<Self> {
        Arc::new(Self {
            engine: Arc::new(engine),
            sessions: Mutex::new(HashMap::new()),
            next_id: AtomicU64::new(1),
        })
    }

    fn evict_expired(&self) {
        let ttl = self.engine.session_ttl;
        let mut map = self.sessions.lock().expect("session map poisoned");
        map.retain(|_, slot| match slot.try_lock() {
            Ok(s) => s.last_access.elapsed() < ttl,
            // in use right now
            Err(_) => true,
        });
    }

    fn slot(&self, id: &str) -> Option<Arc<tokio::sync::Mutex<SessionSlot>>> {
        self.sessions
            .lock()
            .expect("session map poisoned")
            .get(id)
            .cloned()
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().expect("session map poisoned").len()
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/catalog/facets", get(facets))
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(get_session))
        .route("/v1/sessions/{id}/filters", post(add_filter))
        .route("/v1/sessions/{id}/filters/last", delete(remove_filter))
        .with_state(state)
}

pub async fn serve(config: &ServiceConfig) -> Result<(), Box<dyn std::error::Error>> {
    let engine = Engine::load(config)?;
    let addr: SocketAddr = config.listen.parse()?;
    let state = AppState::new(engine);
    let sweeper = state.clone();
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(Duration::from_secs(60));
        loop {
            tick.tick().await;
            sweeper.evict_expired();
        }
    });
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    fn not_found(id: &str) -> Self {
        Self::new(
            StatusCode::NOT_FOUND,
            "not_found",
            format!("unknown session {id:?}"),
        )
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({"error": {"code": self.code, "message": self.message}});
        (self.status, Json(body)).into_response()
    }
}

impl From<CoreError> for ApiError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Degenerate(_) => {
                Self::new(StatusCode::CONFLICT, "empty_result", e.to_string())
            }
            CoreError::UnknownBrand(_)
            | CoreError::InvalidParameter(_)
            | CoreError::NonFinite(_)
            | CoreError::FilterKind { .. }
            | CoreError::BrandIndex { .. } => Self::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "invalid_filter",
                e.to_string(),
            ),
            _ => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PageEntry {
    pub item_id: String,
    pub title: String,
    pub brand: String,
    pub price: f64,
    pub score: f64,
    pub within_filter: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AppliedFilter {
    #[serde(flatten)]
    pub filter: FilterSpec,
    pub mode: Mode,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub query: String,
    pub untrained: bool,
    pub filters: Vec<AppliedFilter>,
    pub total: usize,
    pub entries: Vec<PageEntry>,
}

fn view(engine: &Engine, slot: &SessionSlot) -> Result<SessionView, ApiError> {
    let ranked: RankedList = slot.session.ranked(&engine.catalog)?;
    let vocab = engine.catalog.vocab();
    let entries = ranked
        .entries
        .iter()
        .take(engine.page_size)
        .map(|e| {
            let item = engine
                .catalog
                .get(&e.item_id)
                .expect("ranked ids come from the catalog");
            PageEntry {
                item_id: e.item_id.clone(),
                title: item.title.clone(),
                brand: vocab.name(item.brand_index).unwrap_or_default().to_string(),
                price: item.price,
                score: e.score,
                within_filter: e.within_filter,
            }
        })
        .collect();
    let filters = slot
        .session
        .applied_filters
        .iter()
        .map(|(f, mode)| {
            Ok(AppliedFilter {
                filter: f.to_spec(vocab)?,
                mode: *mode,
            })
        })
        .collect::<Result<Vec<_>, CoreError>>()?;
    Ok(SessionView {
        session_id: slot.session.session_id.clone(),
        query: slot.session.query.clone(),
        untrained: !slot.trained,
        filters,
        total: ranked.len(),
        entries,
    })
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| {
        let status = if e.is_data() {
            StatusCode::UNPROCESSABLE_ENTITY
        } else {
            StatusCode::BAD_REQUEST
        };
        ApiError::new(status, "malformed_request", e.to_string())
    })
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({"status": "ok"}))
}

async fn facets(State(state): State<Arc<AppState>>) -> Json<serde_json::Value> {
    let engine = &state.engine;
    let width = engine.price_bucket_width;
    let (min, max) = engine
        .catalog
        .items()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), it| {
            (lo.min(it.price), hi.max(it.price))
        });
    let mut buckets = Vec::new();
    if min.is_finite() {
        let mut lo = (min / width).floor() * width;
        while lo <= max {
            buckets.push(json!({"lo": lo, "hi": lo + width}));
            lo += width;
        }
    }
    Json(json!({
        "brands": engine.catalog.vocab().names(),
        "price_buckets": buckets,
        "items": engine.catalog.len(),
    }))
}

#[derive(Deserialize)]
struct CreateRequest {
    query: String,
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let req: CreateRequest = parse_body(&body)?;
    let query = req.query.trim().to_string();
    if query.is_empty() {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "empty_query",
            "query must not be empty",
        ));
    }
    let engine = &state.engine;
    if engine.catalog.is_empty() {
        return Err(ApiError::new(
            StatusCode::NOT_FOUND,
            "no_catalog",
            "catalog is empty",
        ));
    }
    state.evict_expired();
    let trained = engine.model.has_query(&query);
    let prior = normalize_prior(&engine.scores(&query))?;
    let models = Arc::new(engine.model.query_models(&query, &engine.catalog)?);
    let id = format!("s{}", state.next_id.fetch_add(1, Ordering::SeqCst));
    let slot = SessionSlot {
        session: BrowseSession::new(id.clone(), query, prior),
        models,
        trained,
        last_access: Instant::now(),
    };
    let body = view(engine, &slot)?;
    state
        .sessions
        .lock()
        .expect("session map poisoned")
        .insert(id, Arc::new(tokio::sync::Mutex::new(slot)));
    let status = if trained {
        StatusCode::CREATED
    } else {
        StatusCode::OK
    };
    Ok((status, Json(body)).into_response())
}

async fn get_session(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<SessionView>, ApiError> {
    let slot = state.slot(&id).ok_or_else(|| ApiError::not_found(&id))?;
    let mut slot = slot.lock().await;
    slot.last_access = Instant::now();
    Ok(Json(view(&state.engine, &slot)?))
}

#[derive(Deserialize)]
struct FilterRequest {
    #[serde(flatten)]
    filter: FilterSpec,
    #[serde(default)]
    mode: Option<Mode>,
}

async fn add_filter(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<Json<SessionView>, ApiError> {
    let slot = state.slot(&id).ok_or_else(|| ApiError::not_found(&id))?;
    let req: FilterRequest = parse_body(&body)?;
    let engine = &state.engine;
    let filter = req.filter.resolve(engine.catalog.vocab())?;
    let mode = req.mode.unwrap_or(engine.default_mode);
    let mut slot = slot.lock().await;
    let (_, posterior) = rerank(
        &slot.session.current_propensity,
        &filter,
        slot.models.as_ref(),
        &engine.catalog,
        mode,
    )?;
    slot.session.current_propensity = posterior;
    slot.session.applied_filters.push((filter, mode));
    slot.last_access = Instant::now();
    Ok(Json(view(engine, &slot)?))
}

async fn remove_filter(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<SessionView>, ApiError> {
    let slot = state.slot(&id).ok_or_else(|| ApiError::not_found(&id))?;
    let mut slot = slot.lock().await;
    if slot.session.applied_filters.is_empty() {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "no_filters",
            "no filter to remove",
        ));
    }
    let engine = &state.engine;
    slot.session = remove_last_filter(&slot.session, slot.models.as_ref(), &engine.catalog)?;
    slot.last_access = Instant::now();
    Ok(Json(view(engine, &slot)?))
}
