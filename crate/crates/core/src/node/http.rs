//! HTTP + JSON API.

use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use tower_http::cors::CorsLayer;

use super::cluster::LocalCluster;
use super::service::{Accepted, Snapshot, SnapshotCell, WriteRequest};
use super::{views, ApiError};
use crate::consensus::WireMessage;
use crate::ledger::Verdict;

/// Largest block range returned by one `/chain/blocks` call.
pub const MAX_BLOCKS_PER_PAGE: usize = 1000;

pub const INTERNAL_MESSAGES_PATH: &str = "/internal/v1/messages";

/// What the router needs from a node: a write path and a read snapshot.
pub trait Backend: Send + Sync + 'static {
    fn submit(&self, req: WriteRequest) -> Result<Accepted, ApiError>;
    fn snapshot(&self) -> Arc<Snapshot>;
    /// Peer-to-peer consensus traffic. Unsupported by default.
    fn deliver(&self, _msg: WireMessage) -> Result<(), ApiError> {
        Err(ApiError::NotFound)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match self {
            ApiError::Rejected(_) | ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::NotFound => StatusCode::NOT_FOUND,
            ApiError::NotReady => StatusCode::SERVICE_UNAVAILABLE,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let mut body = serde_json::json!({ "error": self.code() });
        if let ApiError::BadRequest(detail) | ApiError::Internal(detail) = &self {
            body["detail"] = detail.clone().into();
        }
        (status, Json(body)).into_response()
    }
}

type Shared = Arc<dyn Backend>;

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(e.to_string()))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RegisterBody {
    verifier_id: String,
    display_name: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SubmitBody {
    sender: String,
    url: String,
    evidence_email: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct VoteBody {
    sender: String,
    verdict: Verdict,
}

#[derive(Deserialize)]
struct BlockRange {
    from: Option<u64>,
    to: Option<u64>,
}

async fn register(State(b): State<Shared>, body: Bytes) -> Result<Json<Accepted>, ApiError> {
    let r: RegisterBody = parse(&body)?;
    b.submit(WriteRequest::RegisterUser { verifier_id: r.verifier_id, display_name: r.display_name }).map(Json)
}

async fn submit_url(State(b): State<Shared>, body: Bytes) -> Result<Json<Accepted>, ApiError> {
    let r: SubmitBody = parse(&body)?;
    b.submit(WriteRequest::SubmitUrl { sender: r.sender, url: r.url, evidence_email: r.evidence_email }).map(Json)
}

async fn cast_vote(
    State(b): State<Shared>,
    Path(url_id): Path<String>,
    body: Bytes,
) -> Result<Json<Accepted>, ApiError> {
    let r: VoteBody = parse(&body)?;
    b.submit(WriteRequest::CastVote { sender: r.sender, url_id, verdict: r.verdict }).map(Json)
}

async fn lookup(State(b): State<Shared>, Path(url_id): Path<String>) -> Result<Response, ApiError> {
    let snap = b.snapshot();
    views::url_view(&snap.state, &url_id).map(|v| Json(v).into_response()).ok_or(ApiError::NotFound)
}

async fn timeline(State(b): State<Shared>, Path(url_id): Path<String>) -> Result<Response, ApiError> {
    let snap = b.snapshot();
    views::timeline(&snap.state, &url_id).map(|v| Json(v).into_response()).ok_or(ApiError::NotFound)
}

async fn graph(State(b): State<Shared>) -> Response {
    let snap = b.snapshot();
    Json(views::graph_export(&snap.state, &snap.derive)).into_response()
}

async fn blacklist(State(b): State<Shared>) -> Response {
    Json(views::blacklist(&b.snapshot().state)).into_response()
}

async fn chain_blocks(State(b): State<Shared>, Query(q): Query<BlockRange>) -> Response {
    Json(views::blocks(&b.snapshot().chain, q.from, q.to, MAX_BLOCKS_PER_PAGE)).into_response()
}

async fn verifier(State(b): State<Shared>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let snap = b.snapshot();
    views::verifier(&snap.state, &id).map(|v| Json(v).into_response()).ok_or(ApiError::NotFound)
}

async fn internal(State(b): State<Shared>, body: Bytes) -> Result<StatusCode, ApiError> {
    let msg: WireMessage = parse(&body)?;
    b.deliver(msg)?;
    Ok(StatusCode::NO_CONTENT)
}

pub fn router(backend: Arc<dyn Backend>) -> Router {
    Router::new()
        .route("/api/v1/users", post(register))
        .route("/api/v1/urls", post(submit_url))
        .route("/api/v1/urls/{url_id}", get(lookup))
        .route("/api/v1/urls/{url_id}/votes", post(cast_vote))
        .route("/api/v1/urls/{url_id}/timeline", get(timeline))
        .route("/api/v1/graph", get(graph))
        .route("/api/v1/blacklist", get(blacklist))
        .route("/api/v1/chain/blocks", get(chain_blocks))
        .route("/api/v1/verifiers/{id}", get(verifier))
        .route(INTERNAL_MESSAGES_PATH, post(internal))
        .layer(CorsLayer::permissive())
        .with_state(backend)
}

/// One member of an in-process [`LocalCluster`]. Writes lock the whole
/// cluster and run it until quiet, so a 200 response means the write is
/// committed everywhere (when the cluster is healthy).
pub struct ClusterMember {
    cluster: Arc<Mutex<LocalCluster>>,
    index: usize,
    snapshot: SnapshotCell,
}

impl ClusterMember {
    pub fn new(cluster: Arc<Mutex<LocalCluster>>, index: usize) -> Self {
        let snapshot = cluster.lock().unwrap_or_else(|e| e.into_inner()).node(index).snapshot_cell();
        ClusterMember { cluster, index, snapshot }
    }
}

impl Backend for ClusterMember {
    fn submit(&self, req: WriteRequest) -> Result<Accepted, ApiError> {
        self.cluster.lock().map_err(|_| ApiError::NotReady)?.submit(self.index, req)
    }

    fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.get()
    }
}
