//! Review API over file-backed state.
//!
//! State directory layout:
//!
//! ```text
//! <state>/queues/*.jsonl    review queues (read-only here)
//! <state>/decisions.jsonl   append-only adjudication log
//! <state>/metrics.jsonl     evaluation reports, optional
//! ```
//!
//! Nothing served before a decision is committed carries the item's side,
//! gold or model labels, or any score.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use triage_core::corpus::load_corpus;
use triage_core::evaluation::agreement_report;
use triage_core::jsonl;
use triage_core::triage::{
    context_bounds, read_queue, CommitReceipt, DecisionError, DecisionRequest, ItemStatus, Revealed,
};
use triage_core::{
    AgreementReport, DisagreementItem, MetricReport, PipelineConfig, ReviewDesk, ReviewQueue, Theme, Transcript,
};

pub const REVIEWER_HEADER: &str = "x-reviewer-id";

#[derive(Debug, thiserror::Error)]
pub enum StateError {
    #[error("{path}: {reason}")]
    Invalid { path: PathBuf, reason: String },
    #[error(transparent)]
    Decisions(#[from] DecisionError),
}

fn invalid(path: &Path, reason: impl ToString) -> StateError {
    StateError::Invalid {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    }
}

/// One reviewer's position in one queue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub queue_id: String,
    /// Index of the item last handed out.
    pub cursor: usize,
    pub reviewer_ids: Vec<String>,
    pub config: PipelineConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueSummary {
    pub queue_id: String,
    pub theme: Theme,
    pub pending_count: usize,
    pub decided_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceView {
    pub index: usize,
    pub text: String,
    pub in_passage: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemView {
    pub item_id: String,
    pub queue_id: String,
    pub transcript_id: String,
    pub theme: Theme,
    pub status: ItemStatus,
    pub passage_start: usize,
    pub passage_end: usize,
    pub context_start: usize,
    pub context_end: usize,
    pub sentences: Vec<SentenceView>,
    /// Present only once decided.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision: Option<CommitReceipt>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextView {
    pub item_id: String,
    pub extra: usize,
    pub context_start: usize,
    pub context_end: usize,
    pub sentences: Vec<SentenceView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextView {
    pub queue_id: String,
    pub position: Option<usize>,
    pub remaining: usize,
    pub item: Option<ItemView>,
}

/// Everything the service needs, loaded once at startup.
pub struct Service {
    cfg: PipelineConfig,
    transcripts: HashMap<String, Transcript>,
    queues: Vec<ReviewQueue>,
    /// item id -> (queue index, item index)
    index: HashMap<String, (usize, usize)>,
    desk: ReviewDesk,
    metrics: Vec<MetricReport>,
    sessions: Mutex<HashMap<(String, String), SessionState>>,
}

impl Service {
    /// Load and cross-check the corpus and state directory. Any inconsistency
    /// is an error; the service never starts on partial state.
    pub fn load(cfg: PipelineConfig, corpus_dir: &Path, state_dir: &Path) -> Result<Self, StateError> {
        let transcripts: HashMap<String, Transcript> = load_corpus(corpus_dir)
            .map_err(|e| invalid(corpus_dir, e))?
            .into_iter()
            .map(|t| (t.transcript_id.clone(), t))
            .collect();

        let queue_dir = state_dir.join("queues");
        let mut paths: Vec<PathBuf> = match std::fs::read_dir(&queue_dir) {
            Ok(rd) => rd
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
                .collect(),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(invalid(&queue_dir, e)),
        };
        paths.sort();

        let mut queues: Vec<ReviewQueue> = Vec::new();
        let mut index: HashMap<String, (usize, usize)> = HashMap::new();
        for path in &paths {
            let q = read_queue(path).map_err(|e| invalid(path, e))?;
            if queues.iter().any(|o| o.queue_id == q.queue_id) {
                return Err(invalid(path, format!("duplicate queue id {}", q.queue_id)));
            }
            for (k, item) in q.items.iter().enumerate() {
                let t = transcripts
                    .get(&item.transcript_id)
                    .ok_or_else(|| invalid(path, format!("item {} names unknown transcript {}", item.item_id, item.transcript_id)))?;
                if item.passage.end_sentence >= t.len() || item.passage.start_sentence > item.passage.end_sentence {
                    return Err(invalid(path, format!("item {} passage outside transcript", item.item_id)));
                }
                if let Some(&(qi, ii)) = index.get(&item.item_id) {
                    let other: &DisagreementItem = if qi == queues.len() { &q.items[ii] } else { &queues[qi].items[ii] };
                    if other.side != item.side || other.passage != item.passage {
                        return Err(invalid(path, format!("item id {} reused for a different item", item.item_id)));
                    }
                    continue;
                }
                index.insert(item.item_id.clone(), (queues.len(), k));
            }
            queues.push(q);
        }

        let desk = ReviewDesk::open(queues.iter().flat_map(|q| q.items.iter()), &state_dir.join("decisions.jsonl"))?;

        let metrics_path = state_dir.join("metrics.jsonl");
        let metrics = if metrics_path.exists() {
            jsonl::read_file(&metrics_path).map_err(|e| invalid(&metrics_path, e))?
        } else {
            Vec::new()
        };

        Ok(Service {
            cfg,
            transcripts,
            queues,
            index,
            desk,
            metrics,
            sessions: Mutex::new(HashMap::new()),
        })
    }

    pub fn desk(&self) -> &ReviewDesk {
        &self.desk
    }

    pub fn queue_summaries(&self) -> Vec<QueueSummary> {
        self.queues
            .iter()
            .map(|q| {
                let decided = q
                    .items
                    .iter()
                    .filter(|i| self.desk.status(&i.item_id) == Some(ItemStatus::Decided))
                    .count();
                QueueSummary {
                    queue_id: q.queue_id.clone(),
                    theme: q.theme,
                    pending_count: q.items.len() - decided,
                    decided_count: decided,
                }
            })
            .collect()
    }

    fn item(&self, item_id: &str) -> Option<(&ReviewQueue, &DisagreementItem)> {
        let &(qi, ii) = self.index.get(item_id)?;
        let q = &self.queues[qi];
        Some((q, &q.items[ii]))
    }

    fn sentences(&self, item: &DisagreementItem, (lo, hi): (usize, usize)) -> Vec<SentenceView> {
        let t = &self.transcripts[&item.transcript_id];
        t.sentences[lo..=hi]
            .iter()
            .map(|s| SentenceView {
                index: s.index,
                text: s.text.clone(),
                in_passage: item.passage.sentences().contains(&s.index),
            })
            .collect()
    }

    fn bounds(&self, item: &DisagreementItem, extra: usize) -> (usize, usize) {
        let n = self.transcripts[&item.transcript_id].len();
        context_bounds(item.passage.start_sentence, item.passage.end_sentence, extra, n)
    }

    fn view(&self, queue: &ReviewQueue, item: &DisagreementItem, context: usize) -> ItemView {
        let (lo, hi) = self.bounds(item, context);
        let decision = self.desk.current(&item.item_id).map(|record| CommitReceipt {
            record,
            revealed: Revealed::from(item.side),
        });
        ItemView {
            item_id: item.item_id.clone(),
            queue_id: queue.queue_id.clone(),
            transcript_id: item.transcript_id.clone(),
            theme: item.theme,
            status: if decision.is_some() { ItemStatus::Decided } else { ItemStatus::Pending },
            passage_start: item.passage.start_sentence,
            passage_end: item.passage.end_sentence,
            context_start: lo,
            context_end: hi,
            sentences: self.sentences(item, (lo, hi)),
            decision,
        }
    }

    pub fn item_view(&self, item_id: &str, context: Option<usize>) -> Option<ItemView> {
        let (q, item) = self.item(item_id)?;
        Some(self.view(q, item, context.unwrap_or(self.cfg.display_context)))
    }

    pub fn context_view(&self, item_id: &str, extra: usize) -> Option<ContextView> {
        let (_, item) = self.item(item_id)?;
        let (lo, hi) = self.bounds(item, extra);
        Some(ContextView {
            item_id: item_id.to_string(),
            extra,
            context_start: lo,
            context_end: hi,
            sentences: self.sentences(item, (lo, hi)),
        })
    }

    /// First pending item in queue order; updates the reviewer's session.
    pub fn next(&self, queue_id: &str, reviewer: &str) -> Option<NextView> {
        let q = self.queues.iter().find(|q| q.queue_id == queue_id)?;
        let pending: Vec<usize> = (0..q.items.len())
            .filter(|&k| self.desk.status(&q.items[k].item_id) != Some(ItemStatus::Decided))
            .collect();
        let position = pending.first().copied();
        if let Some(pos) = position {
            let mut sessions = self.sessions.lock().expect("session lock");
            let s = sessions
                .entry((reviewer.to_string(), queue_id.to_string()))
                .or_insert_with(|| SessionState {
                    queue_id: queue_id.to_string(),
                    cursor: pos,
                    reviewer_ids: vec![reviewer.to_string()],
                    config: self.cfg.clone(),
                });
            s.cursor = pos;
        }
        Some(NextView {
            queue_id: queue_id.to_string(),
            position,
            remaining: pending.len(),
            item: position.map(|k| self.view(q, &q.items[k], self.cfg.display_context)),
        })
    }

    pub fn session(&self, reviewer: &str, queue_id: &str) -> Option<SessionState> {
        self.sessions
            .lock()
            .expect("session lock")
            .get(&(reviewer.to_string(), queue_id.to_string()))
            .cloned()
    }

    pub fn agreement(&self, theme: Theme) -> AgreementReport {
        agreement_report(&self.desk.outcomes(), theme).expect("desk outcomes always carry a side")
    }

    pub fn metrics(&self) -> &[MetricReport] {
        &self.metrics
    }
}

#[derive(Debug)]
enum ApiError {
    NotFound(String),
    BadRequest(String),
    Unprocessable(String),
    Conflict(Box<triage_core::AdjudicationRecord>),
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, serde_json::json!({ "error": m })),
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, serde_json::json!({ "error": m })),
            ApiError::Unprocessable(m) => (StatusCode::UNPROCESSABLE_ENTITY, serde_json::json!({ "error": m })),
            ApiError::Conflict(r) => (
                StatusCode::CONFLICT,
                serde_json::json!({ "error": "item already decided", "record": r }),
            ),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, serde_json::json!({ "error": m })),
        };
        (status, Json(body)).into_response()
    }
}

impl From<DecisionError> for ApiError {
    fn from(e: DecisionError) -> Self {
        match e {
            DecisionError::NotFound(id) => ApiError::NotFound(format!("item {id} not found")),
            DecisionError::Conflict(r) => ApiError::Conflict(r),
            DecisionError::Validation(m) => ApiError::Unprocessable(m),
            e @ DecisionError::NotDecided(_) => ApiError::Unprocessable(e.to_string()),
            e => ApiError::Internal(e.to_string()),
        }
    }
}

type Shared = Arc<Service>;

fn reviewer(headers: &HeaderMap) -> Option<String> {
    headers
        .get(REVIEWER_HEADER)
        .and_then(|v| v.to_str().ok())
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(String::from)
}

async fn list_queues(State(s): State<Shared>) -> Json<Vec<QueueSummary>> {
    Json(s.queue_summaries())
}

async fn next_item(State(s): State<Shared>, UrlPath(id): UrlPath<String>, headers: HeaderMap) -> Result<Json<NextView>, ApiError> {
    let who = reviewer(&headers).unwrap_or_else(|| "anonymous".into());
    s.next(&id, &who)
        .map(Json)
        .ok_or_else(|| ApiError::NotFound(format!("queue {id} not found")))
}

#[derive(Deserialize)]
struct ContextParam {
    context: Option<usize>,
}

async fn get_item(
    State(s): State<Shared>,
    UrlPath(id): UrlPath<String>,
    Query(p): Query<ContextParam>,
) -> Result<Json<ItemView>, ApiError> {
    s.item_view(&id, p.context)
        .map(Json)
        .ok_or_else(|| ApiError::NotFound(format!("item {id} not found")))
}

#[derive(Deserialize)]
struct ExtraParam {
    #[serde(default)]
    extra: usize,
}

async fn get_context(
    State(s): State<Shared>,
    UrlPath(id): UrlPath<String>,
    Query(p): Query<ExtraParam>,
) -> Result<Json<ContextView>, ApiError> {
    s.context_view(&id, p.extra)
        .map(Json)
        .ok_or_else(|| ApiError::NotFound(format!("item {id} not found")))
}

async fn post_decision(
    State(s): State<Shared>,
    UrlPath(id): UrlPath<String>,
    headers: HeaderMap,
    body: Result<Json<DecisionRequest>, axum::extract::rejection::JsonRejection>,
) -> Result<Json<CommitReceipt>, ApiError> {
    let Json(mut req) = body.map_err(|e| ApiError::Unprocessable(e.body_text()))?;
    if let Some(r) = reviewer(&headers) {
        if !req.reviewers.contains(&r) {
            req.reviewers.insert(0, r);
        }
    }
    let receipt = tokio::task::spawn_blocking(move || s.desk.record_decision(&id, req))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))??;
    Ok(Json(receipt))
}

#[derive(Deserialize)]
struct ThemeParam {
    theme: Option<String>,
}

async fn get_agreement(State(s): State<Shared>, Query(p): Query<ThemeParam>) -> Result<Json<AgreementReport>, ApiError> {
    let raw = p.theme.ok_or_else(|| ApiError::BadRequest("theme is required".into()))?;
    let theme: Theme = raw.parse().map_err(|e: triage_core::theme::UnknownTheme| ApiError::BadRequest(e.to_string()))?;
    Ok(Json(s.agreement(theme)))
}

async fn get_metrics(State(s): State<Shared>) -> Json<Vec<MetricReport>> {
    Json(s.metrics().to_vec())
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/queues", get(list_queues))
        .route("/queues/{id}/next", get(next_item))
        .route("/items/{id}", get(get_item))
        .route("/items/{id}/context", get(get_context))
        .route("/items/{id}/decision", post(post_decision))
        .route("/reports/agreement", get(get_agreement))
        .route("/reports/metrics", get(get_metrics))
        .with_state(service)
}
