//! Disagreement queues and blinded adjudication decisions.
//!
//! A queue collects, per transcript, the highest-scored predicted passages
//! that the gold annotation missed (FP side) and the lowest-scored gold
//! passages the model missed (FN side). Reviewers see neither the side nor
//! any score until they commit a decision.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::annotations::GoldLabelSet;
use crate::config::PipelineConfig;
use crate::evaluation::ReviewOutcome;
use crate::jsonl::{self, RecordError};
use crate::passages::{Origin, Passage};
use crate::pipeline::export::{transcript_rng, Label};
use crate::pipeline::{ScoreTable, ScorerMeta};
use crate::scalar::Scalar;
use crate::theme::Theme;

/// Which way the gold annotation and the model disagree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    /// Gold negative, model positive.
    #[serde(rename = "FP")]
    FalsePositive,
    /// Gold positive, model negative.
    #[serde(rename = "FN")]
    FalseNegative,
}

impl Side {
    pub fn code(self) -> &'static str {
        match self {
            Side::FalsePositive => "FP",
            Side::FalseNegative => "FN",
        }
    }

    /// (gold label, model label)
    pub fn labels(self) -> (Label, Label) {
        match self {
            Side::FalsePositive => (Label::Negative, Label::Positive),
            Side::FalseNegative => (Label::Positive, Label::Negative),
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Side {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "FP" => Ok(Side::FalsePositive),
            "FN" => Ok(Side::FalseNegative),
            other => Err(format!("unknown side {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Positive,
    Negative,
    Undecided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReasonCategory {
    UnrelatedToTheme,
    NotAboutDefendant,
    NeutralOrFactual,
    NeedsLongerContext,
    DefenseCounterargument,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemStatus {
    Pending,
    Decided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisagreementItem<S> {
    pub item_id: String,
    pub transcript_id: String,
    pub theme: Theme,
    pub passage: Passage<S>,
    pub side: Side,
    pub rank_score: S,
    /// Inclusive display bounds: the passage plus default context, clipped.
    pub context: (usize, usize),
    pub status: ItemStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueProvenance {
    pub config: PipelineConfig,
    pub seed: u64,
    pub scorer_meta: Vec<ScorerMeta>,
    #[serde(default)]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewQueue<S> {
    pub queue_id: String,
    pub theme: Theme,
    pub items: Vec<DisagreementItem<S>>,
    pub provenance: QueueProvenance,
}

/// Everything the queue needs about one transcript.
#[derive(Debug, Clone, Copy)]
pub struct TranscriptEvidence<'a, S> {
    pub transcript_id: &'a str,
    pub sentence_count: usize,
    pub predicted: &'a [Passage<S>],
    pub gold_passages: &'a [Passage<S>],
    pub gold: &'a GoldLabelSet,
    pub table: &'a ScoreTable<S>,
}

/// Inclusive sentence range `extra` sentences either side of a passage, clipped.
pub fn context_bounds(start: usize, end: usize, extra: usize, sentence_count: usize) -> (usize, usize) {
    let last = sentence_count.saturating_sub(1);
    (start.saturating_sub(extra), end.saturating_add(extra).min(last))
}

/// Opaque, deterministic id: reveals nothing about side or score.
pub fn item_id(theme: Theme, transcript_id: &str, start: usize, end: usize, origin: Origin) -> String {
    let mut h = Sha256::new();
    h.update(format!("{}\u{1f}{transcript_id}\u{1f}{start}\u{1f}{end}\u{1f}{origin:?}", theme.code()).as_bytes());
    h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn cmp_scores<S: Scalar>(a: S, b: S) -> std::cmp::Ordering {
    a.partial_cmp(&b).unwrap_or(std::cmp::Ordering::Equal)
}

/// FP candidates: predicted passages with no gold-positive sentence, best first.
pub fn fp_candidates<'a, S: Scalar>(predicted: &'a [Passage<S>], gold: &GoldLabelSet) -> Vec<&'a Passage<S>> {
    let mut c: Vec<&Passage<S>> = predicted
        .iter()
        .filter(|p| !gold.any_positive(p.theme, p.start_sentence, p.end_sentence))
        .collect();
    c.sort_by(|a, b| cmp_scores(b.peak_score, a.peak_score).then(a.start_sentence.cmp(&b.start_sentence)));
    c
}

/// FN candidates: gold passages with every sentence at or below the grouping
/// threshold, lowest peak first. Peaks are taken from `table`.
pub fn fn_candidates<S: Scalar>(gold_passages: &[Passage<S>], table: &ScoreTable<S>, cfg: &PipelineConfig) -> Vec<Passage<S>> {
    let group = S::from_f64(cfg.group_threshold);
    let mut c: Vec<Passage<S>> = gold_passages
        .iter()
        .map(|p| Passage {
            peak_score: table.peak(p.start_sentence, p.end_sentence),
            ..p.clone()
        })
        .filter(|p| p.peak_score <= group)
        .collect();
    c.sort_by(|a, b| cmp_scores(a.peak_score, b.peak_score).then(a.start_sentence.cmp(&b.start_sentence)));
    c
}

pub fn build_queue<S: Scalar>(
    evidence: &[TranscriptEvidence<'_, S>],
    cfg: &PipelineConfig,
    theme: Theme,
    scorer_meta: Vec<ScorerMeta>,
) -> ReviewQueue<S> {
    let mut sorted: Vec<&TranscriptEvidence<S>> = evidence.iter().collect();
    sorted.sort_by_key(|e| e.transcript_id);
    let fn_take = cfg.fn_queue_min.min(cfg.fn_queue_max);
    let mut notes = Vec::new();
    let mut items = Vec::new();

    for e in sorted {
        let make = |p: &Passage<S>, side: Side| DisagreementItem {
            item_id: item_id(theme, e.transcript_id, p.start_sentence, p.end_sentence, p.origin),
            transcript_id: e.transcript_id.to_string(),
            theme,
            passage: p.clone(),
            side,
            rank_score: p.peak_score,
            context: context_bounds(p.start_sentence, p.end_sentence, cfg.display_context, e.sentence_count),
            status: ItemStatus::Pending,
        };
        let theme_predicted: Vec<Passage<S>> = e.predicted.iter().filter(|p| p.theme == theme).cloned().collect();
        let theme_gold: Vec<Passage<S>> = e.gold_passages.iter().filter(|p| p.theme == theme).cloned().collect();
        let fp = fp_candidates(&theme_predicted, e.gold);
        let fns = fn_candidates(&theme_gold, e.table, cfg);
        if fp.is_empty() {
            notes.push(format!("{}: no FP candidates", e.transcript_id));
        }
        if fns.is_empty() {
            notes.push(format!("{}: no FN candidates", e.transcript_id));
        }
        let mut segment: Vec<DisagreementItem<S>> = fp
            .into_iter()
            .take(cfg.fp_queue_size)
            .map(|p| make(p, Side::FalsePositive))
            .chain(fns.iter().take(fn_take).map(|p| make(p, Side::FalseNegative)))
            .collect();
        segment.shuffle(&mut transcript_rng(cfg.rng_seed, e.transcript_id));
        items.extend(segment);
    }

    ReviewQueue {
        queue_id: format!("{}-seed{}", theme.code(), cfg.rng_seed),
        theme,
        items,
        provenance: QueueProvenance {
            config: cfg.clone(),
            seed: cfg.rng_seed,
            scorer_meta,
            notes,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("item {item_id}: {problem}")]
pub struct IntegrityError {
    pub item_id: String,
    pub problem: String,
}

/// Re-check the side invariants of every item against gold labels.
pub fn verify_queue<S>(queue: &ReviewQueue<S>, gold: &BTreeMap<String, GoldLabelSet>) -> Result<(), IntegrityError> {
    for item in &queue.items {
        let p = &item.passage;
        let hit = gold
            .get(&item.transcript_id)
            .is_some_and(|g| g.any_positive(item.theme, p.start_sentence, p.end_sentence));
        let ok = match item.side {
            Side::FalsePositive => !hit,
            Side::FalseNegative => hit,
        };
        if !ok {
            return Err(IntegrityError {
                item_id: item.item_id.clone(),
                problem: format!("{} item overlaps gold positives: {hit}", item.side),
            });
        }
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum QueueRecord {
    Header {
        queue_id: String,
        theme: Theme,
        provenance: QueueProvenance,
    },
    Item(DisagreementItem<f64>),
}

pub fn write_queue(queue: &ReviewQueue<f64>, path: &Path) -> Result<(), RecordError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| RecordError::io(parent, e))?;
    }
    let records: Vec<QueueRecord> = std::iter::once(QueueRecord::Header {
        queue_id: queue.queue_id.clone(),
        theme: queue.theme,
        provenance: queue.provenance.clone(),
    })
    .chain(queue.items.iter().cloned().map(QueueRecord::Item))
    .collect();
    jsonl::write_file(path, &records)
}

pub fn read_queue(path: &Path) -> Result<ReviewQueue<f64>, QueueFileError> {
    let mut records = jsonl::read_file::<QueueRecord>(path)?.into_iter();
    let Some(QueueRecord::Header { queue_id, theme, provenance }) = records.next() else {
        return Err(QueueFileError::MissingHeader(path.to_path_buf()));
    };
    let items = records
        .map(|r| match r {
            QueueRecord::Item(i) => Ok(i),
            QueueRecord::Header { .. } => Err(QueueFileError::MissingHeader(path.to_path_buf())),
        })
        .collect::<Result<_, _>>()?;
    Ok(ReviewQueue { queue_id, theme, items, provenance })
}

#[derive(Debug, thiserror::Error)]
pub enum QueueFileError {
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error("{0}: queue file must start with exactly one header record")]
    MissingHeader(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjudicationRecord {
    pub record_id: String,
    pub item_id: String,
    pub decision: Decision,
    pub reason_text: String,
    pub reason_category: ReasonCategory,
    #[serde(default)]
    pub secondary_categories: Vec<ReasonCategory>,
    pub reviewers: Vec<String>,
    pub started_at: DateTime<Utc>,
    pub ended_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub client_token: Option<String>,
    /// Record this one corrects, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supersedes: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRequest {
    pub decision: Decision,
    #[serde(default)]
    pub reason_text: String,
    pub reason_category: ReasonCategory,
    #[serde(default)]
    pub secondary_categories: Vec<ReasonCategory>,
    #[serde(default)]
    pub reviewers: Vec<String>,
    #[serde(default)]
    pub started_at: Option<DateTime<Utc>>,
    #[serde(default)]
    pub client_token: Option<String>,
}

/// What a reviewer learns only after committing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Revealed {
    pub side: Side,
    pub ga_label: Label,
    pub model_label: Label,
}

impl From<Side> for Revealed {
    fn from(side: Side) -> Self {
        let (ga_label, model_label) = side.labels();
        Revealed { side, ga_label, model_label }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommitReceipt {
    pub record: AdjudicationRecord,
    pub revealed: Revealed,
}

#[derive(Debug, thiserror::Error)]
pub enum DecisionError {
    #[error("item {0} not found")]
    NotFound(String),
    #[error("item {} already decided", .0.item_id)]
    Conflict(Box<AdjudicationRecord>),
    #[error("item {0} has no decision to correct")]
    NotDecided(String),
    #[error("invalid decision: {0}")]
    Validation(String),
    #[error("decision log {path}:{line} is corrupt: {reason}")]
    CorruptLog { path: PathBuf, line: usize, reason: String },
    #[error("decision log write failed: {0}")]
    Io(#[from] std::io::Error),
}

fn validate(req: &DecisionRequest) -> Result<(), DecisionError> {
    if req.reviewers.iter().all(|r| r.trim().is_empty()) {
        return Err(DecisionError::Validation("at least one reviewer is required".into()));
    }
    if req.decision == Decision::Undecided && req.reason_text.trim().is_empty() {
        return Err(DecisionError::Validation("undecided requires a reason".into()));
    }
    Ok(())
}

#[derive(Default)]
struct DeskState {
    records: HashMap<String, Vec<AdjudicationRecord>>,
    log: Option<File>,
}

/// Queue items plus their decisions, optionally backed by an append-only log.
///
/// Writes go through one lock: the log line is flushed to disk before the
/// in-memory state changes and before the caller sees a receipt.
pub struct ReviewDesk {
    items: HashMap<String, (Theme, Side)>,
    state: Mutex<DeskState>,
    log_path: Option<PathBuf>,
}

impl ReviewDesk {
    pub fn in_memory<'a, S: 'a>(items: impl IntoIterator<Item = &'a DisagreementItem<S>>) -> Self {
        ReviewDesk {
            items: items.into_iter().map(|i| (i.item_id.clone(), (i.theme, i.side))).collect(),
            state: Mutex::new(DeskState::default()),
            log_path: None,
        }
    }

    /// Replay `log_path` (if present) and keep appending to it.
    pub fn open<'a, S: 'a>(
        items: impl IntoIterator<Item = &'a DisagreementItem<S>>,
        log_path: &Path,
    ) -> Result<Self, DecisionError> {
        let mut desk = Self::in_memory(items);
        let mut records: HashMap<String, Vec<AdjudicationRecord>> = HashMap::new();
        if log_path.exists() {
            let lines = jsonl::read_lines(log_path).map_err(|e| DecisionError::CorruptLog {
                path: log_path.to_path_buf(),
                line: 0,
                reason: e.to_string(),
            })?;
            for (line, text) in lines {
                let r: AdjudicationRecord = serde_json::from_str(&text).map_err(|e| DecisionError::CorruptLog {
                    path: log_path.to_path_buf(),
                    line,
                    reason: e.to_string(),
                })?;
                records.entry(r.item_id.clone()).or_default().push(r);
            }
        }
        if let Some(parent) = log_path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        let log = OpenOptions::new().create(true).append(true).open(log_path)?;
        desk.state = Mutex::new(DeskState { records, log: Some(log) });
        desk.log_path = Some(log_path.to_path_buf());
        Ok(desk)
    }

    pub fn log_path(&self) -> Option<&Path> {
        self.log_path.as_deref()
    }

    pub fn contains(&self, item_id: &str) -> bool {
        self.items.contains_key(item_id)
    }

    pub fn status(&self, item_id: &str) -> Option<ItemStatus> {
        self.items.get(item_id)?;
        let state = self.state.lock().expect("desk lock poisoned");
        Some(if state.records.contains_key(item_id) {
            ItemStatus::Decided
        } else {
            ItemStatus::Pending
        })
    }

    /// Latest record for an item.
    pub fn current(&self, item_id: &str) -> Option<AdjudicationRecord> {
        let state = self.state.lock().expect("desk lock poisoned");
        state.records.get(item_id).and_then(|v| v.last().cloned())
    }

    pub fn history(&self, item_id: &str) -> Vec<AdjudicationRecord> {
        let state = self.state.lock().expect("desk lock poisoned");
        state.records.get(item_id).cloned().unwrap_or_default()
    }

    pub fn record_decision(&self, item_id: &str, req: DecisionRequest) -> Result<CommitReceipt, DecisionError> {
        self.record_decision_at(item_id, req, Utc::now())
    }

    /// Commit the first decision for a pending item. A second commit on the
    /// same item gets `Conflict` carrying the winning record.
    pub fn record_decision_at(
        &self,
        item_id: &str,
        req: DecisionRequest,
        now: DateTime<Utc>,
    ) -> Result<CommitReceipt, DecisionError> {
        let &(_, side) = self.items.get(item_id).ok_or_else(|| DecisionError::NotFound(item_id.to_string()))?;
        validate(&req)?;
        let mut state = self.state.lock().expect("desk lock poisoned");
        if let Some(existing) = state.records.get(item_id).and_then(|v| v.last()) {
            return Err(DecisionError::Conflict(Box::new(existing.clone())));
        }
        let record = make_record(item_id, req, now, 0, None);
        append(&mut state, &record)?;
        state.records.entry(item_id.to_string()).or_default().push(record.clone());
        Ok(CommitReceipt {
            record,
            revealed: side.into(),
        })
    }

    /// Append a record superseding the item's current decision.
    pub fn correct_decision_at(
        &self,
        item_id: &str,
        req: DecisionRequest,
        now: DateTime<Utc>,
    ) -> Result<CommitReceipt, DecisionError> {
        let &(_, side) = self.items.get(item_id).ok_or_else(|| DecisionError::NotFound(item_id.to_string()))?;
        validate(&req)?;
        let mut state = self.state.lock().expect("desk lock poisoned");
        let previous = state
            .records
            .get(item_id)
            .and_then(|v| v.last())
            .ok_or_else(|| DecisionError::NotDecided(item_id.to_string()))?;
        let n = state.records[item_id].len();
        let record = make_record(item_id, req, now, n, Some(previous.record_id.clone()));
        append(&mut state, &record)?;
        state.records.get_mut(item_id).expect("checked above").push(record.clone());
        Ok(CommitReceipt {
            record,
            revealed: side.into(),
        })
    }

    /// Effective decision per item joined with its side, ordered by item id.
    pub fn outcomes(&self) -> Vec<ReviewOutcome> {
        let state = self.state.lock().expect("desk lock poisoned");
        let mut out: Vec<ReviewOutcome> = state
            .records
            .iter()
            .filter_map(|(id, recs)| {
                let r = recs.last()?;
                let (theme, side) = self.items.get(id).copied().map_or((None, None), |(t, s)| (Some(t), Some(s)));
                Some(ReviewOutcome {
                    item_id: id.clone(),
                    theme: theme?,
                    side,
                    decision: r.decision,
                    started_at: Some(r.started_at),
                    ended_at: Some(r.ended_at),
                })
            })
            .collect();
        out.sort_by(|a, b| a.item_id.cmp(&b.item_id));
        out
    }

    /// Every record ever written, in log order per item, items by id.
    pub fn all_records(&self) -> Vec<AdjudicationRecord> {
        let state = self.state.lock().expect("desk lock poisoned");
        let mut ids: Vec<&String> = state.records.keys().collect();
        ids.sort();
        ids.into_iter().flat_map(|id| state.records[id].iter().cloned()).collect()
    }
}

fn make_record(
    item_id: &str,
    req: DecisionRequest,
    now: DateTime<Utc>,
    seq: usize,
    supersedes: Option<String>,
) -> AdjudicationRecord {
    AdjudicationRecord {
        record_id: format!("{item_id}-{seq}"),
        item_id: item_id.to_string(),
        decision: req.decision,
        reason_text: req.reason_text,
        reason_category: req.reason_category,
        secondary_categories: req.secondary_categories,
        reviewers: req.reviewers.into_iter().filter(|r| !r.trim().is_empty()).collect(),
        started_at: req.started_at.unwrap_or(now).min(now),
        ended_at: now,
        client_token: req.client_token,
        supersedes,
    }
}

fn append(state: &mut DeskState, record: &AdjudicationRecord) -> Result<(), DecisionError> {
    if let Some(log) = state.log.as_mut() {
        let mut line = serde_json::to_vec(record).expect("record serializes");
        line.push(b'\n');
        log.write_all(&line)?;
        log.sync_data()?;
    }
    Ok(())
}
