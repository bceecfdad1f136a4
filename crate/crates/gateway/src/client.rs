//! Blocking clients for remote scorers and reference resolvers.
//!
//! Both are plain `reqwest` blocking clients and are safe to share across the
//! rayon workers that fan out scoring batches and gate queries. They must not
//! be called from inside a tokio runtime.

use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use triage_core::pipeline::{Paragraph, ScoreError, Scorer, ScorerMeta};
use triage_core::reference::ResolveError;
use triage_core::{ReferenceQuery, ReferenceVerdict, Resolver, Rule, Theme};

const TIMEOUT: Duration = Duration::from_secs(60);

fn client() -> reqwest::blocking::Client {
    reqwest::blocking::Client::builder()
        .timeout(TIMEOUT)
        .build()
        .expect("http client builds")
}

fn endpoint(base: &str, path: &str) -> String {
    format!("{}/{path}", base.trim_end_matches('/'))
}

#[derive(Serialize)]
struct ScoreRequest<'a> {
    theme: &'a str,
    paragraphs: &'a [Paragraph],
}

#[derive(Deserialize)]
struct ScoreEntry {
    id: String,
    score: f64,
}

#[derive(Deserialize)]
struct ScoreResponse {
    scores: Vec<ScoreEntry>,
    scorer_meta: ScorerMeta,
}

/// Scorer behind `POST <base>/score`.
pub struct HttpScorer {
    url: String,
    client: reqwest::blocking::Client,
    batch_size: usize,
    retries: usize,
    meta: Mutex<Option<ScorerMeta>>,
}

impl HttpScorer {
    pub fn new(base_url: &str) -> Self {
        HttpScorer {
            url: endpoint(base_url, "score"),
            client: client(),
            batch_size: 32,
            retries: 2,
            meta: Mutex::new(None),
        }
    }

    pub fn with_batch_size(mut self, n: usize) -> Self {
        self.batch_size = n.max(1);
        self
    }

    /// Extra attempts after a transport failure.
    pub fn with_retries(mut self, n: usize) -> Self {
        self.retries = n;
        self
    }

    fn post(&self, theme: Theme, paragraphs: &[Paragraph]) -> Result<ScoreResponse, String> {
        let resp = self
            .client
            .post(&self.url)
            .json(&ScoreRequest { theme: theme.code(), paragraphs })
            .send()
            .map_err(|e| e.to_string())?;
        let status = resp.status();
        if !status.is_success() {
            return Err(format!("{} returned {status}", self.url));
        }
        resp.json::<ScoreResponse>().map_err(|e| format!("malformed response: {e}"))
    }
}

impl Scorer for HttpScorer {
    /// Metadata reported by the most recent successful response.
    fn meta(&self) -> ScorerMeta {
        self.meta.lock().expect("meta lock").clone().unwrap_or_else(|| ScorerMeta {
            name: "http".into(),
            version: self.url.clone(),
        })
    }

    fn score_batch(&self, theme: Theme, paragraphs: &[Paragraph]) -> Result<Vec<(String, f64)>, ScoreError> {
        let mut last = String::new();
        for _ in 0..=self.retries {
            match self.post(theme, paragraphs) {
                Ok(r) => {
                    *self.meta.lock().expect("meta lock") = Some(r.scorer_meta);
                    return Ok(r.scores.into_iter().map(|e| (e.id, e.score)).collect());
                }
                Err(e) => {
                    tracing::warn!(url = %self.url, error = %e, "score batch failed");
                    last = e;
                }
            }
        }
        Err(ScoreError::Transport {
            window_ids: paragraphs.iter().map(|p| p.id.clone()).collect(),
            message: last,
        })
    }

    fn batch_size(&self) -> usize {
        self.batch_size
    }
}

#[derive(Serialize)]
struct ResolveRequest<'a> {
    context_sentences: &'a [String],
    target_index: usize,
    defendant_aliases: &'a [String],
}

#[derive(Deserialize)]
struct ResolveResponse {
    mentions_defendant: bool,
    rule: String,
}

/// Resolver behind `POST <base>/resolve`.
pub struct HttpResolver {
    url: String,
    client: reqwest::blocking::Client,
}

impl HttpResolver {
    pub fn new(base_url: &str) -> Self {
        HttpResolver {
            url: endpoint(base_url, "resolve"),
            client: client(),
        }
    }
}

impl Resolver for HttpResolver {
    fn resolve(&self, q: &ReferenceQuery) -> Result<ReferenceVerdict, ResolveError> {
        if q.defendant_aliases.iter().all(|a| a.trim().is_empty()) {
            return Err(ResolveError::NoAliases);
        }
        let resp = self
            .client
            .post(&self.url)
            .json(&ResolveRequest {
                context_sentences: &q.context_sentences,
                target_index: q.target_index_in_context,
                defendant_aliases: &q.defendant_aliases,
            })
            .send()
            .map_err(|e| ResolveError::Transport(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(ResolveError::Transport(format!("{} returned {status}", self.url)));
        }
        let body: ResolveResponse = resp
            .json()
            .map_err(|e| ResolveError::Transport(format!("malformed response: {e}")))?;
        let rule = Rule::parse(&body.rule).ok_or_else(|| ResolveError::Protocol(format!("unknown rule {:?}", body.rule)))?;
        if body.mentions_defendant != (rule != Rule::None) {
            return Err(ResolveError::Protocol(format!(
                "mentions_defendant={} contradicts rule {}",
                body.mentions_defendant, body.rule
            )));
        }
        Ok(ReferenceVerdict::new(rule, Vec::new()))
    }
}
