//! Window scorers: the pluggable client contract and the built-in lexicon scorer.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::jsonl::{self, RecordError};
use crate::pipeline::window::Window;
use crate::scalar::Scalar;
use crate::text::{find_phrase, phrase, tokenize};
use crate::theme::Theme;

/// One paragraph as sent to a scorer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Paragraph {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ScorerMeta {
    pub name: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScoreError {
    /// The batch never produced a usable response; safe to retry.
    #[error("scorer transport failure for {} window(s): {message}", window_ids.len())]
    Transport { window_ids: Vec<String>, message: String },
    #[error("scorer returned {score} for window {window_id}, outside [0, 1]")]
    OutOfRange { window_id: String, score: f64 },
    #[error("scorer response is missing window {0}")]
    Missing(String),
    #[error("scorer response has unexpected or duplicate window {0}")]
    Unexpected(String),
}

impl ScoreError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, ScoreError::Transport { .. })
    }
}

/// Anything that assigns a positive-class probability to paragraphs.
///
/// Implementations are shared across worker threads; the returned scores
/// are keyed by paragraph id and may come back in any order.
pub trait Scorer: Send + Sync {
    fn meta(&self) -> ScorerMeta;

    fn score_batch(&self, theme: Theme, paragraphs: &[Paragraph]) -> Result<Vec<(String, f64)>, ScoreError>;

    fn batch_size(&self) -> usize {
        32
    }
}

impl<T: Scorer + ?Sized> Scorer for &T {
    fn meta(&self) -> ScorerMeta {
        (**self).meta()
    }
    fn score_batch(&self, theme: Theme, paragraphs: &[Paragraph]) -> Result<Vec<(String, f64)>, ScoreError> {
        (**self).score_batch(theme, paragraphs)
    }
    fn batch_size(&self) -> usize {
        (**self).batch_size()
    }
}

/// Score every window, fanning batches out over the rayon pool.
///
/// Returns scores keyed by window start. Any batch failure aborts the whole
/// call; out-of-range, missing or unexpected ids are protocol violations.
pub fn score_windows<S: Scalar>(
    windows: &[Window],
    theme: Theme,
    scorer: &dyn Scorer,
) -> Result<BTreeMap<usize, S>, ScoreError> {
    let by_id: HashMap<String, usize> = windows.iter().map(|w| (w.id(), w.start_sentence)).collect();
    let paragraphs: Vec<Paragraph> = windows
        .iter()
        .map(|w| Paragraph {
            id: w.id(),
            text: w.text.clone(),
        })
        .collect();
    let batches: Vec<Vec<(String, f64)>> = paragraphs
        .par_chunks(scorer.batch_size().max(1))
        .map(|batch| scorer.score_batch(theme, batch))
        .collect::<Result<_, _>>()?;

    let mut out = BTreeMap::new();
    for (id, score) in batches.into_iter().flatten() {
        if !(0.0..=1.0).contains(&score) {
            return Err(ScoreError::OutOfRange { window_id: id, score });
        }
        let start = *by_id.get(&id).ok_or_else(|| ScoreError::Unexpected(id.clone()))?;
        if out.insert(start, S::from_f64(score)).is_some() {
            return Err(ScoreError::Unexpected(id));
        }
    }
    if let Some(w) = windows.iter().find(|w| !out.contains_key(&w.start_sentence)) {
        return Err(ScoreError::Missing(w.id()));
    }
    Ok(out)
}

/// One line of a lexicon file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub theme_code: String,
    pub term: String,
    pub weight: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum LexiconError {
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error("lexicon line {line}: {message}")]
    Entry { line: usize, message: String },
}

/// Deterministic scorer: `1 - exp(-sum(weight * count))` over whole-word term hits.
#[derive(Debug, Clone, Default)]
pub struct LexiconScorer {
    terms: BTreeMap<Theme, Vec<(Vec<String>, f64)>>,
}

impl LexiconScorer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Weights must be finite and non-negative so scores stay in `[0, 1)`.
    pub fn add_term(&mut self, theme: Theme, term: &str, weight: f64) -> Result<(), String> {
        if !weight.is_finite() || weight < 0.0 {
            return Err(format!("weight {weight} for {term:?} must be finite and >= 0"));
        }
        let words = phrase(term);
        if words.is_empty() {
            return Err(format!("term {term:?} has no words"));
        }
        self.terms.entry(theme).or_default().push((words, weight));
        Ok(())
    }

    pub fn from_entries(entries: &[LexiconEntry]) -> Result<Self, LexiconError> {
        let mut lex = LexiconScorer::new();
        for (i, e) in entries.iter().enumerate() {
            let entry_err = |message: String| LexiconError::Entry { line: i + 1, message };
            let theme: Theme = e.theme_code.parse().map_err(|err: crate::theme::UnknownTheme| entry_err(err.to_string()))?;
            lex.add_term(theme, &e.term, e.weight).map_err(entry_err)?;
        }
        Ok(lex)
    }

    pub fn from_file(path: &Path) -> Result<Self, LexiconError> {
        Self::from_entries(&jsonl::read_file::<LexiconEntry>(path)?)
    }

    pub fn score_text(&self, theme: Theme, text: &str) -> f64 {
        let Some(terms) = self.terms.get(&theme) else {
            return 0.0;
        };
        let tokens = tokenize(text);
        let mass: f64 = terms
            .iter()
            .map(|(words, weight)| weight * find_phrase(&tokens, words).len() as f64)
            .sum();
        1.0 - (-mass).exp()
    }
}

impl Scorer for LexiconScorer {
    fn meta(&self) -> ScorerMeta {
        ScorerMeta {
            name: "lexicon".into(),
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }

    fn score_batch(&self, theme: Theme, paragraphs: &[Paragraph]) -> Result<Vec<(String, f64)>, ScoreError> {
        Ok(paragraphs
            .iter()
            .map(|p| (p.id.clone(), self.score_text(theme, &p.text)))
            .collect())
    }
}
