use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::jsonl::{self, RecordError};
use crate::pipeline::scorer::ScorerMeta;
use crate::pipeline::window::{window_len, window_starts};
use crate::scalar::Scalar;
use crate::theme::Theme;

/// Window scores and the per-sentence averages derived from them, for one
/// transcript and theme.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable<S> {
    pub transcript_id: String,
    pub theme: Theme,
    pub window_scores: BTreeMap<usize, S>,
    /// Indexed by sentence.
    pub sentence_scores: Vec<S>,
    pub scorer_meta: ScorerMeta,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AggregateError {
    #[error("no score for window starting at sentence {0}")]
    MissingWindow(usize),
    #[error("score for window {0} is outside [0, 1]")]
    OutOfRange(usize),
}

/// Mean of the scores of every window containing each sentence.
///
/// Sentences near either edge belong to fewer windows and average over
/// the ones they actually have.
pub fn aggregate_sentence_scores<S: Scalar>(
    window_scores: &BTreeMap<usize, S>,
    sentence_count: usize,
    cfg: &PipelineConfig,
) -> Result<Vec<S>, AggregateError> {
    let len = window_len(sentence_count, cfg);
    let mut sums = vec![S::zero(); sentence_count];
    let mut counts = vec![0usize; sentence_count];
    for start in window_starts(sentence_count, cfg) {
        let score = *window_scores.get(&start).ok_or(AggregateError::MissingWindow(start))?;
        if !score.is_unit_interval() {
            return Err(AggregateError::OutOfRange(start));
        }
        for i in start..start + len {
            sums[i] = sums[i] + score;
            counts[i] += 1;
        }
    }
    Ok(sums
        .into_iter()
        .zip(counts)
        .map(|(sum, n)| sum / S::from_count(n))
        .collect())
}

impl<S: Scalar> ScoreTable<S> {
    pub fn build(
        transcript_id: impl Into<String>,
        theme: Theme,
        window_scores: BTreeMap<usize, S>,
        sentence_count: usize,
        cfg: &PipelineConfig,
        scorer_meta: ScorerMeta,
    ) -> Result<Self, AggregateError> {
        let sentence_scores = aggregate_sentence_scores(&window_scores, sentence_count, cfg)?;
        Ok(ScoreTable {
            transcript_id: transcript_id.into(),
            theme,
            window_scores,
            sentence_scores,
            scorer_meta,
        })
    }

    pub fn len(&self) -> usize {
        self.sentence_scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentence_scores.is_empty()
    }

    /// Highest sentence score in `[start, end]`, zero when out of range.
    pub fn peak(&self, start: usize, end: usize) -> S {
        let hi = (end + 1).min(self.sentence_scores.len());
        let lo = start.min(hi);
        crate::scalar::max_of(self.sentence_scores[lo..hi].iter().copied()).unwrap_or_else(S::zero)
    }
}

pub const SCORE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ScoreRecord {
    Header {
        schema_version: u32,
        transcript_id: String,
        theme: Theme,
        scorer_meta: ScorerMeta,
    },
    Window {
        start: usize,
        score: f64,
    },
    Sentence {
        index: usize,
        score: f64,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum ScoreFileError {
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error("{path}: {reason}")]
    Malformed { path: PathBuf, reason: String },
}

/// `<scores_dir>/<THEME>/<transcript_id>.jsonl`
pub fn score_table_path(scores_dir: &Path, theme: Theme, transcript_id: &str) -> PathBuf {
    scores_dir.join(theme.code()).join(format!("{transcript_id}.jsonl"))
}

pub fn store_score_table<S: Scalar>(table: &ScoreTable<S>, scores_dir: &Path) -> Result<PathBuf, ScoreFileError> {
    let path = score_table_path(scores_dir, table.theme, &table.transcript_id);
    let parent = path.parent().expect("score path has a parent");
    std::fs::create_dir_all(parent).map_err(|e| RecordError::io(parent, e))?;
    let records: Vec<ScoreRecord> = std::iter::once(ScoreRecord::Header {
        schema_version: SCORE_SCHEMA_VERSION,
        transcript_id: table.transcript_id.clone(),
        theme: table.theme,
        scorer_meta: table.scorer_meta.clone(),
    })
    .chain(table.window_scores.iter().map(|(&start, s)| ScoreRecord::Window {
        start,
        score: s.to_f64(),
    }))
    .chain(table.sentence_scores.iter().enumerate().map(|(index, s)| ScoreRecord::Sentence {
        index,
        score: s.to_f64(),
    }))
    .collect();
    jsonl::write_file(&path, &records)?;
    Ok(path)
}

pub fn load_score_table(path: &Path) -> Result<ScoreTable<f64>, ScoreFileError> {
    let malformed = |reason: String| ScoreFileError::Malformed {
        path: path.to_path_buf(),
        reason,
    };
    let mut records = jsonl::read_file::<ScoreRecord>(path)?.into_iter();
    let (transcript_id, theme, scorer_meta) = match records.next() {
        Some(ScoreRecord::Header {
            schema_version,
            transcript_id,
            theme,
            scorer_meta,
        }) => {
            if schema_version != SCORE_SCHEMA_VERSION {
                return Err(malformed(format!("unsupported schema version {schema_version}")));
            }
            (transcript_id, theme, scorer_meta)
        }
        _ => return Err(malformed("first record must be the header".into())),
    };
    let mut table = ScoreTable {
        transcript_id,
        theme,
        window_scores: BTreeMap::new(),
        sentence_scores: Vec::new(),
        scorer_meta,
    };
    for r in records {
        match r {
            ScoreRecord::Window { start, score } => {
                table.window_scores.insert(start, score);
            }
            ScoreRecord::Sentence { index, score } => {
                if index != table.sentence_scores.len() {
                    return Err(malformed(format!("sentence {index} out of sequence")));
                }
                table.sentence_scores.push(score);
            }
            ScoreRecord::Header { .. } => return Err(malformed("duplicate header".into())),
        }
    }
    Ok(table)
}

/// All score tables stored for a theme, ordered by transcript id.
pub fn load_theme_scores(scores_dir: &Path, theme: Theme) -> Result<Vec<ScoreTable<f64>>, ScoreFileError> {
    let dir = scores_dir.join(theme.code());
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
        .map_err(|e| RecordError::io(&dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(".jsonl") && !n.ends_with(".gate.jsonl")))
        .collect();
    paths.sort();
    paths.iter().map(|p| load_score_table(p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_scores() {
        let cfg = PipelineConfig::default();
        let ws: BTreeMap<usize, f64> = (0..=20).map(|s| (s, 0.7)).collect();
        let agg = aggregate_sentence_scores(&ws, 30, &cfg).unwrap();
        assert!(agg.iter().all(|&s| (s - 0.7).abs() < 1e-12));
    }

    #[test]
    fn edge_sentences_use_actual_windows() {
        let cfg = PipelineConfig::default();
        let ws = BTreeMap::from([(0, 0.4), (1, 0.4), (2, 1.0)]);
        let agg = aggregate_sentence_scores(&ws, 12, &cfg).unwrap();
        assert_eq!(agg[0], 0.4);
        assert_eq!(agg[11], 1.0);
        assert!((agg[9] - 0.6f64).abs() < 1e-12);
    }

    #[test]
    fn missing_window() {
        let cfg = PipelineConfig::default();
        let ws = BTreeMap::from([(0, 0.4), (2, 1.0)]);
        assert_eq!(aggregate_sentence_scores(&ws, 12, &cfg), Err(AggregateError::MissingWindow(1)));
    }

    #[test]
    fn empty_transcript() {
        let agg = aggregate_sentence_scores::<f64>(&BTreeMap::new(), 0, &PipelineConfig::default()).unwrap();
        assert!(agg.is_empty());
    }

    #[test]
    fn score_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = PipelineConfig::default();
        let ws = BTreeMap::from([(0, 0.25), (1, 0.5), (2, 1.0)]);
        let table = ScoreTable::build("trial-a", Theme::Emotions, ws, 12, &cfg, ScorerMeta::default()).unwrap();
        let path = store_score_table(&table, dir.path()).unwrap();
        assert_eq!(load_score_table(&path).unwrap(), table);
        assert_eq!(load_theme_scores(dir.path(), Theme::Emotions).unwrap(), vec![table]);
        assert!(load_theme_scores(dir.path(), Theme::BadMother).unwrap().is_empty());
    }
}
