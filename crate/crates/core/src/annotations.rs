//! Expert span annotations and the sentence-level gold labels derived from them.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Transcript;
use crate::jsonl::{self, RecordError};
use crate::theme::Theme;

/// A theme-tagged, inclusive sentence span from one annotator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldAnnotation {
    pub transcript_id: String,
    pub theme: Theme,
    pub start_sentence: usize,
    pub end_sentence: usize,
    pub annotator_id: String,
}

/// One line of the annotation interchange file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRow {
    pub transcript_id: String,
    pub theme_code: String,
    pub start_sentence: i64,
    pub end_sentence: i64,
    pub annotator_id: String,
}

impl From<&GoldAnnotation> for AnnotationRow {
    fn from(a: &GoldAnnotation) -> Self {
        AnnotationRow {
            transcript_id: a.transcript_id.clone(),
            theme_code: a.theme.code().to_string(),
            start_sentence: a.start_sentence as i64,
            end_sentence: a.end_sentence as i64,
            annotator_id: a.annotator_id.clone(),
        }
    }
}

/// Sentence counts per transcript, enough to validate spans.
#[derive(Debug, Clone, Default)]
pub struct CorpusIndex {
    lengths: HashMap<String, usize>,
}

impl CorpusIndex {
    pub fn insert(&mut self, transcript_id: impl Into<String>, sentences: usize) {
        self.lengths.insert(transcript_id.into(), sentences);
    }

    pub fn len_of(&self, transcript_id: &str) -> Option<usize> {
        self.lengths.get(transcript_id).copied()
    }
}

impl<'a> FromIterator<&'a Transcript> for CorpusIndex {
    fn from_iter<I: IntoIterator<Item = &'a Transcript>>(iter: I) -> Self {
        let mut idx = CorpusIndex::default();
        for t in iter {
            idx.insert(t.transcript_id.clone(), t.len());
        }
        idx
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("row {row}: {message}")]
pub struct RowError {
    /// 1-based line number in the source file.
    pub row: usize,
    pub message: String,
}

#[derive(Debug, thiserror::Error)]
pub enum AnnotationError {
    #[error(transparent)]
    Record(#[from] RecordError),
}

/// Validate one row; returns every problem found, not just the first.
pub fn validate_row(row: &AnnotationRow, corpus: &CorpusIndex) -> Result<GoldAnnotation, Vec<String>> {
    let mut problems = Vec::new();
    let theme = match row.theme_code.parse::<Theme>() {
        Ok(t) => Some(t),
        Err(e) => {
            problems.push(e.to_string());
            None
        }
    };
    match corpus.len_of(&row.transcript_id) {
        None => problems.push(format!("unknown transcript {:?}", row.transcript_id)),
        Some(n) => {
            if row.start_sentence < 0 || row.start_sentence as usize >= n {
                problems.push(format!("start_sentence out of range (transcript has {n} sentences)"));
            }
            if row.end_sentence < 0 || row.end_sentence as usize >= n {
                problems.push(format!("end_sentence out of range (transcript has {n} sentences)"));
            }
        }
    }
    if row.start_sentence > row.end_sentence {
        problems.push("start_sentence is after end_sentence".to_string());
    }
    match theme {
        Some(theme) if problems.is_empty() => Ok(GoldAnnotation {
            transcript_id: row.transcript_id.clone(),
            theme,
            start_sentence: row.start_sentence as usize,
            end_sentence: row.end_sentence as usize,
            annotator_id: row.annotator_id.clone(),
        }),
        _ => Err(problems),
    }
}

/// Parse and validate an annotation file, collecting row errors instead of failing fast.
pub fn import_annotations(
    file: &Path,
    corpus: &CorpusIndex,
) -> Result<(Vec<GoldAnnotation>, Vec<RowError>), AnnotationError> {
    let mut accepted = Vec::new();
    let mut errors = Vec::new();
    for (row, text) in jsonl::read_lines(file)? {
        let parsed: AnnotationRow = match serde_json::from_str(&text) {
            Ok(r) => r,
            Err(e) => {
                errors.push(RowError {
                    row,
                    message: format!("malformed record: {e}"),
                });
                continue;
            }
        };
        match validate_row(&parsed, corpus) {
            Ok(a) => accepted.push(a),
            Err(problems) => errors.push(RowError {
                row,
                message: problems.join("; "),
            }),
        }
    }
    Ok((accepted, errors))
}

/// Per-theme gold-positive sentence indices of one transcript.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldLabelSet {
    pub transcript_id: String,
    pub labels: BTreeMap<Theme, BTreeSet<usize>>,
}

impl GoldLabelSet {
    pub fn new(transcript_id: impl Into<String>) -> Self {
        GoldLabelSet {
            transcript_id: transcript_id.into(),
            labels: BTreeMap::new(),
        }
    }

    /// Gold-positive sentences for a theme (empty when none).
    pub fn positives(&self, theme: Theme) -> &BTreeSet<usize> {
        static EMPTY: BTreeSet<usize> = BTreeSet::new();
        self.labels.get(&theme).unwrap_or(&EMPTY)
    }

    pub fn is_positive(&self, theme: Theme, sentence: usize) -> bool {
        self.positives(theme).contains(&sentence)
    }

    /// True when any sentence in `[start, end]` is gold-positive.
    pub fn any_positive(&self, theme: Theme, start: usize, end: usize) -> bool {
        self.positives(theme).range(start..=end).next().is_some()
    }

    pub fn insert_span(&mut self, theme: Theme, start: usize, end: usize) {
        self.labels.entry(theme).or_default().extend(start..=end);
    }
}

/// Union annotation spans per transcript and theme.
pub fn to_gold_labels(annotations: &[GoldAnnotation]) -> BTreeMap<String, GoldLabelSet> {
    let mut out: BTreeMap<String, GoldLabelSet> = BTreeMap::new();
    for a in annotations {
        out.entry(a.transcript_id.clone())
            .or_insert_with(|| GoldLabelSet::new(a.transcript_id.clone()))
            .insert_span(a.theme, a.start_sentence, a.end_sentence);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ann(theme: Theme, s: usize, e: usize) -> GoldAnnotation {
        GoldAnnotation {
            transcript_id: "trial-a".into(),
            theme,
            start_sentence: s,
            end_sentence: e,
            annotator_id: "ga1".into(),
        }
    }

    fn row(tid: &str, code: &str, s: i64, e: i64) -> AnnotationRow {
        AnnotationRow {
            transcript_id: tid.into(),
            theme_code: code.into(),
            start_sentence: s,
            end_sentence: e,
            annotator_id: "ga1".into(),
        }
    }

    fn index() -> CorpusIndex {
        let mut idx = CorpusIndex::default();
        idx.insert("trial-a", 10);
        idx
    }

    #[test]
    fn in_range_row_is_accepted() {
        let a = validate_row(&row("trial-a", "EMOT", 5, 5), &index()).unwrap();
        assert_eq!(a, ann(Theme::Emotions, 5, 5));
    }

    #[test]
    fn out_of_range_end_is_rejected() {
        let problems = validate_row(&row("trial-a", "EMOT", 8, 12), &index()).unwrap_err();
        assert!(problems.iter().any(|p| p.starts_with("end_sentence out of range")));
    }

    #[test]
    fn errors_accumulate_per_row() {
        let problems = validate_row(&row("trial-z", "CRIME", 0, 0), &index()).unwrap_err();
        assert_eq!(problems.len(), 2);
    }

    #[test]
    fn import_collects_valid_rows_and_row_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ann.jsonl");
        let rows = [
            row("trial-a", "EMOT", 0, 1),
            row("trial-a", "XXX", 0, 1),
            row("trial-a", "MOM", 3, 3),
            row("trial-b", "SEX", 0, 0),
            row("trial-a", "NORM", 9, 9),
        ];
        jsonl::write_file(&path, &rows).unwrap();
        let (ok, errs) = import_annotations(&path, &index()).unwrap();
        assert_eq!(ok.len(), 3);
        assert_eq!(ok[1].theme, Theme::BadMother);
        assert_eq!(errs.iter().map(|e| e.row).collect::<Vec<_>>(), [2, 4]);
    }

    #[test]
    fn overlapping_spans_merge() {
        let gold = to_gold_labels(&[ann(Theme::Emotions, 2, 4), ann(Theme::Emotions, 4, 6)]);
        let set: Vec<_> = gold["trial-a"].positives(Theme::Emotions).iter().copied().collect();
        assert_eq!(set, [2, 3, 4, 5, 6]);
    }

    #[test]
    fn one_sentence_many_themes() {
        let gold = to_gold_labels(&[ann(Theme::Emotions, 1, 1), ann(Theme::BadMother, 1, 1)]);
        let g = &gold["trial-a"];
        assert!(g.is_positive(Theme::Emotions, 1) && g.is_positive(Theme::BadMother, 1));
        assert!(!g.is_positive(Theme::Hypersexualization, 1));
    }
}
