//! Transcript ingestion: normalization, sentence segmentation and storage.
//!
//! Normalization lowercases the raw text and deletes digit characters. The
//! splitter then cuts the normalized text at `.`, `?` or `!` followed by
//! whitespace (or the end of input), unless the `.` closes one of the
//! courtroom abbreviations in [`ABBREVIATIONS`]. A blank line always ends a
//! sentence. Sentences with fewer than three words are dropped and the
//! survivors are renumbered without gaps.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::jsonl::{self, RecordError};

pub const SCHEMA_VERSION: u32 = 1;

/// Tokens that do not end a sentence when followed by `.`.
pub const ABBREVIATIONS: [&str; 10] = ["mr", "mrs", "ms", "dr", "q", "a", "vs", "st", "jr", "sr"];

pub const MIN_WORDS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sentence {
    pub index: usize,
    pub text: String,
    /// Byte offsets `[start, end)` into the normalized source text.
    pub char_span: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub transcript_id: String,
    pub defendant_aliases: Vec<String>,
    pub sentences: Vec<Sentence>,
    pub source_meta: BTreeMap<String, serde_json::Value>,
}

impl Transcript {
    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.sentences.iter().map(|s| s.text.as_str())
    }

    /// True when no alias is available, which the reference gate refuses.
    pub fn missing_aliases(&self) -> bool {
        self.defendant_aliases.iter().all(|a| a.trim().is_empty())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("input is not valid UTF-8 at byte offset {offset}")]
    Encoding { offset: usize },
    #[error("transcript {0:?} not found in corpus")]
    NotFound(String),
    #[error("transcript id {0:?} is not usable as a file name")]
    InvalidId(String),
    #[error("{path}: schema version {found} is not supported (expected {expected})")]
    SchemaVersion {
        path: PathBuf,
        found: u32,
        expected: u32,
    },
    #[error("{path}: {reason}")]
    Malformed { path: PathBuf, reason: String },
    #[error(transparent)]
    Record(#[from] RecordError),
}

/// Lowercase, then delete every numeric character.
///
/// Surrounding punctuation stays (`"$100"` becomes `"$"`). When a deleted run
/// sat between two blanks, the second blank goes too, so `"paid 100 dollars"`
/// becomes `"paid dollars"`.
pub fn normalize(raw: &str) -> String {
    let is_blank = |c: char| c == ' ' || c == '\t';
    let mut out = String::with_capacity(raw.len());
    let mut deleted = false;
    for c in raw.to_lowercase().chars() {
        if c.is_numeric() {
            deleted = true;
            continue;
        }
        if deleted && is_blank(c) && out.ends_with(is_blank) {
            deleted = false;
            continue;
        }
        deleted = false;
        out.push(c);
    }
    out
}

/// Whitespace token with at least one alphabetic character.
pub fn is_word(token: &str) -> bool {
    token.chars().any(char::is_alphabetic)
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().filter(|t| is_word(t)).count()
}

fn is_abbreviation(before: &str) -> bool {
    let word_start = before
        .char_indices()
        .rev()
        .take_while(|(_, c)| c.is_alphabetic())
        .last()
        .map(|(i, _)| i);
    match word_start {
        Some(i) => ABBREVIATIONS.contains(&&before[i..]),
        None => false,
    }
}

/// Raw sentence spans (byte offsets, whitespace-trimmed) over normalized text.
pub fn split_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();

    let push = |from: usize, to: usize, spans: &mut Vec<(usize, usize)>| {
        let slice = &text[from..to];
        let lead = slice.len() - slice.trim_start().len();
        let trail = slice.len() - slice.trim_end().len();
        if from + lead < to - trail {
            spans.push((from + lead, to - trail));
        }
    };

    while let Some((i, c)) = chars.next() {
        let end = i + c.len_utf8();
        match c {
            '.' | '?' | '!' => {
                let next_is_space = chars.peek().is_none_or(|(_, n)| n.is_whitespace());
                if next_is_space && !(c == '.' && is_abbreviation(&text[start..i])) {
                    push(start, end, &mut spans);
                    start = end;
                }
            }
            '\n' => {
                // A newline, optional horizontal whitespace, then another newline.
                let rest = &text[end..];
                let gap = rest.len() - rest.trim_start_matches([' ', '\t', '\r']).len();
                if rest[gap..].starts_with('\n') {
                    push(start, i, &mut spans);
                    start = end;
                }
            }
            _ => {}
        }
    }
    push(start, text.len(), &mut spans);
    spans
}

/// Normalize and segment raw transcript text.
pub fn segment_transcript(raw_text: &str, transcript_id: &str, defendant_aliases: &[String]) -> Transcript {
    let normalized = normalize(raw_text);
    let sentences = split_spans(&normalized)
        .into_iter()
        .filter(|&(s, e)| word_count(&normalized[s..e]) >= MIN_WORDS)
        .enumerate()
        .map(|(index, (s, e))| Sentence {
            index,
            text: normalized[s..e].to_string(),
            char_span: (s, e),
        })
        .collect();
    Transcript {
        transcript_id: transcript_id.to_string(),
        defendant_aliases: defendant_aliases
            .iter()
            .map(|a| a.trim().to_lowercase())
            .filter(|a| !a.is_empty())
            .collect(),
        sentences,
        source_meta: BTreeMap::new(),
    }
}

/// Byte-level entry point; rejects invalid UTF-8 with the first bad offset.
pub fn segment_bytes(
    raw: &[u8],
    transcript_id: &str,
    defendant_aliases: &[String],
) -> Result<Transcript, CorpusError> {
    let text = std::str::from_utf8(raw).map_err(|e| CorpusError::Encoding {
        offset: e.valid_up_to(),
    })?;
    Ok(segment_transcript(text, transcript_id, defendant_aliases))
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    schema_version: u32,
    transcript_id: String,
    defendant_aliases: Vec<String>,
    source_meta: BTreeMap<String, serde_json::Value>,
}

fn check_id(id: &str) -> Result<(), CorpusError> {
    let bad = id.is_empty()
        || id.starts_with('.')
        || id.chars().any(|c| matches!(c, '/' | '\\' | '\0') || c.is_control());
    if bad {
        Err(CorpusError::InvalidId(id.to_string()))
    } else {
        Ok(())
    }
}

pub fn transcript_path(corpus_dir: &Path, transcript_id: &str) -> PathBuf {
    corpus_dir.join(format!("{transcript_id}.jsonl"))
}

pub fn store_transcript(t: &Transcript, corpus_dir: &Path) -> Result<(), CorpusError> {
    check_id(&t.transcript_id)?;
    std::fs::create_dir_all(corpus_dir).map_err(|e| RecordError::io(corpus_dir, e))?;
    let path = transcript_path(corpus_dir, &t.transcript_id);
    let header = serde_json::to_value(Header {
        schema_version: SCHEMA_VERSION,
        transcript_id: t.transcript_id.clone(),
        defendant_aliases: t.defendant_aliases.clone(),
        source_meta: t.source_meta.clone(),
    })
    .expect("header serializes");
    let rows: Vec<serde_json::Value> = std::iter::once(header)
        .chain(t.sentences.iter().map(|s| serde_json::to_value(s).expect("sentence serializes")))
        .collect();
    jsonl::write_file(&path, &rows)?;
    Ok(())
}

pub fn load_transcript(corpus_dir: &Path, transcript_id: &str) -> Result<Transcript, CorpusError> {
    check_id(transcript_id)?;
    let path = transcript_path(corpus_dir, transcript_id);
    if !path.is_file() {
        return Err(CorpusError::NotFound(transcript_id.to_string()));
    }
    read_transcript_file(&path)
}

pub fn read_transcript_file(path: &Path) -> Result<Transcript, CorpusError> {
    let lines = jsonl::read_lines(path)?;
    let mut lines = lines.into_iter();
    let malformed = |reason: String| CorpusError::Malformed {
        path: path.to_path_buf(),
        reason,
    };
    let (_, head) = lines.next().ok_or_else(|| malformed("missing header record".into()))?;
    let raw: serde_json::Value =
        serde_json::from_str(&head).map_err(|e| malformed(format!("line 1: {e}")))?;
    let found = raw
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| malformed("header has no schema_version".into()))? as u32;
    if found != SCHEMA_VERSION {
        return Err(CorpusError::SchemaVersion {
            path: path.to_path_buf(),
            found,
            expected: SCHEMA_VERSION,
        });
    }
    let header: Header = serde_json::from_value(raw).map_err(|e| malformed(format!("line 1: {e}")))?;
    let mut sentences = Vec::new();
    for (line, text) in lines {
        let s: Sentence =
            serde_json::from_str(&text).map_err(|e| malformed(format!("line {line}: {e}")))?;
        if s.index != sentences.len() {
            return Err(malformed(format!(
                "line {line}: sentence index {} out of sequence",
                s.index
            )));
        }
        sentences.push(s);
    }
    Ok(Transcript {
        transcript_id: header.transcript_id,
        defendant_aliases: header.defendant_aliases,
        sentences,
        source_meta: header.source_meta,
    })
}

/// Every transcript stored in a corpus directory, ordered by id.
pub fn load_corpus(corpus_dir: &Path) -> Result<Vec<Transcript>, CorpusError> {
    let entries = std::fs::read_dir(corpus_dir).map_err(|e| RecordError::io(corpus_dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| RecordError::io(corpus_dir, e))?.path();
        if path.extension().is_some_and(|x| x == "jsonl") {
            out.push(read_transcript_file(&path)?);
        }
    }
    out.sort_by(|a, b| a.transcript_id.cmp(&b.transcript_id));
    Ok(out)
}
