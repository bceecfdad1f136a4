//! Does a high-scoring sentence talk about the defendant?
//!
//! The built-in resolver applies three rules to a target sentence and up to
//! `context_back` sentences before it, first match wins:
//!
//! 1. `direct_alias`: the target names the defendant.
//! 2. `pronoun_chain`: the target has a she/her pronoun and the closest
//!    feminine referent before it (an alias or a name from the name list) is
//!    a defendant alias.
//! 3. `she_her_only_cluster`: the target has a she/her pronoun and no
//!    feminine name occurs anywhere in the context, so the pronoun chain is
//!    pronoun-only and defaults to the defendant.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::corpus::Transcript;
use crate::jsonl::{self, RecordError};
use crate::scalar::Scalar;
use crate::text::{find_phrase, phrase, tokenize, Token};

pub const FEMININE_PRONOUNS: [&str; 4] = ["she", "her", "hers", "herself"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceQuery {
    /// Preceding sentences followed by the target.
    pub context_sentences: Vec<String>,
    pub target_index_in_context: usize,
    pub defendant_aliases: Vec<String>,
}

impl ReferenceQuery {
    /// Target sentence `target` of `t` with up to `context_back` predecessors.
    pub fn for_sentence(t: &Transcript, target: usize, context_back: usize) -> Self {
        let from = target.saturating_sub(context_back);
        ReferenceQuery {
            context_sentences: t.sentences[from..=target].iter().map(|s| s.text.clone()).collect(),
            target_index_in_context: target - from,
            defendant_aliases: t.defendant_aliases.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    DirectAlias,
    PronounChain,
    SheHerOnlyCluster,
    None,
}

impl Rule {
    pub fn as_str(self) -> &'static str {
        match self {
            Rule::DirectAlias => "direct_alias",
            Rule::PronounChain => "pronoun_chain",
            Rule::SheHerOnlyCluster => "she_her_only_cluster",
            Rule::None => "none",
        }
    }

    pub fn parse(s: &str) -> Option<Rule> {
        [Rule::DirectAlias, Rule::PronounChain, Rule::SheHerOnlyCluster, Rule::None]
            .into_iter()
            .find(|r| r.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    /// Index into `context_sentences`.
    pub sentence_offset: usize,
    /// Byte range inside that sentence.
    pub token_span: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceVerdict {
    pub mentions_defendant: bool,
    pub rule_fired: Rule,
    pub evidence: Vec<Evidence>,
}

impl ReferenceVerdict {
    pub fn new(rule_fired: Rule, evidence: Vec<Evidence>) -> Self {
        ReferenceVerdict {
            mentions_defendant: rule_fired != Rule::None,
            rule_fired,
            evidence,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ResolveError {
    #[error("no defendant aliases configured")]
    NoAliases,
    #[error("invalid reference query: {0}")]
    InvalidQuery(String),
    #[error("resolver transport failure: {0}")]
    Transport(String),
    #[error("resolver protocol violation: {0}")]
    Protocol(String),
}

pub trait Resolver: Send + Sync {
    fn resolve(&self, q: &ReferenceQuery) -> Result<ReferenceVerdict, ResolveError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MentionKind {
    Alias,
    Name,
}

#[derive(Debug, Clone, Copy)]
struct Mention {
    kind: MentionKind,
    first_token: usize,
    last_token: usize,
    span: (usize, usize),
}

/// Rule-based resolver over a configurable list of feminine names.
#[derive(Debug, Clone, Default)]
pub struct BuiltinResolver {
    names: Vec<Vec<String>>,
}

impl BuiltinResolver {
    pub fn new<I, T>(names: I) -> Self
    where
        I: IntoIterator<Item = T>,
        T: AsRef<str>,
    {
        BuiltinResolver {
            names: names
                .into_iter()
                .map(|n| phrase(n.as_ref()))
                .filter(|p| !p.is_empty())
                .collect(),
        }
    }

    /// One lowercase name per line; blank lines and `#` comments ignored.
    pub fn from_name_file(path: &Path) -> Result<Self, RecordError> {
        let text = std::fs::read_to_string(path).map_err(|e| RecordError::io(path, e))?;
        Ok(Self::new(
            text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')),
        ))
    }

    /// Alias and name mentions in token order; names overlapping an alias are dropped.
    fn mentions(&self, tokens: &[Token], aliases: &[Vec<String>]) -> Vec<Mention> {
        let find = |kind, phrases: &[Vec<String>]| -> Vec<Mention> {
            phrases
                .iter()
                .flat_map(|p| {
                    find_phrase(tokens, p).into_iter().map(move |i| {
                        let last = i + p.len() - 1;
                        Mention {
                            kind,
                            first_token: i,
                            last_token: last,
                            span: (tokens[i].start, tokens[last].end),
                        }
                    })
                })
                .collect()
        };
        let mut alias_hits = find(MentionKind::Alias, aliases);
        // "smith" inside "ms. smith" is the same mention.
        let all = alias_hits.clone();
        alias_hits.retain(|a| {
            !all.iter().any(|b| {
                b.first_token <= a.first_token
                    && a.last_token <= b.last_token
                    && (b.first_token, b.last_token) != (a.first_token, a.last_token)
            })
        });
        alias_hits.sort_by_key(|m| (m.first_token, m.last_token));
        alias_hits.dedup_by_key(|m| (m.first_token, m.last_token));
        let name_hits = find(MentionKind::Name, &self.names)
            .into_iter()
            .filter(|n| {
                !alias_hits
                    .iter()
                    .any(|a| n.first_token <= a.last_token && a.first_token <= n.last_token)
            })
            .collect::<Vec<_>>();
        let mut found: Vec<Mention> = alias_hits.into_iter().chain(name_hits).collect();
        found.sort_by_key(|m| (m.first_token, m.last_token));
        found
    }
}

impl Resolver for BuiltinResolver {
    fn resolve(&self, q: &ReferenceQuery) -> Result<ReferenceVerdict, ResolveError> {
        let aliases: Vec<Vec<String>> = q
            .defendant_aliases
            .iter()
            .map(|a| phrase(a))
            .filter(|p| !p.is_empty())
            .collect();
        if aliases.is_empty() {
            return Err(ResolveError::NoAliases);
        }
        if q.context_sentences.is_empty() {
            return Err(ResolveError::InvalidQuery("empty context".into()));
        }
        if q.target_index_in_context + 1 != q.context_sentences.len() {
            return Err(ResolveError::InvalidQuery(format!(
                "target index {} is not the last of {} context sentences",
                q.target_index_in_context,
                q.context_sentences.len()
            )));
        }
        let target = q.target_index_in_context;
        let tokens: Vec<Vec<Token>> = q.context_sentences.iter().map(|s| tokenize(s)).collect();
        let mentions: Vec<Vec<Mention>> = tokens.iter().map(|t| self.mentions(t, &aliases)).collect();

        let direct: Vec<Evidence> = mentions[target]
            .iter()
            .filter(|m| m.kind == MentionKind::Alias)
            .map(|m| Evidence {
                sentence_offset: target,
                token_span: m.span,
            })
            .collect();
        if !direct.is_empty() {
            return Ok(ReferenceVerdict::new(Rule::DirectAlias, direct));
        }

        let Some(pronoun) = tokens[target]
            .iter()
            .position(|t| FEMININE_PRONOUNS.contains(&t.text.as_str()))
        else {
            return Ok(ReferenceVerdict::new(Rule::None, Vec::new()));
        };
        let pronoun_ev = Evidence {
            sentence_offset: target,
            token_span: (tokens[target][pronoun].start, tokens[target][pronoun].end),
        };

        let in_target = mentions[target]
            .iter()
            .rfind(|m| m.first_token < pronoun)
            .map(|m| (target, *m));
        let nearest = in_target.or_else(|| {
            (0..target)
                .rev()
                .find_map(|s| mentions[s].last().map(|m| (s, *m)))
        });
        if let Some((offset, m)) = nearest {
            if m.kind == MentionKind::Alias {
                let ev = vec![
                    pronoun_ev,
                    Evidence {
                        sentence_offset: offset,
                        token_span: m.span,
                    },
                ];
                return Ok(ReferenceVerdict::new(Rule::PronounChain, ev));
            }
        }

        if mentions.iter().all(|m| m.is_empty()) {
            return Ok(ReferenceVerdict::new(Rule::SheHerOnlyCluster, vec![pronoun_ev]));
        }
        Ok(ReferenceVerdict::new(Rule::None, Vec::new()))
    }
}

/// Outcome of the defendant gate for one sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum GateStatus {
    /// Score at or below the gate threshold; the resolver never ran.
    NotChecked,
    Checked { mentions_defendant: bool, rule: Rule },
}

impl GateStatus {
    pub fn passes(self) -> bool {
        matches!(self, GateStatus::Checked { mentions_defendant: true, .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GateFlags {
    pub transcript_id: String,
    pub statuses: Vec<GateStatus>,
}

impl GateFlags {
    pub fn unchecked(transcript_id: impl Into<String>, n: usize) -> Self {
        GateFlags {
            transcript_id: transcript_id.into(),
            statuses: vec![GateStatus::NotChecked; n],
        }
    }

    pub fn passes(&self, sentence: usize) -> bool {
        self.statuses.get(sentence).is_some_and(|s| s.passes())
    }

    pub fn checked(&self) -> impl Iterator<Item = usize> + '_ {
        self.statuses
            .iter()
            .enumerate()
            .filter(|(_, s)| !matches!(s, GateStatus::NotChecked))
            .map(|(i, _)| i)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GateError {
    #[error("transcript {0} has no defendant aliases")]
    NoAliases(String),
    #[error("score table covers {scores} sentences but transcript has {sentences}")]
    LengthMismatch { scores: usize, sentences: usize },
    /// Retryable: the listed sentences got no verdict.
    #[error("resolver failed for sentences {sentence_ids:?}: {message}")]
    Transport { sentence_ids: Vec<usize>, message: String },
    #[error("resolver rejected sentence {sentence}: {source}")]
    Resolver {
        sentence: usize,
        #[source]
        source: ResolveError,
    },
}

/// Sentence indices whose score is strictly above the gate threshold.
pub fn gate_candidates<S: Scalar>(sentence_scores: &[S], cfg: &PipelineConfig) -> Vec<usize> {
    let gate = S::from_f64(cfg.gate_threshold);
    sentence_scores
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > gate)
        .map(|(i, _)| i)
        .collect()
}

/// Run the resolver on exactly the sentences scoring above the gate threshold.
pub fn gate_sentences<S: Scalar>(
    t: &Transcript,
    sentence_scores: &[S],
    cfg: &PipelineConfig,
    resolver: &dyn Resolver,
) -> Result<GateFlags, GateError> {
    if sentence_scores.len() != t.len() {
        return Err(GateError::LengthMismatch {
            scores: sentence_scores.len(),
            sentences: t.len(),
        });
    }
    let candidates = gate_candidates(sentence_scores, cfg);
    let mut flags = GateFlags::unchecked(t.transcript_id.clone(), t.len());
    if candidates.is_empty() {
        return Ok(flags);
    }
    if t.missing_aliases() {
        return Err(GateError::NoAliases(t.transcript_id.clone()));
    }
    let results: Vec<(usize, Result<ReferenceVerdict, ResolveError>)> = candidates
        .par_iter()
        .map(|&i| (i, resolver.resolve(&ReferenceQuery::for_sentence(t, i, cfg.context_back))))
        .collect();

    let mut failed = Vec::new();
    let mut last_message = String::new();
    for (i, r) in results {
        match r {
            Ok(v) => {
                flags.statuses[i] = GateStatus::Checked {
                    mentions_defendant: v.mentions_defendant,
                    rule: v.rule_fired,
                }
            }
            Err(ResolveError::Transport(msg)) => {
                failed.push(i);
                last_message = msg;
            }
            Err(source) => return Err(GateError::Resolver { sentence: i, source }),
        }
    }
    if !failed.is_empty() {
        return Err(GateError::Transport {
            sentence_ids: failed,
            message: last_message,
        });
    }
    Ok(flags)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum GateRecord {
    Header { transcript_id: String, sentence_count: usize },
    Checked { index: usize, mentions_defendant: bool, rule: Rule },
}

pub fn gate_file_path(scores_dir: &Path, theme: crate::theme::Theme, transcript_id: &str) -> std::path::PathBuf {
    scores_dir.join(theme.code()).join(format!("{transcript_id}.gate.jsonl"))
}

/// Persist only checked sentences; everything else reads back as `NotChecked`.
pub fn store_gate_flags(flags: &GateFlags, path: &Path) -> Result<(), RecordError> {
    let records: Vec<GateRecord> = std::iter::once(GateRecord::Header {
        transcript_id: flags.transcript_id.clone(),
        sentence_count: flags.statuses.len(),
    })
    .chain(flags.statuses.iter().enumerate().filter_map(|(index, s)| match *s {
        GateStatus::NotChecked => None,
        GateStatus::Checked { mentions_defendant, rule } => Some(GateRecord::Checked {
            index,
            mentions_defendant,
            rule,
        }),
    }))
    .collect();
    jsonl::write_file(path, &records)
}

pub fn load_gate_flags(path: &Path) -> Result<GateFlags, RecordError> {
    let mut flags = GateFlags::unchecked("", 0);
    for r in jsonl::read_file::<GateRecord>(path)? {
        match r {
            GateRecord::Header { transcript_id, sentence_count } => {
                flags = GateFlags::unchecked(transcript_id, sentence_count);
            }
            GateRecord::Checked { index, mentions_defendant, rule } => {
                if let Some(s) = flags.statuses.get_mut(index) {
                    *s = GateStatus::Checked { mentions_defendant, rule };
                }
            }
        }
    }
    Ok(flags)
}
