//! Predicted passages from sentence scores, gold passages from gold labels.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::annotations::GoldLabelSet;
use crate::config::PipelineConfig;
use crate::pipeline::ScoreTable;
use crate::reference::GateFlags;
use crate::scalar::{max_of, Scalar};
use crate::theme::Theme;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Predicted,
    Gold,
}

/// A contiguous, inclusive sentence range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Passage<S> {
    pub transcript_id: String,
    pub theme: Theme,
    #[serde(rename = "start")]
    pub start_sentence: usize,
    #[serde(rename = "end")]
    pub end_sentence: usize,
    pub peak_score: S,
    pub origin: Origin,
    pub defendant_gated: bool,
}

impl<S> Passage<S> {
    pub fn len(&self) -> usize {
        self.end_sentence - self.start_sentence + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn sentences(&self) -> std::ops::RangeInclusive<usize> {
        self.start_sentence..=self.end_sentence
    }

    pub fn contains(&self, other: &Passage<S>) -> bool {
        self.start_sentence <= other.start_sentence && other.end_sentence <= self.end_sentence
    }
}

/// Maximal runs `(start, end)` of consecutive `true` values.
pub fn runs(mask: impl IntoIterator<Item = bool>) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut open: Option<usize> = None;
    let mut n = 0;
    for (i, on) in mask.into_iter().enumerate() {
        match (on, open) {
            (true, None) => open = Some(i),
            (false, Some(s)) => {
                out.push((s, i - 1));
                open = None;
            }
            _ => {}
        }
        n = i + 1;
    }
    if let Some(s) = open {
        out.push((s, n - 1));
    }
    out
}

/// Runs of scores strictly above `group`, kept when some member is strictly
/// above `gate` and passes the defendant check.
pub fn gated_runs<S: Scalar>(scores: &[S], passes: impl Fn(usize) -> bool, group: S, gate: S) -> Vec<(usize, usize)> {
    runs(scores.iter().map(|&s| s > group))
        .into_iter()
        .filter(|&(a, b)| (a..=b).any(|i| scores[i] > gate && passes(i)))
        .collect()
}

pub fn extract_predicted_passages<S: Scalar>(
    table: &ScoreTable<S>,
    flags: &GateFlags,
    cfg: &PipelineConfig,
) -> Vec<Passage<S>> {
    let scores = &table.sentence_scores;
    gated_runs(
        scores,
        |i| flags.passes(i),
        S::from_f64(cfg.group_threshold),
        S::from_f64(cfg.gate_threshold),
    )
    .into_iter()
    .map(|(a, b)| Passage {
        transcript_id: table.transcript_id.clone(),
        theme: table.theme,
        start_sentence: a,
        end_sentence: b,
        peak_score: max_of(scores[a..=b].iter().copied()).expect("run is non-empty"),
        origin: Origin::Predicted,
        defendant_gated: true,
    })
    .collect()
}

/// Runs of consecutive indices in a sorted set.
pub fn index_runs(set: &BTreeSet<usize>) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = Vec::new();
    for &i in set {
        match out.last_mut() {
            Some((_, end)) if *end + 1 == i => *end = i,
            _ => out.push((i, i)),
        }
    }
    out
}

/// Maximal runs of gold-positive sentences. Peak scores start at zero; see
/// [`attach_scores`].
pub fn derive_gold_passages<S: Scalar>(gold: &GoldLabelSet, theme: Theme) -> Vec<Passage<S>> {
    index_runs(gold.positives(theme))
        .into_iter()
        .map(|(a, b)| Passage {
            transcript_id: gold.transcript_id.clone(),
            theme,
            start_sentence: a,
            end_sentence: b,
            peak_score: S::zero(),
            origin: Origin::Gold,
            defendant_gated: false,
        })
        .collect()
}

/// Fill gold passage peaks from aggregated scores (zero where unscored) and
/// mark whether any member passed the defendant gate.
pub fn attach_scores<S: Scalar>(passages: &mut [Passage<S>], table: &ScoreTable<S>, flags: Option<&GateFlags>) {
    for p in passages {
        p.peak_score = table.peak(p.start_sentence, p.end_sentence);
        if let Some(f) = flags {
            p.defendant_gated = p.sentences().any(|i| f.passes(i));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::{GateStatus, Rule};

    fn table(scores: &[f64]) -> ScoreTable<f64> {
        ScoreTable {
            transcript_id: "t".into(),
            theme: Theme::Emotions,
            window_scores: Default::default(),
            sentence_scores: scores.to_vec(),
            scorer_meta: Default::default(),
        }
    }

    fn flags(n: usize, yes: &[usize]) -> GateFlags {
        let mut f = GateFlags::unchecked("t", n);
        for &i in yes {
            f.statuses[i] = GateStatus::Checked {
                mentions_defendant: true,
                rule: Rule::DirectAlias,
            };
        }
        f
    }

    #[test]
    fn one_gated_run() {
        let p = extract_predicted_passages(&table(&[0.6, 0.95, 0.55, 0.2]), &flags(4, &[1]), &PipelineConfig::default());
        assert_eq!(p.len(), 1);
        assert_eq!((p[0].start_sentence, p[0].end_sentence, p[0].peak_score), (0, 2, 0.95));
        assert_eq!(p[0].origin, Origin::Predicted);
    }

    #[test]
    fn run_without_gate_sentence_dropped() {
        let p = extract_predicted_passages(&table(&[0.6, 0.7, 0.3]), &flags(3, &[]), &PipelineConfig::default());
        assert!(p.is_empty());
    }

    #[test]
    fn high_score_without_defendant_dropped() {
        let mut f = flags(3, &[]);
        f.statuses[1] = GateStatus::Checked { mentions_defendant: false, rule: Rule::None };
        let p = extract_predicted_passages(&table(&[0.6, 0.99, 0.6]), &f, &PipelineConfig::default());
        assert!(p.is_empty());
    }

    #[test]
    fn thresholds_are_strict() {
        let cfg = PipelineConfig::default();
        // exactly 0.5 breaks a run; exactly 0.9 does not open the gate
        let p = extract_predicted_passages(&table(&[0.95, 0.5, 0.95]), &flags(3, &[0, 2]), &cfg);
        assert_eq!(p.iter().map(|p| (p.start_sentence, p.end_sentence)).collect::<Vec<_>>(), [(0, 0), (2, 2)]);
        let p = extract_predicted_passages(&table(&[0.6, 0.9, 0.6]), &flags(3, &[1]), &cfg);
        assert!(p.is_empty());
    }

    #[test]
    fn gold_runs() {
        let mut g = GoldLabelSet::new("t");
        for i in [2, 3, 4, 9] {
            g.insert_span(Theme::Emotions, i, i);
        }
        let p: Vec<Passage<f64>> = derive_gold_passages(&g, Theme::Emotions);
        assert_eq!(p.iter().map(|p| (p.start_sentence, p.end_sentence)).collect::<Vec<_>>(), [(2, 4), (9, 9)]);
        assert!(derive_gold_passages::<f64>(&g, Theme::BadMother).is_empty());
    }

    #[test]
    fn gold_peaks_from_scores() {
        let mut g = GoldLabelSet::new("t");
        g.insert_span(Theme::Emotions, 1, 2);
        g.insert_span(Theme::Emotions, 5, 6);
        let mut p = derive_gold_passages(&g, Theme::Emotions);
        attach_scores(&mut p, &table(&[0.1, 0.2, 0.4, 0.0, 0.0]), None);
        assert_eq!(p[0].peak_score, 0.4);
        assert_eq!(p[1].peak_score, 0.0);
    }

    #[test]
    fn runs_edges() {
        assert_eq!(runs([true, true, false, true]), [(0, 1), (3, 3)]);
        assert!(runs(std::iter::empty()).is_empty());
        assert_eq!(runs([true]), [(0, 0)]);
    }
}
