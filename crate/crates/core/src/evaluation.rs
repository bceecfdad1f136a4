//! Passage precision, top-k precision, sentence recall and model-lawyer agreement.
//!
//! Rates with an empty denominator are `None`; nothing here reports a
//! fabricated zero.

use std::cmp::Ordering;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::annotations::GoldLabelSet;
use crate::config::PipelineConfig;
use crate::passages::Passage;
use crate::pipeline::ScoreTable;
use crate::scalar::Scalar;
use crate::theme::Theme;
use crate::triage::{Decision, Side};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MetricCounts {
    pub predicted_passages: usize,
    pub hit_passages: usize,
    pub gold_sentences: usize,
    pub model_positive_gold_sentences: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport<S> {
    pub transcript_id: String,
    pub theme: Theme,
    pub passage_precision: Option<S>,
    pub top_k: usize,
    pub top_k_precision: Option<S>,
    pub sentence_recall: Option<S>,
    pub counts: MetricCounts,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("passage from transcript {found} evaluated against gold for {expected}")]
    TranscriptMismatch { expected: String, found: String },
    #[error("record {0} has no recognised queue side")]
    UnknownSide(String),
}

fn check_ids<S>(predicted: &[Passage<S>], gold: &GoldLabelSet) -> Result<(), EvalError> {
    match predicted.iter().find(|p| p.transcript_id != gold.transcript_id) {
        Some(p) => Err(EvalError::TranscriptMismatch {
            expected: gold.transcript_id.clone(),
            found: p.transcript_id.clone(),
        }),
        None => Ok(()),
    }
}

fn is_hit<S>(p: &Passage<S>, gold: &GoldLabelSet) -> bool {
    gold.any_positive(p.theme, p.start_sentence, p.end_sentence)
}

/// Share of predicted passages with at least one gold-positive sentence.
pub fn passage_precision<S: Scalar>(
    predicted: &[Passage<S>],
    gold: &GoldLabelSet,
) -> Result<(Option<S>, MetricCounts), EvalError> {
    check_ids(predicted, gold)?;
    let hits = predicted.iter().filter(|p| is_hit(p, gold)).count();
    let counts = MetricCounts {
        predicted_passages: predicted.len(),
        hit_passages: hits,
        ..Default::default()
    };
    Ok((S::ratio(hits, predicted.len()), counts))
}

/// Highest peak first, ties broken by lower start index.
pub fn rank_by_peak<S: Scalar>(passages: &[Passage<S>]) -> Vec<&Passage<S>> {
    let mut ranked: Vec<&Passage<S>> = passages.iter().collect();
    ranked.sort_by(|a, b| {
        b.peak_score
            .partial_cmp(&a.peak_score)
            .unwrap_or(Ordering::Equal)
            .then(a.start_sentence.cmp(&b.start_sentence))
    });
    ranked
}

/// Precision over the `k` highest-peak passages (fewer if fewer exist).
pub fn top_k_precision<S: Scalar>(predicted: &[Passage<S>], gold: &GoldLabelSet, k: usize) -> Option<S> {
    let ranked = rank_by_peak(predicted);
    let top = &ranked[..k.min(ranked.len())];
    S::ratio(top.iter().filter(|p| is_hit(p, gold)).count(), top.len())
}

/// Share of gold-positive sentences whose aggregated score is above the
/// grouping threshold, before any defendant gating.
pub fn sentence_recall<S: Scalar>(
    table: &ScoreTable<S>,
    gold: &GoldLabelSet,
    cfg: &PipelineConfig,
) -> (Option<S>, MetricCounts) {
    let group = S::from_f64(cfg.group_threshold);
    let positives = gold.positives(table.theme);
    let found = positives
        .iter()
        .filter(|&&i| table.sentence_scores.get(i).is_some_and(|&s| s > group))
        .count();
    let counts = MetricCounts {
        gold_sentences: positives.len(),
        model_positive_gold_sentences: found,
        ..Default::default()
    };
    (S::ratio(found, positives.len()), counts)
}

/// All three metrics for one transcript and theme.
pub fn evaluate<S: Scalar>(
    table: &ScoreTable<S>,
    predicted: &[Passage<S>],
    gold: &GoldLabelSet,
    cfg: &PipelineConfig,
) -> Result<MetricReport<S>, EvalError> {
    let (precision, pc) = passage_precision(predicted, gold)?;
    let (recall, rc) = sentence_recall(table, gold, cfg);
    Ok(MetricReport {
        transcript_id: gold.transcript_id.clone(),
        theme: table.theme,
        passage_precision: precision,
        top_k: cfg.top_k,
        top_k_precision: top_k_precision(predicted, gold, cfg.top_k),
        sentence_recall: recall,
        counts: MetricCounts {
            gold_sentences: rc.gold_sentences,
            model_positive_gold_sentences: rc.model_positive_gold_sentences,
            ..pc
        },
    })
}

/// One committed review decision joined with its queue side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewOutcome {
    pub item_id: String,
    pub theme: Theme,
    /// `None` when the side could not be recognised.
    #[serde(default, deserialize_with = "lenient_side")]
    pub side: Option<Side>,
    pub decision: Decision,
    #[serde(default)]
    pub started_at: Option<DateTime<Utc>>,
    #[serde(default)]
    pub ended_at: Option<DateTime<Utc>>,
}

fn lenient_side<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<Side>, D::Error> {
    let raw: Option<String> = Option::deserialize(d)?;
    Ok(raw.and_then(|s| s.parse().ok()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DecisionCounts {
    pub positive: usize,
    pub negative: usize,
    pub undecided: usize,
}

impl DecisionCounts {
    pub fn total(&self) -> usize {
        self.positive + self.negative + self.undecided
    }

    fn add(&mut self, d: Decision) {
        match d {
            Decision::Positive => self.positive += 1,
            Decision::Negative => self.negative += 1,
            Decision::Undecided => self.undecided += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport<S> {
    pub theme: Theme,
    pub fp_counts: DecisionCounts,
    pub fn_counts: DecisionCounts,
    pub total_read: usize,
    /// Lawyers agree with the model: positive on FP items, negative on FN items.
    pub model_lawyer_agreement: Option<S>,
    pub fp_agreement: Option<S>,
    pub undecided_share: Option<S>,
    pub minutes_spent: Option<f64>,
}

impl<S: Scalar> AgreementReport<S> {
    pub fn from_counts(theme: Theme, fp: DecisionCounts, fn_: DecisionCounts, minutes_spent: Option<f64>) -> Self {
        let total = fp.total() + fn_.total();
        AgreementReport {
            theme,
            fp_counts: fp,
            fn_counts: fn_,
            total_read: total,
            model_lawyer_agreement: S::ratio(fp.positive + fn_.negative, total),
            fp_agreement: S::ratio(fp.positive, fp.total()),
            undecided_share: S::ratio(fp.undecided + fn_.undecided, total),
            minutes_spent,
        }
    }
}

/// Agreement statistics over the records of one theme; other themes are ignored.
pub fn agreement_report<S: Scalar>(records: &[ReviewOutcome], theme: Theme) -> Result<AgreementReport<S>, EvalError> {
    let mut fp = DecisionCounts::default();
    let mut fn_ = DecisionCounts::default();
    let mut minutes: Option<f64> = None;
    for r in records.iter().filter(|r| r.theme == theme) {
        match r.side {
            Some(Side::FalsePositive) => fp.add(r.decision),
            Some(Side::FalseNegative) => fn_.add(r.decision),
            None => return Err(EvalError::UnknownSide(r.item_id.clone())),
        }
        if let (Some(a), Some(b)) = (r.started_at, r.ended_at) {
            let m = (b - a).num_milliseconds().max(0) as f64 / 60_000.0;
            *minutes.get_or_insert(0.0) += m;
        }
    }
    Ok(AgreementReport::from_counts(theme, fp, fn_, minutes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::passages::Origin;
    use num_rational::Ratio;

    fn passage(start: usize, end: usize, peak: f64) -> Passage<f64> {
        Passage {
            transcript_id: "t".into(),
            theme: Theme::Emotions,
            start_sentence: start,
            end_sentence: end,
            peak_score: peak,
            origin: Origin::Predicted,
            defendant_gated: true,
        }
    }

    fn gold(idx: &[usize]) -> GoldLabelSet {
        let mut g = GoldLabelSet::new("t");
        for &i in idx {
            g.insert_span(Theme::Emotions, i, i);
        }
        g
    }

    #[test]
    fn precision_quarter() {
        let ps = [passage(0, 1, 0.95), passage(5, 6, 0.95), passage(10, 12, 0.95), passage(20, 20, 0.95)];
        let (p, c) = passage_precision(&ps, &gold(&[11])).unwrap();
        assert_eq!(p, Some(0.25));
        assert_eq!((c.predicted_passages, c.hit_passages), (4, 1));
    }

    #[test]
    fn precision_absent_when_nothing_predicted() {
        assert_eq!(passage_precision::<f64>(&[], &gold(&[1])).unwrap().0, None);
    }

    #[test]
    fn precision_rejects_other_transcript() {
        let mut p = passage(0, 0, 0.95);
        p.transcript_id = "other".into();
        assert!(matches!(passage_precision(&[p], &gold(&[])), Err(EvalError::TranscriptMismatch { .. })));
    }

    #[test]
    fn top_three() {
        let ps = [
            passage(0, 0, 0.99),
            passage(10, 10, 0.98),
            passage(20, 20, 0.97),
            passage(30, 30, 0.96),
            passage(40, 40, 0.95),
        ];
        let p: Option<f64> = top_k_precision(&ps, &gold(&[0, 20, 30, 40]), 3);
        assert_eq!(p, Some(2.0 / 3.0));
    }

    #[test]
    fn top_k_clamps() {
        let ps = [passage(0, 0, 0.99), passage(10, 10, 0.98)];
        assert_eq!(top_k_precision(&ps, &gold(&[10]), 3), Some(0.5));
        assert_eq!(top_k_precision::<f64>(&[], &gold(&[10]), 3), None);
    }

    #[test]
    fn top_k_tie_breaks_on_start() {
        // Rank 3 is a tie at 0.96 between starts 40 and 12; 12 wins.
        let ps = [
            passage(40, 40, 0.96),
            passage(0, 0, 0.99),
            passage(12, 12, 0.96),
            passage(5, 5, 0.97),
        ];
        let ranked: Vec<usize> = rank_by_peak(&ps).iter().map(|p| p.start_sentence).collect();
        assert_eq!(ranked, [0, 5, 12, 40]);
        assert_eq!(top_k_precision(&ps, &gold(&[12]), 3), Some(1.0 / 3.0));
        assert_eq!(top_k_precision(&ps, &gold(&[40]), 3), Some(0.0));
    }

    #[test]
    fn recall_two_thirds() {
        let mut scores = vec![0.0; 15];
        for i in [4, 9, 12] {
            scores[i] = 0.8;
        }
        let table = ScoreTable {
            transcript_id: "t".into(),
            theme: Theme::Emotions,
            window_scores: Default::default(),
            sentence_scores: scores,
            scorer_meta: Default::default(),
        };
        let cfg = PipelineConfig::default();
        let (r, c) = sentence_recall(&table, &gold(&[3, 4, 9]), &cfg);
        assert!((r.unwrap() - 2.0f64 / 3.0).abs() < 1e-15);
        assert_eq!((c.gold_sentences, c.model_positive_gold_sentences), (3, 2));
        assert_eq!(sentence_recall(&table, &gold(&[]), &cfg).0, None);
    }

    fn counts(p: usize, n: usize, u: usize) -> DecisionCounts {
        DecisionCounts { positive: p, negative: n, undecided: u }
    }

    #[test]
    fn norm_row_exact() {
        let r: AgreementReport<Ratio<i64>> =
            AgreementReport::from_counts(Theme::GenderNorms, counts(13, 7, 4), counts(6, 1, 1), None);
        assert_eq!(r.model_lawyer_agreement, Some(Ratio::new(14, 32)));
        assert_eq!(r.model_lawyer_agreement.unwrap().to_f64(), 0.4375);
        assert_eq!(r.total_read, 32);
    }

    #[test]
    fn unknown_side_is_an_error() {
        let rec = ReviewOutcome {
            item_id: "x".into(),
            theme: Theme::Emotions,
            side: None,
            decision: Decision::Positive,
            started_at: None,
            ended_at: None,
        };
        assert_eq!(agreement_report::<f64>(&[rec], Theme::Emotions), Err(EvalError::UnknownSide("x".into())));
        let parsed: ReviewOutcome =
            serde_json::from_str(r#"{"item_id":"y","theme":"EMOT","side":"XX","decision":"positive"}"#).unwrap();
        assert_eq!(parsed.side, None);
    }

    #[test]
    fn minutes_from_timestamps() {
        let t0: DateTime<Utc> = "2024-01-01T10:00:00Z".parse().unwrap();
        let rec = |m: i64, side| ReviewOutcome {
            item_id: format!("{m}"),
            theme: Theme::Emotions,
            side: Some(side),
            decision: Decision::Negative,
            started_at: Some(t0),
            ended_at: Some(t0 + chrono::Duration::minutes(m)),
        };
        let r: AgreementReport<f64> =
            agreement_report(&[rec(3, Side::FalsePositive), rec(2, Side::FalseNegative)], Theme::Emotions).unwrap();
        assert_eq!(r.minutes_spent, Some(5.0));
        assert_eq!(r.model_lawyer_agreement, Some(0.5));
        assert_eq!(r.fp_agreement, Some(0.0));
    }
}
