//! Training corpus export with per-transcript negative undersampling and
//! leave-one-out fold manifests.

use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::annotations::GoldLabelSet;
use crate::config::PipelineConfig;
use crate::corpus::Transcript;
use crate::jsonl::{self, RecordError};
use crate::pipeline::window::{build_windows, Window};
use crate::theme::Theme;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub transcript_id: String,
    pub window_start: usize,
    pub theme: Theme,
    pub label: Label,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldManifest {
    pub fold_id: usize,
    pub held_out_transcript_id: String,
    pub train_transcript_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportMeta {
    pub transcript_id: String,
    pub positives: usize,
    pub negatives_available: usize,
    pub negatives_kept: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TrainingExport {
    /// Grouped by transcript (input order), each group ordered by window start.
    pub examples: Vec<TrainingExample>,
    pub folds: Vec<FoldManifest>,
    pub meta: Vec<ExportMeta>,
}

/// A window is positive when any member sentence is gold-positive.
pub fn window_label(window: &Window, gold: Option<&GoldLabelSet>, theme: Theme) -> Label {
    match gold {
        Some(g) if g.any_positive(theme, window.start_sentence, window.end_sentence()) => Label::Positive,
        _ => Label::Negative,
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

/// RNG stream for one transcript, independent of where it sits in the list.
pub(crate) fn transcript_rng(seed: u64, transcript_id: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ fnv1a(transcript_id.as_bytes()))
}

pub fn leave_one_out(transcript_ids: &[String]) -> Vec<FoldManifest> {
    transcript_ids
        .iter()
        .enumerate()
        .map(|(fold_id, held)| FoldManifest {
            fold_id,
            held_out_transcript_id: held.clone(),
            train_transcript_ids: transcript_ids.iter().filter(|t| *t != held).cloned().collect(),
        })
        .collect()
}

/// Build labelled windows for one theme.
///
/// Every positive window is kept. Negatives are drawn without replacement,
/// per transcript, up to `neg_pos_ratio` times the positive count. A
/// transcript without gold labels counts as having no positives.
pub fn export_training_corpus(
    transcripts: &[Transcript],
    gold: &BTreeMap<String, GoldLabelSet>,
    theme: Theme,
    cfg: &PipelineConfig,
) -> TrainingExport {
    let mut export = TrainingExport::default();
    for t in transcripts {
        let g = gold.get(&t.transcript_id);
        let windows = build_windows(t, cfg);
        let (pos, neg): (Vec<&Window>, Vec<&Window>) =
            windows.iter().partition(|w| window_label(w, g, theme) == Label::Positive);

        let want = (pos.len() * cfg.neg_pos_ratio).min(neg.len());
        let mut rng = transcript_rng(cfg.rng_seed, &t.transcript_id);
        let mut picked = rand::seq::index::sample(&mut rng, neg.len(), want).into_vec();
        picked.sort_unstable();
        let mut kept: Vec<(&Window, Label)> = pos
            .iter()
            .map(|w| (*w, Label::Positive))
            .chain(picked.iter().map(|&i| (neg[i], Label::Negative)))
            .collect();
        kept.sort_by_key(|(w, _)| w.start_sentence);

        export.meta.push(ExportMeta {
            transcript_id: t.transcript_id.clone(),
            positives: pos.len(),
            negatives_available: neg.len(),
            negatives_kept: want,
            warning: pos
                .is_empty()
                .then(|| format!("no positive {theme} windows; no negatives retained")),
        });
        export.examples.extend(kept.into_iter().map(|(w, label)| TrainingExample {
            transcript_id: t.transcript_id.clone(),
            window_start: w.start_sentence,
            theme,
            label,
            text: w.text.clone(),
        }));
    }
    let ids: Vec<String> = transcripts.iter().map(|t| t.transcript_id.clone()).collect();
    export.folds = leave_one_out(&ids);
    export
}

/// Writes `train.jsonl`, `folds.jsonl` and `export_meta.jsonl` under `out_dir`.
pub fn write_export(export: &TrainingExport, out_dir: &Path) -> Result<(), RecordError> {
    std::fs::create_dir_all(out_dir).map_err(|e| RecordError::io(out_dir, e))?;
    jsonl::write_file(&out_dir.join("train.jsonl"), &export.examples)?;
    jsonl::write_file(&out_dir.join("folds.jsonl"), &export.folds)?;
    jsonl::write_file(&out_dir.join("export_meta.jsonl"), &export.meta)
}
