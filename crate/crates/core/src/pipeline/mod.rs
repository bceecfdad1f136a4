//! Sliding windows, window scoring, per-sentence aggregation and training export.

pub mod aggregate;
pub mod export;
pub mod scorer;
pub mod window;

pub use aggregate::{aggregate_sentence_scores, AggregateError, ScoreTable};
pub use export::{export_training_corpus, write_export, ExportMeta, FoldManifest, Label, TrainingExample, TrainingExport};
pub use scorer::{score_windows, LexiconScorer, Paragraph, ScoreError, Scorer, ScorerMeta};
pub use window::{build_windows, containing_windows, window_starts, Window};
