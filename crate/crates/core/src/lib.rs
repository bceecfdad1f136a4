//! Locate rare theme-labelled passages in long trial transcripts and run the
//! expert review of model/annotator disagreements.
//!
//! The flow for one theme:
//!
//! 1. [`corpus`] normalizes raw text into sentences.
//! 2. [`annotations`] turns expert spans into per-sentence gold labels.
//! 3. [`pipeline`] scores overlapping sentence windows and averages them
//!    back onto sentences.
//! 4. [`reference`] checks that high-scoring sentences are about the defendant.
//! 5. [`passages`] groups scored sentences into passages.
//! 6. [`evaluation`] measures passages against gold labels.
//! 7. [`triage`] queues disagreements for blinded review and records decisions.
//!
//! Score-carrying types are generic over [`Scalar`]; the aliases below fix
//! them to `f64`, with an exact rational variant for agreement statistics.

pub mod annotations;
pub mod config;
pub mod corpus;
pub mod evaluation;
pub mod jsonl;
pub mod passages;
pub mod pipeline;
pub mod reference;
pub mod scalar;
pub mod text;
pub mod theme;
pub mod triage;

pub use num_rational::Ratio;

pub use annotations::{GoldAnnotation, GoldLabelSet};
pub use config::PipelineConfig;
pub use corpus::{Sentence, Transcript};
pub use evaluation::{DecisionCounts, MetricCounts, ReviewOutcome};
pub use passages::Origin;
pub use pipeline::{Label, Window};
pub use reference::{BuiltinResolver, GateFlags, GateStatus, ReferenceQuery, ReferenceVerdict, Resolver, Rule};
pub use scalar::Scalar;
pub use theme::Theme;
pub use triage::{AdjudicationRecord, Decision, ReasonCategory, ReviewDesk, Side};

/// Exact rational used to check reported percentages without rounding.
pub type Exact = Ratio<i64>;

pub type ScoreTable = pipeline::ScoreTable<f64>;
pub type Passage = passages::Passage<f64>;
pub type MetricReport = evaluation::MetricReport<f64>;
pub type AgreementReport = evaluation::AgreementReport<f64>;
pub type ExactAgreementReport = evaluation::AgreementReport<Exact>;
pub type DisagreementItem = triage::DisagreementItem<f64>;
pub type ReviewQueue = triage::ReviewQueue<f64>;
