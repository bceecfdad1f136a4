//! Shared fixtures for the gateway tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde_json::Value;
use triage_core::corpus::store_transcript;
use triage_core::passages::{derive_gold_passages, extract_predicted_passages};
use triage_core::pipeline::ScoreTable;
use triage_core::triage::{build_queue, write_queue, TranscriptEvidence};
use triage_core::{GateFlags, GateStatus, GoldLabelSet, PipelineConfig, ReviewQueue, Rule, Sentence, Theme, Transcript};

pub struct ReviewFixture {
    pub corpus_dir: PathBuf,
    pub state_dir: PathBuf,
    pub queue: ReviewQueue,
    pub cfg: PipelineConfig,
}

pub fn transcript(id: &str, n: usize) -> Transcript {
    Transcript {
        transcript_id: id.into(),
        defendant_aliases: vec!["smith".into()],
        sentences: (0..n)
            .map(|i| Sentence {
                index: i,
                text: format!("testimony line {i} about the evening"),
                char_span: (0, 0),
            })
            .collect(),
        source_meta: Default::default(),
    }
}

/// One 80-sentence transcript whose EMOT queue holds two FP and three FN items.
pub fn review_fixture(root: &Path) -> ReviewFixture {
    let cfg = PipelineConfig { rng_seed: 7, ..Default::default() };
    let corpus_dir = root.join("corpus");
    let state_dir = root.join("state");
    let t = transcript("trial-a", 80);
    store_transcript(&t, &corpus_dir).unwrap();

    let mut scores = vec![0.1; 80];
    for i in (10..=12).chain(40..=41).chain([70]) {
        scores[i] = 0.95;
    }
    let table = ScoreTable {
        transcript_id: "trial-a".into(),
        theme: Theme::Emotions,
        window_scores: BTreeMap::new(),
        sentence_scores: scores.clone(),
        scorer_meta: Default::default(),
    };
    let mut flags = GateFlags::unchecked("trial-a", 80);
    for (i, &s) in scores.iter().enumerate() {
        if s > 0.9 {
            flags.statuses[i] = GateStatus::Checked { mentions_defendant: true, rule: Rule::DirectAlias };
        }
    }
    let mut gold = GoldLabelSet::new("trial-a");
    for (a, b) in [(2, 3), (25, 27), (40, 41), (60, 62)] {
        gold.insert_span(Theme::Emotions, a, b);
    }
    let predicted = extract_predicted_passages(&table, &flags, &cfg);
    let gold_passages = derive_gold_passages(&gold, Theme::Emotions);
    let ev = [TranscriptEvidence {
        transcript_id: "trial-a",
        sentence_count: 80,
        predicted: &predicted,
        gold_passages: &gold_passages,
        gold: &gold,
        table: &table,
    }];
    let queue = build_queue(&ev, &cfg, Theme::Emotions, vec![]);
    write_queue(&queue, &state_dir.join("queues").join(format!("{}.jsonl", queue.queue_id))).unwrap();
    ReviewFixture { corpus_dir, state_dir, queue, cfg }
}

const FORBIDDEN_KEYS: [&str; 7] = ["side", "ga_label", "model_label", "revealed", "origin", "defendant_gated", "label"];

/// Paths of every field in `v` that would leak side, labels or scores.
pub fn blinding_violations(v: &Value) -> Vec<String> {
    fn walk(v: &Value, path: &str, out: &mut Vec<String>) {
        match v {
            Value::Object(m) => {
                for (k, x) in m {
                    let p = format!("{path}.{k}");
                    if FORBIDDEN_KEYS.contains(&k.as_str()) || k.contains("score") {
                        out.push(p.clone());
                    }
                    walk(x, &p, out);
                }
            }
            Value::Array(a) => {
                for (i, x) in a.iter().enumerate() {
                    walk(x, &format!("{path}[{i}]"), out);
                }
            }
            Value::String(s) if s == "FP" || s == "FN" => out.push(format!("{path}={s}")),
            _ => {}
        }
    }
    let mut out = Vec::new();
    walk(v, "$", &mut out);
    out
}

pub fn get(url: &str) -> (u16, Value) {
    let r = reqwest::blocking::get(url).unwrap();
    let status = r.status().as_u16();
    (status, r.json().unwrap_or(Value::Null))
}

pub fn post(url: &str, reviewer: &str, body: &Value) -> (u16, Value) {
    let r = reqwest::blocking::Client::new()
        .post(url)
        .header("X-Reviewer-Id", reviewer)
        .json(body)
        .send()
        .unwrap();
    let status = r.status().as_u16();
    (status, r.json().unwrap_or(Value::Null))
}

pub fn decision_body(decision: &str) -> Value {
    serde_json::json!({
        "decision": decision,
        "reason_text": "joint reading",
        "reason_category": "neutral_or_factual",
        "reviewers": ["lawyer-b"],
    })
}
