use std::collections::BTreeMap;

use proptest::prelude::*;
use triage_core::passages::{derive_gold_passages, extract_predicted_passages, Passage};
use triage_core::pipeline::ScoreTable;
use triage_core::triage::{build_queue, read_queue, verify_queue, write_queue, TranscriptEvidence};
use triage_core::{GateFlags, GateStatus, GoldLabelSet, PipelineConfig, Rule, Side, Theme};

/// Per-transcript percent scores and gold (start, extra length) spans.
type Spec = (Vec<u32>, Vec<(usize, usize)>);

struct Fixture {
    tables: Vec<ScoreTable<f64>>,
    predicted: Vec<Vec<Passage<f64>>>,
    gold_passages: Vec<Vec<Passage<f64>>>,
    gold: BTreeMap<String, GoldLabelSet>,
}

fn build(specs: Vec<Spec>, cfg: &PipelineConfig) -> Fixture {
    let mut f = Fixture { tables: vec![], predicted: vec![], gold_passages: vec![], gold: BTreeMap::new() };
    for (k, (raw, spans)) in specs.into_iter().enumerate() {
        let id = format!("trial-{k}");
        let scores: Vec<f64> = raw.iter().map(|&v| v as f64 / 100.0).collect();
        let n = scores.len();
        let table = ScoreTable {
            transcript_id: id.clone(),
            theme: Theme::Emotions,
            window_scores: Default::default(),
            sentence_scores: scores.clone(),
            scorer_meta: Default::default(),
        };
        let mut flags = GateFlags::unchecked(&id, n);
        for (i, &s) in scores.iter().enumerate() {
            if s > cfg.gate_threshold {
                flags.statuses[i] = GateStatus::Checked { mentions_defendant: true, rule: Rule::DirectAlias };
            }
        }
        let mut g = GoldLabelSet::new(&id);
        for (a, l) in spans {
            if a < n {
                g.insert_span(Theme::Emotions, a, (a + l).min(n - 1));
            }
        }
        f.predicted.push(extract_predicted_passages(&table, &flags, cfg));
        f.gold_passages.push(derive_gold_passages(&g, Theme::Emotions));
        f.tables.push(table);
        f.gold.insert(id, g);
    }
    f
}

fn evidence(f: &Fixture) -> Vec<TranscriptEvidence<'_, f64>> {
    f.tables
        .iter()
        .enumerate()
        .map(|(k, t)| TranscriptEvidence {
            transcript_id: &t.transcript_id,
            sentence_count: t.len(),
            predicted: &f.predicted[k],
            gold_passages: &f.gold_passages[k],
            gold: &f.gold[&t.transcript_id],
            table: t,
        })
        .collect()
}

fn specs() -> impl Strategy<Value = Vec<Spec>> {
    prop::collection::vec(
        (
            prop::collection::vec(prop_oneof![3 => 0u32..=50, 1 => 51u32..=100], 20..150),
            prop::collection::vec((0usize..150, 0usize..4), 0..15),
        ),
        1..5,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn queue_invariants(s in specs(), seed in any::<u64>()) {
        let cfg = PipelineConfig { rng_seed: seed, ..Default::default() };
        let f = build(s, &cfg);
        let ev = evidence(&f);
        let q = build_queue(&ev, &cfg, Theme::Emotions, vec![]);
        verify_queue(&q, &f.gold).unwrap();

        let mut reversed = ev.clone();
        reversed.reverse();
        prop_assert_eq!(&build_queue(&reversed, &cfg, Theme::Emotions, vec![]), &q);

        for t in &f.tables {
            let items: Vec<_> = q.items.iter().filter(|i| i.transcript_id == t.transcript_id).collect();
            let fp = items.iter().filter(|i| i.side == Side::FalsePositive).count();
            let fns: Vec<_> = items.iter().filter(|i| i.side == Side::FalseNegative).collect();
            prop_assert!(fp <= cfg.fp_queue_size);
            prop_assert!(fns.len() <= cfg.fn_queue_max);
            for i in &fns {
                prop_assert!(i.passage.sentences().all(|s| t.sentence_scores[s] <= cfg.group_threshold));
            }
        }
        let mut ids: Vec<&str> = q.items.iter().map(|i| i.item_id.as_str()).collect();
        ids.sort();
        ids.dedup();
        prop_assert_eq!(ids.len(), q.items.len());
    }
}

#[test]
fn queue_file_round_trip() {
    let cfg = PipelineConfig { rng_seed: 3, ..Default::default() };
    let scores: Vec<u32> = (0..60).map(|i| if (10..14).contains(&i) || (30..33).contains(&i) { 95 } else { 10 }).collect();
    let f = build(vec![(scores, vec![(30, 2), (45, 3), (50, 0)])], &cfg);
    let q = build_queue(&evidence(&f), &cfg, Theme::Emotions, vec![]);
    assert_eq!(q.items.iter().filter(|i| i.side == Side::FalsePositive).count(), 1);
    assert_eq!(q.items.iter().filter(|i| i.side == Side::FalseNegative).count(), 2);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("queues/EMOT-seed3.jsonl");
    write_queue(&q, &path).unwrap();
    assert_eq!(read_queue(&path).unwrap(), q);
}
