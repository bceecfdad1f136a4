use std::path::PathBuf;

use proptest::prelude::*;
use triage_core::corpus::{
    load_corpus, load_transcript, normalize, segment_transcript, store_transcript, word_count, MIN_WORDS,
};
use triage_core::{Sentence, Transcript};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

#[test]
fn courtroom_golden() {
    let raw = std::fs::read_to_string(fixture("courtroom.txt")).unwrap();
    let golden: Vec<String> =
        serde_json::from_str(&std::fs::read_to_string(fixture("courtroom.golden.json")).unwrap()).unwrap();
    let t = segment_transcript(&raw, "state-v-smith", &["Ms. Smith".into(), "Smith".into()]);
    let got: Vec<&str> = t.texts().collect();
    assert_eq!(got, golden);
    assert_eq!(t.defendant_aliases, ["ms. smith", "smith"]);
}

#[test]
fn courtroom_spans_point_into_normalized_text() {
    let raw = std::fs::read_to_string(fixture("courtroom.txt")).unwrap();
    let norm = normalize(&raw);
    let t = segment_transcript(&raw, "state-v-smith", &["smith".into()]);
    let mut last_end = 0;
    for (i, s) in t.sentences.iter().enumerate() {
        assert_eq!(s.index, i);
        assert!(s.char_span.0 >= last_end);
        assert_eq!(&norm[s.char_span.0..s.char_span.1], s.text);
        last_end = s.char_span.1;
    }
}

fn token() -> impl Strategy<Value = String> {
    prop_oneof![
        4 => "[a-zA-Z]{1,8}".prop_map(String::from),
        1 => "[0-9]{1,4}".prop_map(String::from),
        1 => Just("Mr.".to_string()),
        1 => Just("Q.".to_string()),
        1 => Just("A.".to_string()),
        1 => Just("$".to_string()),
        1 => "[a-z]{1,6}[.?!]".prop_map(String::from),
        1 => "[A-Z][a-z]{0,5}[0-9]{1,2}[.]".prop_map(String::from),
        1 => Just("Édouard".to_string()),
    ]
}

fn separator() -> impl Strategy<Value = &'static str> {
    prop_oneof![6 => Just(" "), 1 => Just("\n"), 1 => Just("\n\n"), 1 => Just("  "), 1 => Just("\t")]
}

fn raw_text() -> impl Strategy<Value = String> {
    prop::collection::vec((token(), separator()), 0..80)
        .prop_map(|parts| parts.into_iter().map(|(t, s)| format!("{t}{s}")).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn kept_sentences_are_clean(raw in raw_text()) {
        let t = segment_transcript(&raw, "t", &["smith".into()]);
        for (i, s) in t.sentences.iter().enumerate() {
            prop_assert_eq!(s.index, i);
            prop_assert!(!s.text.chars().any(|c| c.is_numeric()), "digit in {:?}", s.text);
            prop_assert!(!s.text.chars().any(|c| c.is_uppercase()), "uppercase in {:?}", s.text);
            prop_assert!(word_count(&s.text) >= MIN_WORDS);
            prop_assert_eq!(s.text.trim(), s.text.as_str());
        }
    }

    #[test]
    fn segmentation_is_idempotent(raw in raw_text()) {
        let first = segment_transcript(&raw, "t", &["smith".into()]);
        let joined = first.texts().collect::<Vec<_>>().join("\n\n");
        let second = segment_transcript(&joined, "t", &["smith".into()]);
        prop_assert_eq!(first.texts().collect::<Vec<_>>(), second.texts().collect::<Vec<_>>());
    }

    #[test]
    fn char_spans_increase(raw in raw_text()) {
        let norm = normalize(&raw);
        let t = segment_transcript(&raw, "t", &["smith".into()]);
        let mut last = 0;
        for s in &t.sentences {
            prop_assert!(s.char_span.0 >= last && s.char_span.0 < s.char_span.1);
            prop_assert_eq!(&norm[s.char_span.0..s.char_span.1], s.text.as_str());
            last = s.char_span.1;
        }
    }
}

fn transcript_strategy() -> impl Strategy<Value = Transcript> {
    (
        "[a-z][a-z0-9_-]{0,12}",
        prop::collection::vec("[a-z .,'\"?!]{3,40}", 0..30),
        prop::collection::vec("[a-z]{1,8}( [a-z]{1,8})?", 1..3),
        prop::collection::btree_map("[a-z]{1,6}", any::<i32>(), 0..3),
    )
        .prop_map(|(id, texts, aliases, meta)| {
            let mut offset = 0;
            let sentences = texts
                .into_iter()
                .enumerate()
                .map(|(index, text)| {
                    let span = (offset, offset + text.len());
                    offset = span.1 + 1;
                    Sentence { index, text, char_span: span }
                })
                .collect();
            Transcript {
                transcript_id: id,
                defendant_aliases: aliases,
                sentences,
                source_meta: meta.into_iter().map(|(k, v)| (k, serde_json::json!(v))).collect(),
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn store_load_round_trip(t in transcript_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        store_transcript(&t, dir.path()).unwrap();
        prop_assert_eq!(load_transcript(dir.path(), &t.transcript_id).unwrap(), t);
    }
}

#[test]
fn ten_thousand_sentences_round_trip() {
    let raw: String = (0..10_000)
        .map(|i| format!("Witness {i} said the defendant was there. "))
        .collect();
    let t = segment_transcript(&raw, "long-trial", &["defendant".into()]);
    assert_eq!(t.len(), 10_000);
    let dir = tempfile::tempdir().unwrap();
    store_transcript(&t, dir.path()).unwrap();
    let back = load_transcript(dir.path(), "long-trial").unwrap();
    assert_eq!(back, t);
    assert_eq!(back.sentences[9_999].text, "witness said the defendant was there.");
    assert_eq!(load_corpus(dir.path()).unwrap(), vec![t]);
}
