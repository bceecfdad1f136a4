use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::corpus::Transcript;

/// A run of consecutive sentences scored as one paragraph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub transcript_id: String,
    pub start_sentence: usize,
    pub length: usize,
    pub text: String,
}

impl Window {
    pub fn id(&self) -> String {
        window_id(&self.transcript_id, self.start_sentence)
    }

    pub fn end_sentence(&self) -> usize {
        self.start_sentence + self.length - 1
    }

    pub fn contains(&self, sentence: usize) -> bool {
        (self.start_sentence..self.start_sentence + self.length).contains(&sentence)
    }
}

pub fn window_id(transcript_id: &str, start: usize) -> String {
    format!("{transcript_id}:{start}")
}

/// Start indices of the windows over `n` sentences.
///
/// Starts run `0, step, 2*step, ..` up to `n - window_size`. When the step
/// does not land on `n - window_size` a final window is added there so the
/// tail sentences are still covered. With fewer sentences than the window
/// size there is one window at 0.
pub fn window_starts(n: usize, cfg: &PipelineConfig) -> Vec<usize> {
    let w = cfg.window_size;
    if n == 0 {
        return Vec::new();
    }
    if n < w {
        return vec![0];
    }
    let last = n - w;
    let mut starts: Vec<usize> = (0..=last).step_by(cfg.step.max(1)).collect();
    if starts.last() != Some(&last) {
        starts.push(last);
    }
    starts
}

/// Length of every window over `n` sentences.
pub fn window_len(n: usize, cfg: &PipelineConfig) -> usize {
    n.min(cfg.window_size)
}

/// Starts of the windows that contain sentence `i`.
pub fn containing_windows(i: usize, n: usize, cfg: &PipelineConfig) -> Vec<usize> {
    let len = window_len(n, cfg);
    window_starts(n, cfg)
        .into_iter()
        .filter(|&s| s <= i && i < s + len)
        .collect()
}

pub fn build_windows(t: &Transcript, cfg: &PipelineConfig) -> Vec<Window> {
    let n = t.len();
    let len = window_len(n, cfg);
    window_starts(n, cfg)
        .into_iter()
        .map(|start| Window {
            transcript_id: t.transcript_id.clone(),
            start_sentence: start,
            length: len,
            text: t.sentences[start..start + len]
                .iter()
                .map(|s| s.text.as_str())
                .collect::<Vec<_>>()
                .join(" "),
        })
        .collect()
}
