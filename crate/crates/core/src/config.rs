use serde::{Deserialize, Serialize};

/// Every tunable constant of the pipeline, review queue and gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub window_size: usize,
    pub step: usize,
    /// Sentences strictly above this score are model-positive and group into runs.
    pub group_threshold: f64,
    /// Runs survive only with a defendant-referencing sentence strictly above this.
    pub gate_threshold: f64,
    pub neg_pos_ratio: usize,
    pub rng_seed: u64,
    pub fn_queue_min: usize,
    pub fn_queue_max: usize,
    pub fp_queue_size: usize,
    /// Preceding sentences handed to the reference resolver with each target.
    pub context_back: usize,
    /// Sentences shown on each side of a passage before the reviewer expands.
    pub display_context: usize,
    pub top_k: usize,
    /// Opaque training hyperparameters of whatever model backs the scorer.
    pub scorer_meta: serde_json::Map<String, serde_json::Value>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let mut scorer_meta = serde_json::Map::new();
        scorer_meta.insert("learning_rate".into(), serde_json::json!(2e-5));
        scorer_meta.insert("weight_decay".into(), serde_json::json!(0.01));
        Self {
            window_size: 10,
            step: 1,
            group_threshold: 0.5,
            gate_threshold: 0.9,
            neg_pos_ratio: 3,
            rng_seed: 0,
            fn_queue_min: 6,
            fn_queue_max: 8,
            fp_queue_size: 3,
            context_back: 19,
            display_context: 5,
            top_k: 3,
            scorer_meta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("step must satisfy 0 < step <= window_size (step {step}, window {window})")]
    Step { step: usize, window: usize },
    #[error("thresholds must satisfy 0 <= group <= gate <= 1 (group {group}, gate {gate})")]
    Thresholds { group: f64, gate: f64 },
    #[error("neg_pos_ratio must be at least 1")]
    Ratio,
    #[error("fn_queue_min ({min}) exceeds fn_queue_max ({max})")]
    FnQueue { min: usize, max: usize },
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.step == 0 || self.step > self.window_size {
            return Err(ConfigError::Step {
                step: self.step,
                window: self.window_size,
            });
        }
        let (group, gate) = (self.group_threshold, self.gate_threshold);
        if !(0.0..=1.0).contains(&group) || !(0.0..=1.0).contains(&gate) || group > gate {
            return Err(ConfigError::Thresholds { group, gate });
        }
        if self.neg_pos_ratio < 1 {
            return Err(ConfigError::Ratio);
        }
        if self.fn_queue_min > self.fn_queue_max {
            return Err(ConfigError::FnQueue {
                min: self.fn_queue_min,
                max: self.fn_queue_max,
            });
        }
        Ok(())
    }
}
