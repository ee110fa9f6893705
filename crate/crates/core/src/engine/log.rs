use serde::{Deserialize, Serialize};

/// One oracle call on a dataset not seen before.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub step: usize,
    pub phase: Phase,
    /// Triplet ids whose composed transform produced the evaluated dataset.
    pub triplets: Vec<String>,
    pub pre_score: f64,
    pub post_score: f64,
    pub accepted: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Greedy,
    GroupTest,
    Minimal,
    Tree,
    Verify,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InterventionLog {
    pub entries: Vec<LogEntry>,
    /// Run-level warnings: skipped transforms, assumption violations, re-violated profiles.
    pub warnings: Vec<String>,
}

impl InterventionLog {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn warn(&mut self, message: impl Into<String>) {
        let m = message.into();
        if !self.warnings.contains(&m) {
            self.warnings.push(m);
        }
    }
}
