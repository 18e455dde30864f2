use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

/// One line of a run log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub phase: String,
    pub epoch: usize,
    pub retain_loss: f64,
    pub forget_loss: f64,
    pub update_norm: f64,
    pub wall_ms: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunLog {
    pub records: Vec<EpochRecord>,
    pub warnings: Vec<String>,
    /// Set when the wall-clock budget ran out before the run finished.
    pub aborted: bool,
}

impl RunLog {
    pub fn warn(&mut self, msg: impl Into<String>) {
        self.warnings.push(msg.into());
    }

    /// JSON-lines rendering: one object per record.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> serde_json::Result<Vec<EpochRecord>> {
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect()
    }

    pub fn extend(&mut self, other: RunLog) {
        self.records.extend(other.records);
        self.warnings.extend(other.warnings);
        self.aborted |= other.aborted;
    }
}

/// Wall-clock limit shared by the training loops.
#[derive(Clone, Copy, Debug)]
pub struct Budget {
    start: Instant,
    limit: Option<Duration>,
}

impl Budget {
    pub fn unlimited() -> Self {
        Budget {
            start: Instant::now(),
            limit: None,
        }
    }

    pub fn seconds(secs: f64) -> Self {
        Budget {
            start: Instant::now(),
            limit: Some(Duration::from_secs_f64(secs.max(0.0))),
        }
    }

    pub fn exceeded(&self) -> bool {
        self.limit.is_some_and(|l| self.start.elapsed() >= l)
    }

    pub fn elapsed_ms(&self) -> u64 {
        self.start.elapsed().as_millis() as u64
    }
}

impl Default for Budget {
    fn default() -> Self {
        Self::unlimited()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_schema() {
        let mut log = RunLog::default();
        log.records.push(EpochRecord {
            phase: "phase1".into(),
            epoch: 0,
            retain_loss: 0.5,
            forget_loss: 1.5,
            update_norm: 0.25,
            wall_ms: 3,
        });
        let text = log.to_jsonl();
        let v: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        for key in ["phase", "epoch", "retain_loss", "forget_loss", "update_norm", "wall_ms"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(RunLog::from_jsonl(&text).unwrap(), log.records);
    }

    #[test]
    fn zero_budget_is_exceeded() {
        assert!(Budget::seconds(0.0).exceeded());
        assert!(!Budget::unlimited().exceeded());
    }
}
