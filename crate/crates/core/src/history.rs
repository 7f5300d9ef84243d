//! Observed time-to-completion per queue position.

use serde::{Deserialize, Serialize};

/// Running total of the durations recorded at one pose.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub count: u64,
    pub sum: f64,
}

/// For every pose, the durations from first reaching that pose until service
/// completion. Only the count and the sum are retained since the waiting-time
/// estimate is their ratio.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PositionHistory {
    records: Vec<PoseRecord>,
}

impl PositionHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_durations<I>(entries: I) -> Self
    where
        I: IntoIterator<Item = (usize, f64)>,
    {
        let mut h = PositionHistory::new();
        for (pose, t) in entries {
            h.record(pose, t);
        }
        h
    }

    pub fn record(&mut self, pose: usize, duration: f64) {
        debug_assert!(duration > 0.0, "durations are strictly positive, got {duration}");
        if pose >= self.records.len() {
            self.records.resize(pose + 1, PoseRecord::default());
        }
        let r = &mut self.records[pose];
        r.count += 1;
        r.sum += duration;
    }

    pub fn get(&self, pose: usize) -> PoseRecord {
        self.records.get(pose).copied().unwrap_or_default()
    }

    /// Whether `pose` belongs to the known set, i.e. has at least `min_entries` records.
    pub fn contains(&self, pose: usize, min_entries: usize) -> bool {
        self.get(pose).count >= min_entries.max(1) as u64
    }

    /// Arithmetic mean of the records at `pose`, if it is known.
    pub fn mean(&self, pose: usize, min_entries: usize) -> Option<f64> {
        let r = self.get(pose);
        if r.count >= min_entries.max(1) as u64 {
            Some(r.sum / r.count as f64)
        } else {
            None
        }
    }

    /// One past the highest pose with any record.
    pub fn extent(&self) -> usize {
        self.records.len()
    }

    pub fn total_records(&self) -> u64 {
        self.records.iter().map(|r| r.count).sum()
    }
}
