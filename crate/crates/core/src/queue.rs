//! Jobs and FCFS buffers.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

pub type JobId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QueueId {
    I,
    J,
}

impl QueueId {
    pub const BOTH: [QueueId; 2] = [QueueId::I, QueueId::J];

    pub fn index(self) -> usize {
        match self {
            QueueId::I => 0,
            QueueId::J => 1,
        }
    }

    pub fn other(self) -> QueueId {
        match self {
            QueueId::I => QueueId::J,
            QueueId::J => QueueId::I,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            QueueId::I => "i",
            QueueId::J => "j",
        }
    }
}

impl fmt::Display for QueueId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// The first time a job occupied `pose` in `queue`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseVisit {
    pub queue: QueueId,
    pub pose: usize,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Job {
    pub id: JobId,
    pub arrival_time: f64,
    pub current_queue: QueueId,
    pub first_queue: QueueId,
    /// Zero-based index from the head of `current_queue`.
    pub position: usize,
    pub jockey_count: u32,
    pub enqueue_time_current: f64,
    pub service_start: Option<f64>,
    pub completion_time: Option<f64>,
    /// Time spent waiting in each queue visited, closed by a migration or by
    /// the start of service.
    pub segment_waits: Vec<f64>,
    /// Every (queue, pose) reached, in order.
    pub visits: Vec<PoseVisit>,
}

impl Job {
    pub fn new(id: JobId, arrival_time: f64) -> Self {
        Job {
            id,
            arrival_time,
            current_queue: QueueId::I,
            first_queue: QueueId::I,
            position: 0,
            jockey_count: 0,
            enqueue_time_current: arrival_time,
            service_start: None,
            completion_time: None,
            segment_waits: Vec::new(),
            visits: Vec::new(),
        }
    }

    pub fn is_waiting(&self) -> bool {
        self.service_start.is_none() && self.completion_time.is_none()
    }

    pub fn sojourn(&self) -> Option<f64> {
        self.completion_time.map(|c| c - self.arrival_time)
    }

    /// Total time spent queued before service began.
    pub fn total_wait(&self) -> Option<f64> {
        self.service_start.map(|s| s - self.arrival_time)
    }

    pub(crate) fn reach(&mut self, queue: QueueId, pose: usize, time: f64) {
        self.position = pose;
        self.visits.push(PoseVisit { queue, pose, time });
    }
}

/// One FCFS buffer. The head of `buffer` is the job in service.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueState {
    pub id: QueueId,
    pub service_rate: f64,
    pub buffer: VecDeque<JobId>,
}

impl QueueState {
    pub fn new(id: QueueId, service_rate: f64) -> Self {
        assert!(service_rate > 0.0, "service rate must be positive");
        QueueState {
            id,
            service_rate,
            buffer: VecDeque::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn head(&self) -> Option<JobId> {
        self.buffer.front().copied()
    }
}
