//! Event-driven simulation of two FCFS queues with join-the-shorter-queue
//! admission and waiting-time driven jockeying.
//!
//! Every arrival and departure is followed by one jockey sweep, oldest arrival
//! first, over the waiting jobs that stand behind the entire other queue. A
//! migrating job leaves its queue (the jobs behind it move up), joins the tail
//! of the other queue and is not examined again in the same sweep. The job in
//! service never moves.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::hash::{DefaultHasher, Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::config::{service_rates, DeltaLambdaPolicy, Horizon, SigmaPolicy, SimConfig, SIGMA_FLOOR};
use crate::decision::{is_candidate, routing_probability, Comparison, DecisionCase, JockeyDecision, QueueLengthModel};
use crate::error::Result;
use crate::history::PositionHistory;
use crate::queue::{Job, JobId, PoseVisit, QueueId, QueueState};
use crate::rng::RngStream;
use crate::stats::Welford;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    Departure(QueueId),
    Arrival,
}

impl EventKind {
    fn rank(self) -> (u8, u8) {
        match self {
            EventKind::Departure(q) => (0, q.index() as u8),
            EventKind::Arrival => (1, 0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Time order; at equal times departures precede arrivals and queue i precedes j.
impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then_with(|| self.kind.rank().cmp(&other.kind.rank()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    Arrival,
    Departure,
    Jockey,
}

impl TraceKind {
    pub fn label(self) -> &'static str {
        match self {
            TraceKind::Arrival => "arrival",
            TraceKind::Departure => "departure",
            TraceKind::Jockey => "jockey",
        }
    }
}

/// One row of the event log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub event_time: f64,
    pub kind: TraceKind,
    /// Queue joined (arrival, jockey) or left (departure).
    pub queue: QueueId,
    pub job_id: JobId,
    pub q1_len: usize,
    pub q2_len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Migration {
    pub time: f64,
    pub job_id: JobId,
    pub from: QueueId,
    pub to: QueueId,
    pub decision: JockeyDecision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub id: JobId,
    pub arrival: f64,
    pub service_start: Option<f64>,
    pub completion: Option<f64>,
    pub jockey_count: u32,
    /// Queue the job was first admitted to.
    pub first_queue: QueueId,
    /// Queue the job was last in.
    pub final_queue: QueueId,
    pub segment_waits: Vec<f64>,
}

impl JobRecord {
    pub fn sojourn(&self) -> Option<f64> {
        self.completion.map(|c| c - self.arrival)
    }

    pub fn total_wait(&self) -> Option<f64> {
        self.service_start.map(|s| s - self.arrival)
    }
}

/// Sums over every waiting-time comparison made during a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DecisionTotals {
    pub count: u64,
    pub migrations: u64,
    pub sum_t_w_current: f64,
    pub sum_t_w_target: f64,
    /// Indexed `[Routed, DepartureOnly, Unconditioned]`.
    pub cases: [u64; 3],
}

impl DecisionTotals {
    fn add(&mut self, d: &JockeyDecision) {
        self.count += 1;
        self.migrations += d.migrate as u64;
        self.sum_t_w_current += d.t_w_current;
        self.sum_t_w_target += d.t_w_target;
        let slot = match d.case {
            DecisionCase::Routed => 0,
            DecisionCase::DepartureOnly => 1,
            DecisionCase::Unconditioned => 2,
        };
        self.cases[slot] += 1;
    }

    pub fn merge(&mut self, other: &DecisionTotals) {
        self.count += other.count;
        self.migrations += other.migrations;
        self.sum_t_w_current += other.sum_t_w_current;
        self.sum_t_w_target += other.sum_t_w_target;
        for (a, b) in self.cases.iter_mut().zip(other.cases) {
            *a += b;
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Keep the full event log.
    pub trace: bool,
    /// Check conservation, position contiguity and queue exclusivity after every event.
    pub check_invariants: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub seed: u64,
    pub lambda: f64,
    pub delta_lambda: f64,
    pub mu_i: f64,
    pub mu_j: f64,
    pub d: u32,
    pub end_time: f64,
    pub arrivals: u64,
    pub completions: u64,
    pub jockey_events: u64,
    /// Migrations out of queue i and out of queue j.
    pub migrations_from: [u64; 2],
    pub in_system: u64,
    pub jobs: Vec<JobRecord>,
    /// `length_counts[q][L]` = number of event epochs at which queue `q` held `L` jobs.
    pub length_counts: [Vec<u64>; 2],
    pub decisions: DecisionTotals,
    pub trace_hash: u64,
    pub trace: Option<Vec<TraceRow>>,
    pub invariant_violations: Vec<String>,
}

impl SimResult {
    pub fn length_samples(&self) -> u64 {
        self.length_counts[0].iter().sum()
    }
}

/// A single replication in progress.
#[derive(Debug, Clone)]
pub struct Simulation {
    config: SimConfig,
    options: RunOptions,
    rng: RngStream,
    delta_lambda: f64,
    now: f64,
    queues: [QueueState; 2],
    jobs: Vec<Job>,
    histories: [PositionHistory; 2],
    next_arrival: Option<f64>,
    next_departure: [Option<f64>; 2],
    arrivals: u64,
    completions: u64,
    migrations_from: [u64; 2],
    length_fit: [Welford; 2],
    length_counts: [Vec<u64>; 2],
    decisions: DecisionTotals,
    hasher: DefaultHasher,
    trace: Option<Vec<TraceRow>>,
    violations: Vec<String>,
}

impl Simulation {
    pub fn new(config: &SimConfig, options: RunOptions) -> Result<Self> {
        config.validate()?;
        let mut rng = RngStream::new(config.seed);
        let delta_lambda = match config.delta_lambda {
            DeltaLambdaPolicy::Fixed { value } => value,
            DeltaLambdaPolicy::Sampled { low, high } => rng.uniform_delta_lambda(low, high),
        };
        let (mu_i, mu_j) = service_rates(config.lambda, delta_lambda)?;
        let first_arrival = rng.interarrival(config.lambda);
        Ok(Simulation {
            config: config.clone(),
            options,
            rng,
            delta_lambda,
            now: 0.0,
            queues: [QueueState::new(QueueId::I, mu_i), QueueState::new(QueueId::J, mu_j)],
            jobs: Vec::new(),
            histories: [PositionHistory::new(), PositionHistory::new()],
            next_arrival: Some(first_arrival),
            next_departure: [None, None],
            arrivals: 0,
            completions: 0,
            migrations_from: [0, 0],
            length_fit: [Welford::default(); 2],
            length_counts: [Vec::new(), Vec::new()],
            decisions: DecisionTotals::default(),
            hasher: DefaultHasher::new(),
            trace: options.trace.then(Vec::new),
            violations: Vec::new(),
        })
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn queues(&self) -> &[QueueState; 2] {
        &self.queues
    }

    pub fn queue(&self, q: QueueId) -> &QueueState {
        &self.queues[q.index()]
    }

    pub fn jobs(&self) -> &[Job] {
        &self.jobs
    }

    pub fn job(&self, id: JobId) -> &Job {
        &self.jobs[id]
    }

    pub fn histories(&self) -> &[PositionHistory; 2] {
        &self.histories
    }

    pub fn completions(&self) -> u64 {
        self.completions
    }

    pub fn arrivals(&self) -> u64 {
        self.arrivals
    }

    pub fn rates(&self) -> (f64, f64) {
        (self.queues[0].service_rate, self.queues[1].service_rate)
    }

    pub fn rng_mut(&mut self) -> &mut RngStream {
        &mut self.rng
    }

    /// Moves the clock forward without processing events.
    pub fn advance_to(&mut self, time: f64) {
        assert!(time >= self.now, "time runs forward");
        self.now = time;
    }

    /// The next pending event, if any has been scheduled.
    pub fn peek(&self) -> Option<Event> {
        let arrival = self.next_arrival.map(|time| Event {
            time,
            kind: EventKind::Arrival,
        });
        let departures = QueueId::BOTH.into_iter().filter_map(|q| {
            self.next_departure[q.index()].map(|time| Event {
                time,
                kind: EventKind::Departure(q),
            })
        });
        arrival.into_iter().chain(departures).min()
    }

    fn schedule_arrival(&mut self) {
        self.next_arrival = Some(self.now + self.rng.interarrival(self.config.lambda));
    }

    /// Processes the next event and its jockey sweep.
    pub fn step(&mut self) -> Option<Event> {
        let event = self.peek()?;
        self.now = event.time;
        let departures = match event.kind {
            EventKind::Arrival => {
                self.next_arrival = None;
                self.admit_new_job();
                self.schedule_arrival();
                0
            }
            EventKind::Departure(q) => {
                self.depart(q);
                1
            }
        };
        self.evaluate_jockeys(departures);
        self.sample_lengths();
        if self.options.check_invariants {
            self.check_invariants();
        }
        Some(event)
    }

    /// Creates a job arriving now and admits it to the shorter queue.
    pub fn admit_new_job(&mut self) -> JobId {
        let id = self.jobs.len();
        self.jobs.push(Job::new(id, self.now));
        self.arrivals += 1;
        let q = admit(&mut self.jobs[id], &mut self.queues, &mut self.rng, self.now);
        if self.queues[q.index()].len() == 1 {
            self.start_service(q);
        }
        self.log(TraceKind::Arrival, q, id);
        id
    }

    fn start_service(&mut self, q: QueueId) {
        let head = self.queues[q.index()].head().expect("queue with a head");
        let job = &mut self.jobs[head];
        debug_assert_eq!(job.position, 0);
        job.service_start = Some(self.now);
        job.segment_waits.push(self.now - job.enqueue_time_current);
        let mu = self.queues[q.index()].service_rate;
        self.next_departure[q.index()] = Some(self.now + self.rng.service(q, mu));
    }

    /// Completes the job in service at `q` now. The jobs behind move up and
    /// the new head, if any, starts service.
    pub fn depart(&mut self, q: QueueId) -> JobId {
        let now = self.now;
        let id = self.queues[q.index()]
            .buffer
            .pop_front()
            .unwrap_or_else(|| panic!("departure from empty queue {q} at t = {now}"));
        self.next_departure[q.index()] = None;
        self.completions += 1;
        let job = &mut self.jobs[id];
        job.completion_time = Some(now);
        let visits = std::mem::take(&mut job.visits);
        record_visits(&mut self.histories, &visits, now, job.jockey_count);
        for (pose, &other) in self.queues[q.index()].buffer.iter().enumerate() {
            self.jobs[other].reach(q, pose, now);
        }
        if !self.queues[q.index()].is_empty() {
            self.start_service(q);
        }
        self.log(TraceKind::Departure, q, id);
        id
    }

    /// Current Gaussian fit of the queue lengths.
    pub fn length_model(&self) -> QueueLengthModel {
        let [fi, fj] = &self.length_fit;
        let (mean_i, mean_j) = if fi.n == 0 {
            (self.queues[0].len() as f64, self.queues[1].len() as f64)
        } else {
            (fi.mean.max(0.0), fj.mean.max(0.0))
        };
        let sigma = match self.config.sigma_policy {
            SigmaPolicy::Fixed { value } => value,
            SigmaPolicy::Estimated => {
                let dof = (fi.n + fj.n).saturating_sub(2);
                let pooled = if dof > 0 {
                    ((fi.m2 + fj.m2) / dof as f64).sqrt()
                } else {
                    0.0
                };
                pooled.max(SIGMA_FLOOR)
            }
        };
        QueueLengthModel::new(mean_i, mean_j, sigma)
    }

    fn decide(
        &self,
        job: JobId,
        model: &QueueLengthModel,
        p_cache: &mut ProbabilityCache,
        departures: u32,
    ) -> JockeyDecision {
        let job = &self.jobs[job];
        let current = job.current_queue;
        let target = current.other();
        let target_len = self.queues[target.index()].len();
        let p = p_cache.get(target, target_len, model, self.config.quadrature_tolerance);
        Comparison {
            current_pose: job.position,
            current_len: self.queues[current.index()].len(),
            current_history: &self.histories[current.index()],
            target_len,
            target_history: &self.histories[target.index()],
            routing_probability: p,
            lambda: self.config.lambda,
            min_history: self.config.min_history_for_eq2,
            departures,
        }
        .decide()
    }

    fn is_candidate(&self, id: JobId) -> bool {
        let job = &self.jobs[id];
        is_candidate(job.position, self.queues[job.current_queue.other().index()].len())
    }

    /// One jockey sweep. `departures` is the number of completions that
    /// triggered it.
    pub fn evaluate_jockeys(&mut self, departures: u32) -> Vec<Migration> {
        let [li, lj] = [self.queues[0].len(), self.queues[1].len()];
        // Candidates stand behind the entire other queue.
        if li.abs_diff(lj) < 2 {
            return Vec::new();
        }
        let model = self.length_model();
        let mut cache = ProbabilityCache::default();

        // Until the first migration every comparison sees the same state, so
        // a sweep without migrations can be evaluated in any order.
        let mut scan = DecisionTotals::default();
        let mut any = false;
        let mut flagged = Vec::new();
        for q in QueueId::BOTH {
            let first = self.queues[q.other().index()].len() + 1;
            for &id in self.queues[q.index()].buffer.iter().skip(first) {
                let d = self.decide(id, &model, &mut cache, departures);
                if self.options.check_invariants {
                    flagged.extend(decision_violation(&d, self.now));
                }
                any |= d.migrate;
                scan.add(&d);
            }
        }
        self.violations.append(&mut flagged);
        if !any {
            self.decisions.merge(&scan);
            return Vec::new();
        }

        let mut order: Vec<JobId> = self
            .queues
            .iter()
            .flat_map(|q| q.buffer.iter().skip(1).copied())
            .collect();
        order.sort_by(|&a, &b| {
            self.jobs[a]
                .arrival_time
                .total_cmp(&self.jobs[b].arrival_time)
                .then(a.cmp(&b))
        });
        let mut moved = HashSet::new();
        let mut migrations = Vec::new();
        for id in order {
            if moved.contains(&id) || !self.is_candidate(id) {
                continue;
            }
            let d = self.decide(id, &model, &mut cache, departures);
            debug_assert!(!d.migrate || d.t_w_target < d.t_w_current);
            self.decisions.add(&d);
            if self.options.check_invariants {
                self.violations.extend(decision_violation(&d, self.now));
            }
            if d.migrate {
                let from = self.jobs[id].current_queue;
                self.migrate(id);
                moved.insert(id);
                migrations.push(Migration {
                    time: self.now,
                    job_id: id,
                    from,
                    to: from.other(),
                    decision: d,
                });
            }
        }
        migrations
    }

    fn migrate(&mut self, id: JobId) {
        let now = self.now;
        let from = self.jobs[id].current_queue;
        let to = from.other();
        let pose = self.jobs[id].position;
        let removed = self.queues[from.index()].buffer.remove(pose);
        debug_assert_eq!(removed, Some(id));
        for p in pose..self.queues[from.index()].len() {
            let other = self.queues[from.index()].buffer[p];
            self.jobs[other].reach(from, p, now);
        }
        let landing = self.queues[to.index()].len();
        self.queues[to.index()].buffer.push_back(id);
        let job = &mut self.jobs[id];
        job.segment_waits.push(now - job.enqueue_time_current);
        job.enqueue_time_current = now;
        job.current_queue = to;
        job.jockey_count += 1;
        job.reach(to, landing, now);
        self.migrations_from[from.index()] += 1;
        if landing == 0 {
            self.start_service(to);
        }
        self.log(TraceKind::Jockey, to, id);
    }

    fn sample_lengths(&mut self) {
        for q in QueueId::BOTH {
            let len = self.queues[q.index()].len();
            self.length_fit[q.index()].push(len as f64);
            let counts = &mut self.length_counts[q.index()];
            if counts.len() <= len {
                counts.resize(len + 1, 0);
            }
            counts[len] += 1;
        }
    }

    fn log(&mut self, kind: TraceKind, queue: QueueId, job_id: JobId) {
        let row = TraceRow {
            event_time: self.now,
            kind,
            queue,
            job_id,
            q1_len: self.queues[0].len(),
            q2_len: self.queues[1].len(),
        };
        row.event_time.to_bits().hash(&mut self.hasher);
        (kind as u8, queue.index(), job_id, row.q1_len, row.q2_len).hash(&mut self.hasher);
        if let Some(trace) = self.trace.as_mut() {
            trace.push(row);
        }
    }

    fn check_invariants(&mut self) {
        let in_queues = (self.queues[0].len() + self.queues[1].len()) as u64;
        if self.arrivals != self.completions + in_queues {
            self.violations.push(format!(
                "t={}: conservation {} != {} + {}",
                self.now, self.arrivals, self.completions, in_queues
            ));
        }
        let mut seen = HashSet::new();
        for q in &self.queues {
            for (pose, &id) in q.buffer.iter().enumerate() {
                let job = &self.jobs[id];
                if !seen.insert(id) {
                    self.violations.push(format!("t={}: job {id} appears twice", self.now));
                }
                if job.position != pose || job.current_queue != q.id {
                    self.violations.push(format!(
                        "t={}: job {id} believes ({}, {}) but sits at ({}, {pose})",
                        self.now, job.current_queue, job.position, q.id
                    ));
                }
                if job.completion_time.is_some() {
                    self.violations
                        .push(format!("t={}: completed job {id} still queued", self.now));
                }
                if (pose == 0) != job.service_start.is_some() {
                    self.violations
                        .push(format!("t={}: job {id} service state wrong at pose {pose}", self.now));
                }
            }
        }
    }

    fn horizon_reached(&self) -> bool {
        match self.config.horizon {
            Horizon::Departures { count } => self.completions >= count,
            Horizon::Time { until } => self.peek().is_some_and(|e| e.time > until),
        }
    }

    /// Runs until the configured horizon.
    pub fn run_to_horizon(&mut self) {
        if self.config.horizon.is_empty() {
            return;
        }
        while !self.horizon_reached() {
            if self.step().is_none() {
                break;
            }
        }
        if let Horizon::Time { until } = self.config.horizon {
            self.now = self.now.max(until);
        }
    }

    pub fn finish(self) -> SimResult {
        let in_system = (self.queues[0].len() + self.queues[1].len()) as u64;
        let jobs = self
            .jobs
            .into_iter()
            .map(|j| JobRecord {
                id: j.id,
                arrival: j.arrival_time,
                service_start: j.service_start,
                completion: j.completion_time,
                jockey_count: j.jockey_count,
                first_queue: j.first_queue,
                final_queue: j.current_queue,
                segment_waits: j.segment_waits,
            })
            .collect();
        SimResult {
            seed: self.config.seed,
            lambda: self.config.lambda,
            delta_lambda: self.delta_lambda,
            mu_i: self.queues[0].service_rate,
            mu_j: self.queues[1].service_rate,
            d: self.config.d,
            end_time: self.now,
            arrivals: self.arrivals,
            completions: self.completions,
            jockey_events: self.migrations_from[0] + self.migrations_from[1],
            migrations_from: self.migrations_from,
            in_system,
            jobs,
            length_counts: self.length_counts,
            decisions: self.decisions,
            trace_hash: self.hasher.finish(),
            trace: self.trace,
            invariant_violations: self.violations,
        }
    }
}

fn decision_violation(d: &JockeyDecision, now: f64) -> Option<String> {
    (d.migrate != (d.t_w_target < d.t_w_current)).then(|| {
        format!(
            "t={now}: migrate = {} with T_w,k = {} and T_w,tau = {}",
            d.migrate, d.t_w_current, d.t_w_target
        )
    })
}

/// Routing probabilities for the current sweep, keyed by target queue and its length.
#[derive(Debug, Default)]
struct ProbabilityCache {
    entries: Vec<(QueueId, usize, f64)>,
}

impl ProbabilityCache {
    fn get(&mut self, target: QueueId, target_len: usize, model: &QueueLengthModel, tol: f64) -> f64 {
        if let Some(&(_, _, p)) = self.entries.iter().find(|e| e.0 == target && e.1 == target_len) {
            return p;
        }
        let p = routing_probability((target_len + 1) as f64, &model.toward(target), tol).value;
        self.entries.push((target, target_len, p));
        p
    }
}

/// Appends `job` to the tail of the strictly shorter queue; equal lengths are
/// settled by a fair coin from the tie-break substream.
pub fn admit(job: &mut Job, queues: &mut [QueueState; 2], rng: &mut RngStream, now: f64) -> QueueId {
    let (li, lj) = (queues[0].len(), queues[1].len());
    let q = match li.cmp(&lj) {
        Ordering::Less => QueueId::I,
        Ordering::Greater => QueueId::J,
        Ordering::Equal => {
            if rng.coin() {
                QueueId::I
            } else {
                QueueId::J
            }
        }
    };
    let pose = queues[q.index()].len();
    queues[q.index()].buffer.push_back(job.id);
    job.current_queue = q;
    job.first_queue = q;
    job.enqueue_time_current = now;
    job.reach(q, pose, now);
    q
}

/// Adds `completion − first reach time` for every distinct (queue, pose) the
/// job occupied.
fn record_visits(histories: &mut [PositionHistory; 2], visits: &[PoseVisit], completion: f64, jockeys: u32) {
    // Poses strictly decrease within a stay, and with one migration the two
    // stays are in different queues, so only repeat movers can revisit.
    if jockeys <= 1 {
        for v in visits {
            histories[v.queue.index()].record(v.pose, completion - v.time);
        }
        return;
    }
    let mut seen = HashSet::with_capacity(visits.len());
    for v in visits {
        if seen.insert((v.queue, v.pose)) {
            histories[v.queue.index()].record(v.pose, completion - v.time);
        }
    }
}

/// Runs one replication without tracing.
pub fn run(config: &SimConfig) -> Result<SimResult> {
    run_with(config, RunOptions::default())
}

pub fn run_with(config: &SimConfig, options: RunOptions) -> Result<SimResult> {
    let mut sim = Simulation::new(config, options)?;
    sim.run_to_horizon();
    Ok(sim.finish())
}
