//! Independent reference computations shared by the test targets.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp};

/// Brute-force midpoint double sum on a uniform grid of step `h` of
///
/// `∫_1^τ f_Y(y) ∫_0^y f_X(x) dx dy / ∫_1^τ f_Y(y) dy`
///
/// with `X ~ N(x_mean, σ)`, `Y ~ N(y_mean, σ)`. The inner sum runs over the
/// grid cells below each outer node, with a half cell up to the node itself.
pub fn grid_routing_probability(x_mean: f64, y_mean: f64, sigma: f64, tau: f64, h: f64) -> f64 {
    let pdf = |v: f64, m: f64| {
        let z = (v - m) / sigma;
        (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
    };
    let offset = (1.0 / h).round() as usize;
    let steps = ((tau - 1.0) / h).round() as usize;
    // inner[m] = sum of f_X over the cells [j h, (j + 1) h) with j < m.
    let mut inner = 0.0;
    let mut next_cell = 0usize;
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..steps {
        let cell = offset + k;
        while next_cell < cell {
            inner += pdf((next_cell as f64 + 0.5) * h, x_mean) * h;
            next_cell += 1;
        }
        let y = (cell as f64 + 0.5) * h;
        let partial = pdf(cell as f64 * h + 0.25 * h, x_mean) * 0.5 * h;
        let fy = pdf(y, y_mean) * h;
        num += fy * (inner + partial);
        den += fy;
    }
    num / den
}

/// Fraction of `n` independent pairs with `H < G`, `G ~ Exp(mu_g)`, `H ~ Exp(mu_h)`.
pub fn race_fraction(mu_g: f64, mu_h: f64, n: usize, seed: u64) -> f64 {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let g = Exp::new(mu_g).unwrap();
    let h = Exp::new(mu_h).unwrap();
    let wins = (0..n).filter(|_| h.sample(&mut rng) < g.sample(&mut rng)).count();
    wins as f64 / n as f64
}

/// A random routing-probability instance whose conditioning window carries
/// non-negligible mass: `(x_mean, y_mean, sigma, tau)`.
pub fn random_instance<R: Rng>(rng: &mut R) -> (f64, f64, f64, f64) {
    let sigma: f64 = rng.random_range(0.5..4.0);
    let y_mean: f64 = rng.random_range(1.0..25.0);
    let x_mean: f64 = rng.random_range(0.0..25.0);
    let lo = (y_mean - 2.0 * sigma).max(2.0);
    let tau: f64 = rng.random_range(lo..(y_mean + 3.0 * sigma).max(lo + 1.0));
    let tau = tau.round();
    (x_mean, y_mean, sigma, tau)
}

use std::collections::HashMap;

use jockey_core::engine::{SimResult, TraceKind};
use jockey_core::queue::QueueId;
use jockey_core::{run_with, RunOptions, SimConfig};

/// Runs `config` twice with tracing and invariant checks and returns every
/// property violation found: conservation, determinism, position contiguity,
/// FIFO order between jockeys, the migrate rule and no preemption.
pub fn invariant_problems(config: &SimConfig) -> Vec<String> {
    let options = RunOptions {
        trace: true,
        check_invariants: true,
    };
    let first = run_with(config, options).expect("valid config");
    let second = run_with(config, options).expect("valid config");
    let mut problems = first.invariant_violations.clone();
    if first.trace_hash != second.trace_hash || first.trace != second.trace {
        problems.push("repeated run produced a different trace".into());
    }
    if first.arrivals != first.completions + first.in_system {
        problems.push(format!(
            "conservation: {} arrivals, {} completions, {} in system",
            first.arrivals, first.completions, first.in_system
        ));
    }
    problems.extend(fifo_problems(&first));
    problems.extend(migration_problems(&first));
    problems
}

/// Jobs that never moved must complete in the order they joined their queue.
pub fn fifo_problems(r: &SimResult) -> Vec<String> {
    let mut problems = Vec::new();
    for q in QueueId::BOTH {
        let mut stayers: Vec<_> = r
            .jobs
            .iter()
            .filter(|j| j.jockey_count == 0 && j.first_queue == q && j.completion.is_some())
            .collect();
        stayers.sort_by(|a, b| a.arrival.total_cmp(&b.arrival));
        for w in stayers.windows(2) {
            if w[1].completion < w[0].completion {
                problems.push(format!("queue {q}: job {} overtook job {}", w[1].id, w[0].id));
            }
        }
    }
    problems
}

/// Every logged jockey must match the job's count, and no job may move after
/// its service started.
pub fn migration_problems(r: &SimResult) -> Vec<String> {
    let mut problems = Vec::new();
    let Some(trace) = &r.trace else {
        return vec!["no trace recorded".into()];
    };
    let mut moves: HashMap<usize, u32> = HashMap::new();
    for row in trace.iter().filter(|row| row.kind == TraceKind::Jockey) {
        *moves.entry(row.job_id).or_default() += 1;
        let job = &r.jobs[row.job_id];
        if job.service_start.is_some_and(|s| s < row.event_time) {
            problems.push(format!("job {} moved while in service", job.id));
        }
    }
    for job in &r.jobs {
        let logged = moves.get(&job.id).copied().unwrap_or(0);
        if logged != job.jockey_count {
            problems.push(format!(
                "job {}: {logged} logged moves, count {}",
                job.id, job.jockey_count
            ));
        }
        if job.segment_waits.len() > job.jockey_count as usize + 1 {
            problems.push(format!("job {}: too many wait segments", job.id));
        }
    }
    problems
}
