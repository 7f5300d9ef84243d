//! Behaviour of the simulation engine through its public interface.

mod common;

use jockey_core::engine::admit;
use jockey_core::queue::{Job, QueueId, QueueState};
use jockey_core::rng::RngStream;
use jockey_core::{run, run_with, DeltaLambdaPolicy, Horizon, RunOptions, SimConfig, Simulation};

fn departures(mu_i: f64, mu_j: f64, count: u64, seed: u64) -> SimConfig {
    SimConfig {
        horizon: Horizon::Departures { count },
        seed,
        ..SimConfig::with_rates(mu_i, mu_j)
    }
}

fn queues_with(li: usize, lj: usize) -> [QueueState; 2] {
    let mut queues = [QueueState::new(QueueId::I, 4.0), QueueState::new(QueueId::J, 3.0)];
    queues[0].buffer.extend(1000..1000 + li);
    queues[1].buffer.extend(2000..2000 + lj);
    queues
}

#[test]
fn conservation_and_invariants_on_a_medium_run() {
    let config = SimConfig {
        delta_lambda: DeltaLambdaPolicy::Fixed { value: 1.0 },
        ..departures(4.0, 3.0, 10_000, 42)
    };
    let problems = common::invariant_problems(&config);
    assert!(problems.is_empty(), "{problems:?}");
    let r = run(&config).unwrap();
    assert_eq!(r.completions, 10_000);
    assert_eq!(r.arrivals, r.completions + r.in_system);
}

#[test]
fn seeded_runs_repeat_and_seeds_differ() {
    let options = RunOptions {
        trace: true,
        check_invariants: false,
    };
    let a = run_with(&departures(6.0, 3.0, 3_000, 5), options).unwrap();
    let b = run_with(&departures(6.0, 3.0, 3_000, 5), options).unwrap();
    let c = run_with(&departures(6.0, 3.0, 3_000, 6), options).unwrap();
    assert_eq!(a.trace_hash, b.trace_hash);
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.jobs, b.jobs);
    assert_ne!(a.trace_hash, c.trace_hash);
}

#[test]
fn admission_picks_strictly_shorter_queue() {
    let mut rng = RngStream::new(1);
    let mut queues = queues_with(5, 2);
    let mut job = Job::new(0, 0.0);
    assert_eq!(admit(&mut job, &mut queues, &mut rng, 0.0), QueueId::J);
    assert_eq!(queues[1].len(), 3);
    assert_eq!(job.position, 2);
}

#[test]
fn admission_after_a_departure_from_i_goes_to_i() {
    let mut rng = RngStream::new(1);
    let mut queues = queues_with(3, 3);
    queues[0].buffer.pop_front();
    let mut job = Job::new(0, 0.0);
    assert_eq!(admit(&mut job, &mut queues, &mut rng, 1.0), QueueId::I);
}

#[test]
fn ties_are_a_fair_coin() {
    let mut rng = RngStream::new(3);
    let n = 20_000;
    let to_i = (0..n)
        .filter(|&k| {
            let mut queues = queues_with(4, 4);
            admit(&mut Job::new(k, 0.0), &mut queues, &mut rng, 0.0) == QueueId::I
        })
        .count();
    // Four standard deviations of a fair binomial.
    assert!(
        (to_i as f64 - n as f64 / 2.0).abs() < 4.0 * (n as f64 / 4.0).sqrt(),
        "{to_i}"
    );
}

#[test]
fn a_lone_job_is_served_at_once() {
    let r = run(&departures(4.0, 3.0, 1, 9)).unwrap();
    let job = &r.jobs[0];
    assert_eq!(job.total_wait(), Some(0.0));
    assert_eq!(job.jockey_count, 0);
    assert!(job.sojourn().unwrap() > 0.0);
}

#[test]
fn empty_system_sweeps_nothing() {
    let mut sim = Simulation::new(&departures(4.0, 3.0, 10, 0), RunOptions::default()).unwrap();
    assert!(sim.evaluate_jockeys(0).is_empty());
    assert!(sim.evaluate_jockeys(3).is_empty());
}

#[test]
fn no_job_moves_once_in_service() {
    let config = departures(9.0, 2.0, 20_000, 13);
    let r = run_with(
        &config,
        RunOptions {
            trace: true,
            check_invariants: false,
        },
    )
    .unwrap();
    assert!(r.jockey_events > 0);
    let problems = common::migration_problems(&r);
    assert!(problems.is_empty(), "{problems:?}");
}

#[test]
fn stayers_complete_in_arrival_order() {
    let r = run(&departures(7.0, 2.0, 20_000, 21)).unwrap();
    let problems = common::fifo_problems(&r);
    assert!(problems.is_empty(), "{problems:?}");
}

#[test]
fn jockeys_mostly_leave_the_slow_queue() {
    let r = run(&departures(10.0, 1.0, 50_000, 2)).unwrap();
    let [from_i, from_j] = r.migrations_from;
    assert!(from_j > 10 * from_i.max(1), "from i {from_i}, from j {from_j}");
}

#[test]
fn zero_departure_horizon_gives_empty_result() {
    let r = run(&departures(4.0, 3.0, 0, 0)).unwrap();
    assert_eq!((r.arrivals, r.completions, r.jockey_events), (0, 0, 0));
    assert!(r.jobs.is_empty());
    assert_eq!(r.length_samples(), 0);
}

#[test]
fn time_horizon_stops_at_the_clock() {
    let config = SimConfig {
        horizon: Horizon::Time { until: 50.0 },
        ..departures(4.0, 3.0, 0, 8)
    };
    let r = run(&config).unwrap();
    assert!(r.end_time <= 50.0);
    assert!(r.jobs.iter().all(|j| j.arrival <= 50.0));
    assert!(r.completions > 0);
}

#[test]
fn invalid_configs_are_rejected() {
    for config in [
        SimConfig {
            lambda: -1.0,
            ..SimConfig::default()
        },
        SimConfig {
            delta_lambda: DeltaLambdaPolicy::Fixed { value: 7.0 },
            ..SimConfig::default()
        },
        SimConfig {
            d: 0,
            ..SimConfig::default()
        },
    ] {
        assert!(run(&config).is_err(), "{config:?}");
    }
}
