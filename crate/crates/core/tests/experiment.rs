//! Plan parsing, batch runs and the files they leave behind.

use std::fs;

use jockey_core::experiment::{run_experiment, ExperimentPlan, Manifest, MANIFEST_FILE, SUMMARY_FILE};
use jockey_core::{DeltaLambdaPolicy, Error, Horizon, SigmaPolicy};

const PLAN: &str = "\
# two-point grid
replications = 2
horizon = departures:300
seed = 11

[point]
lambda = 7
delta_lambda = fixed:1

[point]
lambda = 9
delta_lambda = 3      # bare numbers are fixed asymmetries
sigma_policy = fixed:1.5
";

#[test]
fn plan_sections_inherit_defaults() {
    let plan = ExperimentPlan::parse(PLAN).unwrap();
    assert_eq!(plan.replications, 2);
    assert_eq!(plan.points.len(), 2);
    for p in &plan.points {
        assert_eq!(p.horizon, Horizon::Departures { count: 300 });
        assert_eq!(p.seed, 11);
    }
    assert_eq!(plan.points[0].delta_lambda, DeltaLambdaPolicy::Fixed { value: 1.0 });
    assert_eq!(plan.points[1].delta_lambda, DeltaLambdaPolicy::Fixed { value: 3.0 });
    assert_eq!(plan.points[1].sigma_policy, SigmaPolicy::Fixed { value: 1.5 });
    assert_eq!(plan.points[0].sigma_policy, SigmaPolicy::Estimated);
}

#[test]
fn default_sampling_window_follows_lambda() {
    let plan = ExperimentPlan::parse("[point]\nlambda = 20\n").unwrap();
    assert_eq!(plan.points[0].delta_lambda, DeltaLambdaPolicy::default_sampled(20.0));
}

#[test]
fn plan_errors_name_the_line_or_field() {
    let err = ExperimentPlan::parse("lambda = 7\nspeed = 3\n").unwrap_err();
    assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");

    let err = ExperimentPlan::parse("[point]\nreplications = 3\n").unwrap_err();
    assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");

    let err = ExperimentPlan::parse("[grid]\n").unwrap_err();
    assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");

    let err = ExperimentPlan::parse("lambda = -1\n").unwrap_err();
    assert!(err.to_string().contains("`lambda`"), "{err}");

    let err = ExperimentPlan::parse("lambda = 7\ndelta_lambda = fixed:9\n").unwrap_err();
    assert!(err.to_string().contains("`delta_lambda`"), "{err}");

    let err = ExperimentPlan::parse("quadrature_tolerance = abc\n").unwrap_err();
    assert!(err.to_string().contains("`quadrature_tolerance`"), "{err}");
}

#[test]
fn empty_horizon_still_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let plan = ExperimentPlan::parse("horizon = departures:0\nreplications = 1\n").unwrap();
    let outcome = run_experiment(&plan, dir.path(), 1).unwrap();
    assert_eq!(outcome.points[0].summary.n_jobs, 0);
    for name in [SUMMARY_FILE, "histogram.csv", "sojourn.csv", MANIFEST_FILE] {
        assert!(dir.path().join(name).is_file(), "{name} missing");
    }
    let summary = fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap();
    assert_eq!(summary.lines().count(), 2);
}

#[test]
fn manifest_reruns_reproduce_the_outputs() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    let plan = ExperimentPlan::parse(PLAN).unwrap();
    run_experiment(&plan, first.path(), 2).unwrap();

    let manifest_path = first.path().join(MANIFEST_FILE);
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(&manifest_path).unwrap()).unwrap();
    assert_eq!(manifest.plan, plan);
    assert_eq!(manifest.seed, 11);

    let reloaded = ExperimentPlan::load(&manifest_path).unwrap();
    assert_eq!(reloaded, plan);
    run_experiment(&reloaded, second.path(), 1).unwrap();
    for name in [SUMMARY_FILE, "histogram.csv", "sojourn.csv"] {
        let a = fs::read(first.path().join(name)).unwrap();
        let b = fs::read(second.path().join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between runs");
    }
}

#[test]
fn logs_are_written_per_replication_when_requested() {
    let dir = tempfile::tempdir().unwrap();
    let plan = ExperimentPlan::parse("trace = true\njob_log = true\nreplications = 2\nhorizon = 50\n").unwrap();
    run_experiment(&plan, dir.path(), 1).unwrap();
    for r in 0..2 {
        let events = fs::read_to_string(dir.path().join(format!("events_p0_r{r}.csv"))).unwrap();
        let jobs = fs::read_to_string(dir.path().join(format!("jobs_p0_r{r}.csv"))).unwrap();
        assert!(events.lines().count() > 100);
        assert!(jobs.lines().count() > 50);
    }
}

#[test]
fn unwritable_output_is_reported_with_its_path() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let plan = ExperimentPlan::parse("horizon = 10\nreplications = 1\n").unwrap();
    let err = run_experiment(&plan, &blocker.join("out"), 1).unwrap_err();
    assert!(matches!(err, Error::Output { .. }), "{err}");
    assert!(err.to_string().contains("file"), "{err}");
}
