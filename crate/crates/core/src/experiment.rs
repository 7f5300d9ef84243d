//! Monte Carlo batches over a grid of configurations.
//!
//! A plan is a flat `key = value` file. Keys before the first `[point]`
//! section are defaults for every point; each `[point]` section starts from
//! those defaults and overrides what it names. Without sections the defaults
//! form a single point. Plan-level keys are `replications`, `trace` and
//! `job_log`; every other key is a [`SimConfig`] field.
//!
//! ```text
//! replications = 30
//! horizon = departures:100000
//!
//! [point]
//! lambda = 7
//! delta_lambda = fixed:1
//! ```
//!
//! Replication `r` of a point runs with seed `seed + r`. Replications fan out
//! over a worker pool and are merged in (point, replication) order, so every
//! output depends only on the plan.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{DeltaLambdaPolicy, SimConfig};
use crate::engine::{run_with, RunOptions, SimResult, TraceRow};
use crate::error::{Error, Result};
use crate::metrics::{self, Aggregate, LengthHistogram, RunSummary, SojournComparison};

pub const DEFAULT_REPLICATIONS: u32 = 30;

pub const SUMMARY_FILE: &str = "summary.csv";
pub const HISTOGRAM_FILE: &str = "histogram.csv";
pub const SOJOURN_FILE: &str = "sojourn.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub points: Vec<SimConfig>,
    pub replications: u32,
    /// Write the event log of every replication.
    pub trace: bool,
    /// Write the per-job log of every replication.
    pub job_log: bool,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        ExperimentPlan {
            points: vec![SimConfig::default()],
            replications: DEFAULT_REPLICATIONS,
            trace: false,
            job_log: false,
        }
    }
}

/// Accumulates the keys of one section.
#[derive(Debug, Clone, Default)]
struct Section {
    entries: Vec<(usize, String, String)>,
}

impl Section {
    fn apply(&self, base: &SimConfig) -> Result<SimConfig> {
        let mut config = base.clone();
        let mut explicit_delta = false;
        for (line, key, value) in &self.entries {
            config.set(key, value).map_err(|e| at_line(*line, e))?;
            explicit_delta |= key == "delta_lambda";
        }
        // The default sampling window scales with lambda unless set explicitly.
        let defaulted = matches!(base.delta_lambda, DeltaLambdaPolicy::Sampled { .. })
            && base.delta_lambda == DeltaLambdaPolicy::default_sampled(base.lambda);
        if !explicit_delta && defaulted {
            config.delta_lambda = DeltaLambdaPolicy::default_sampled(config.lambda);
        }
        Ok(config)
    }
}

fn at_line(line: usize, e: Error) -> Error {
    match e {
        Error::InvalidConfig { field, reason } => Error::InvalidConfig {
            field,
            reason: format!("{reason} (line {line})"),
        },
        other => other,
    }
}

impl ExperimentPlan {
    /// Parses the `key = value` plan format. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut plan = ExperimentPlan {
            points: Vec::new(),
            ..ExperimentPlan::default()
        };
        let mut defaults = Section::default();
        let mut sections: Vec<Section> = Vec::new();
        for (index, raw) in text.lines().enumerate() {
            let line = index + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if content.starts_with('[') {
                if content != "[point]" {
                    return Err(Error::Parse {
                        line,
                        reason: format!("unknown section `{content}`, expected `[point]`"),
                    });
                }
                sections.push(Section::default());
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(Error::Parse {
                    line,
                    reason: format!("expected `key = value`, got `{content}`"),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            match key {
                "replications" | "trace" | "job_log" => {
                    if !sections.is_empty() {
                        return Err(Error::Parse {
                            line,
                            reason: format!("`{key}` applies to the whole plan and must precede the first [point]"),
                        });
                    }
                    plan.set(key, value).map_err(|e| at_line(line, e))?;
                }
                _ if SimConfig::FIELDS.contains(&key) => {
                    let target = sections.last_mut().unwrap_or(&mut defaults);
                    target.entries.push((line, key.to_string(), value.to_string()));
                }
                _ => {
                    return Err(Error::Parse {
                        line,
                        reason: format!("unknown key `{key}`"),
                    })
                }
            }
        }
        let base = defaults.apply(&SimConfig::default())?;
        plan.points = if sections.is_empty() {
            vec![base]
        } else {
            sections.iter().map(|s| s.apply(&base)).collect::<Result<_>>()?
        };
        plan.validate()?;
        Ok(plan)
    }

    /// Sets a plan-level key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let flag = |v: &str| match v {
            "true" | "1" | "yes" | "on" => Ok(true),
            "false" | "0" | "no" | "off" => Ok(false),
            _ => Err(Error::config(key, format!("expected true or false, got `{v}`"))),
        };
        match key {
            "replications" => {
                self.replications = value
                    .parse()
                    .map_err(|_| Error::config(key, format!("expected a positive integer, got `{value}`")))?
            }
            "trace" => self.trace = flag(value)?,
            "job_log" => self.job_log = flag(value)?,
            _ => return Err(Error::config(key, "not a plan setting")),
        }
        Ok(())
    }

    /// Overrides `key` on every point.
    pub fn set_all(&mut self, key: &str, value: &str) -> Result<()> {
        for point in &mut self.points {
            point.set(key, value)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications < 1 {
            return Err(Error::config("replications", "must be >= 1"));
        }
        if self.points.is_empty() {
            return Err(Error::config("points", "the grid has no points"));
        }
        for point in &self.points {
            point.validate()?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        if text.trim_start().starts_with('{') {
            let manifest: Manifest = serde_json::from_str(&text)?;
            manifest.plan.validate()?;
            return Ok(manifest.plan);
        }
        Self::parse(&text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timestamps {
    pub started: String,
    pub finished: String,
}

/// Everything needed to re-run an experiment exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    /// Base seed of the first grid point.
    pub seed: u64,
    pub plan: ExperimentPlan,
    pub timestamps: Timestamps,
}

/// Pooled outputs of one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointOutcome {
    pub config: SimConfig,
    pub aggregate: Aggregate,
    pub summary: RunSummary,
    pub histograms: [LengthHistogram; 2],
    pub sojourns: SojournComparison,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub points: Vec<PointOutcome>,
    pub manifest: Manifest,
}

/// Configuration of replication `rep` of `point`.
pub fn replication_config(point: &SimConfig, rep: u32) -> SimConfig {
    SimConfig {
        seed: point.seed.wrapping_add(rep as u64),
        ..point.clone()
    }
}

/// Runs every replication of `plan` on `jobs` worker threads and pools them
/// per point. `per_replication` sees each raw result (in no particular
/// order) before it is reduced.
pub fn run_batch<F>(plan: &ExperimentPlan, jobs: usize, per_replication: F) -> Result<Vec<PointOutcome>>
where
    F: Fn(usize, u32, &SimResult) -> Result<()> + Sync,
{
    plan.validate()?;
    let tasks: Vec<(usize, u32)> = (0..plan.points.len())
        .flat_map(|p| (0..plan.replications).map(move |r| (p, r)))
        .collect();
    let options = RunOptions {
        trace: plan.trace,
        check_invariants: false,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    let reduced: Vec<Result<Aggregate>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(p, r)| {
                let result = run_with(&replication_config(&plan.points[p], r), options)?;
                per_replication(p, r, &result)?;
                Ok(Aggregate::from_result(&result))
            })
            .collect()
    });
    let mut pooled = vec![Aggregate::default(); plan.points.len()];
    for (&(p, _), agg) in tasks.iter().zip(reduced) {
        pooled[p].merge(&agg?)?;
    }
    Ok(plan
        .points
        .iter()
        .zip(pooled)
        .map(|(config, aggregate)| PointOutcome {
            config: config.clone(),
            summary: aggregate.summary(),
            histograms: aggregate.histograms(),
            sojourns: aggregate.sojourns(),
            aggregate,
        })
        .collect())
}

/// Runs `plan` and writes its CSVs, optional logs and manifest under `out`.
pub fn run_experiment(plan: &ExperimentPlan, out: &Path, jobs: usize) -> Result<ExperimentOutcome> {
    plan.validate()?;
    create_dir(out)?;
    let started = now();
    let points = run_batch(plan, jobs, |p, r, result| write_logs(plan, out, p, r, result))?;
    write_point_csvs(out, &points)?;
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: plan.points[0].seed,
        plan: plan.clone(),
        timestamps: Timestamps {
            started,
            finished: now(),
        },
    };
    let path = out.join(MANIFEST_FILE);
    let file = create_file(&path)?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, &manifest)?;
    writeln!(w).map_err(|e| output_error(&path, e))?;
    w.flush().map_err(|e| output_error(&path, e))?;
    Ok(ExperimentOutcome { points, manifest })
}

/// Writes the summary, histogram and sojourn CSVs of `points`.
pub fn write_point_csvs(out: &Path, points: &[PointOutcome]) -> Result<()> {
    let summaries: Vec<RunSummary> = points.iter().map(|p| p.summary.clone()).collect();
    let histograms: Vec<[LengthHistogram; 2]> = points.iter().map(|p| p.histograms.clone()).collect();
    let sojourns: Vec<SojournComparison> = points.iter().map(|p| p.sojourns.clone()).collect();
    metrics::write_summary_csv(create_file(&out.join(SUMMARY_FILE))?, &summaries)?;
    metrics::write_histogram_csv(create_file(&out.join(HISTOGRAM_FILE))?, &histograms)?;
    metrics::write_sojourn_csv(create_file(&out.join(SOJOURN_FILE))?, &sojourns)?;
    Ok(())
}

fn write_logs(plan: &ExperimentPlan, out: &Path, point: usize, rep: u32, result: &SimResult) -> Result<()> {
    if plan.trace {
        if let Some(trace) = &result.trace {
            let path = out.join(format!("events_p{point}_r{rep}.csv"));
            write_event_log(create_file(&path)?, trace)?;
        }
    }
    if plan.job_log {
        let path = out.join(format!("jobs_p{point}_r{rep}.csv"));
        write_job_log(create_file(&path)?, result)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct EventRow {
    event_time: f64,
    kind: &'static str,
    queue: &'static str,
    job_id: usize,
    q1_len: usize,
    q2_len: usize,
}

#[derive(Serialize)]
struct JobRow {
    job_id: usize,
    arrival: f64,
    completion: Option<f64>,
    jockey_count: u32,
    total_wait: Option<f64>,
}

pub fn write_event_log<W: Write>(out: W, trace: &[TraceRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(["event_time", "kind", "queue", "job_id", "q1_len", "q2_len"])?;
    for row in trace {
        w.serialize(EventRow {
            event_time: row.event_time,
            kind: row.kind.label(),
            queue: row.queue.label(),
            job_id: row.job_id,
            q1_len: row.q1_len,
            q2_len: row.q2_len,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_job_log<W: Write>(out: W, result: &SimResult) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(["job_id", "arrival", "completion", "jockey_count", "total_wait"])?;
    for job in &result.jobs {
        w.serialize(JobRow {
            job_id: job.id,
            arrival: job.arrival,
            completion: job.completion,
            jockey_count: job.jockey_count,
            total_wait: job.total_wait(),
        })?;
    }
    w.flush()?;
    Ok(())
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

fn output_error(path: &Path, source: std::io::Error) -> Error {
    Error::Output {
        path: path.to_path_buf(),
        source,
    }
}

pub(crate) fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| output_error(dir, e))
}

pub(crate) fn create_file(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| output_error(path, e))
}

/// Default output directory for a subcommand.
pub fn default_out(name: &str) -> PathBuf {
    PathBuf::from("out").join(name)
}
