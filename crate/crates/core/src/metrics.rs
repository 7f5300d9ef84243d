//! Reductions of simulation results into the reported measures: Table-style
//! summary rows, queue-length histograms with Gaussian fits, and sojourn
//! comparisons of jockeyed against never-jockeyed jobs.
//!
//! Each replication is first reduced to a compact [`Aggregate`]; aggregates
//! merge associatively, so batches never need to hold every job record.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::analytic::{expected_jockeys, RatePair};
use crate::config::SimConfig;
use crate::engine::{DecisionTotals, SimResult};
use crate::error::{Error, Result};
use crate::queue::QueueId;
use crate::stats::{histogram_moments, Welford};

/// Everything the reports need from one or more replications.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub replications: u64,
    pub lambda: f64,
    pub d: u32,
    /// Sums of the per-replication service rates.
    pub sum_mu_i: f64,
    pub sum_mu_j: f64,
    pub completions: u64,
    pub jockey_events: u64,
    pub migrations_from: [u64; 2],
    pub decisions: DecisionTotals,
    pub length_counts: [Vec<u64>; 2],
    pub sojourn_jockeyed: Welford,
    pub sojourn_non_jockeyed: Welford,
    pub sojourn_by_count: BTreeMap<u32, Welford>,
}

impl Aggregate {
    pub fn from_result(r: &SimResult) -> Self {
        let mut agg = Aggregate {
            replications: 1,
            lambda: r.lambda,
            d: r.d,
            sum_mu_i: r.mu_i,
            sum_mu_j: r.mu_j,
            completions: r.completions,
            jockey_events: r.jockey_events,
            migrations_from: r.migrations_from,
            decisions: r.decisions,
            length_counts: r.length_counts.clone(),
            ..Aggregate::default()
        };
        for job in &r.jobs {
            let Some(sojourn) = job.sojourn() else { continue };
            if job.jockey_count == 0 {
                agg.sojourn_non_jockeyed.push(sojourn);
            } else {
                agg.sojourn_jockeyed.push(sojourn);
            }
            agg.sojourn_by_count.entry(job.jockey_count).or_default().push(sojourn);
        }
        agg
    }

    /// Folds `other` in. Both must come from the same arrival rate and `d`.
    pub fn merge(&mut self, other: &Aggregate) -> Result<()> {
        if other.replications == 0 {
            return Ok(());
        }
        if self.replications == 0 {
            *self = other.clone();
            return Ok(());
        }
        if self.lambda != other.lambda || self.d != other.d {
            return Err(Error::InvalidArgument(format!(
                "cannot pool results of different configurations (lambda {} vs {}, d {} vs {})",
                self.lambda, other.lambda, self.d, other.d
            )));
        }
        self.replications += other.replications;
        self.sum_mu_i += other.sum_mu_i;
        self.sum_mu_j += other.sum_mu_j;
        self.completions += other.completions;
        self.jockey_events += other.jockey_events;
        for q in 0..2 {
            self.migrations_from[q] += other.migrations_from[q];
            let counts = &mut self.length_counts[q];
            let theirs = &other.length_counts[q];
            if counts.len() < theirs.len() {
                counts.resize(theirs.len(), 0);
            }
            for (a, b) in counts.iter_mut().zip(theirs) {
                *a += b;
            }
        }
        self.decisions.merge(&other.decisions);
        self.sojourn_jockeyed.merge(&other.sojourn_jockeyed);
        self.sojourn_non_jockeyed.merge(&other.sojourn_non_jockeyed);
        for (k, w) in &other.sojourn_by_count {
            self.sojourn_by_count.entry(*k).or_default().merge(w);
        }
        Ok(())
    }

    /// Service rates averaged over replications (they differ when the
    /// asymmetry is sampled).
    pub fn rates(&self) -> (f64, f64) {
        let n = self.replications.max(1) as f64;
        (self.sum_mu_i / n, self.sum_mu_j / n)
    }

    pub fn summary(&self) -> RunSummary {
        let (mu_i, mu_j) = self.rates();
        let per_job = |count: u64| {
            if self.completions == 0 {
                0.0
            } else {
                count as f64 / self.completions as f64
            }
        };
        let per_decision = |sum: f64| {
            if self.decisions.count == 0 {
                0.0
            } else {
                sum / self.decisions.count as f64
            }
        };
        let xi_model = match RatePair::new(mu_i, mu_j) {
            Ok(rates) if self.d >= 1 => expected_jockeys(self.d, rates),
            _ => 0.0,
        };
        RunSummary {
            lambda: self.lambda,
            mu_i,
            mu_j,
            mean_t_w_k: per_decision(self.decisions.sum_t_w_current),
            mean_t_w_tau: per_decision(self.decisions.sum_t_w_target),
            mean_xi_simulated: per_job(self.migrations_from[QueueId::I.index()]),
            xi_model,
            n_jobs: self.completions,
            n_jockey_events: self.jockey_events,
            mean_xi_total: per_job(self.jockey_events),
            n_decisions: self.decisions.count,
            mean_sojourn_jockeyed: group_mean(&self.sojourn_jockeyed),
            mean_sojourn_non_jockeyed: group_mean(&self.sojourn_non_jockeyed),
        }
    }

    pub fn histograms(&self) -> [LengthHistogram; 2] {
        QueueId::BOTH.map(|q| LengthHistogram::from_counts(q, self.length_counts[q.index()].clone()))
    }

    pub fn sojourns(&self) -> SojournComparison {
        SojournComparison {
            jockeyed: (self.sojourn_jockeyed.n > 0).then_some(self.sojourn_jockeyed),
            non_jockeyed: (self.sojourn_non_jockeyed.n > 0).then_some(self.sojourn_non_jockeyed),
            by_count: self.sojourn_by_count.clone(),
        }
    }
}

fn group_mean(w: &Welford) -> Option<f64> {
    (w.n > 0).then_some(w.mean)
}

/// One row of the summary table.
///
/// `mean_xi_simulated` counts jockeys out of queue i per completed job, the
/// direction the analytic `xi_model` describes; `mean_xi_total` counts
/// jockeys in both directions. The waiting-time means are taken over every
/// jockey comparison made.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub lambda: f64,
    pub mu_i: f64,
    pub mu_j: f64,
    pub mean_t_w_k: f64,
    pub mean_t_w_tau: f64,
    pub mean_xi_simulated: f64,
    pub xi_model: f64,
    pub n_jobs: u64,
    pub n_jockey_events: u64,
    pub mean_xi_total: f64,
    pub n_decisions: u64,
    pub mean_sojourn_jockeyed: Option<f64>,
    pub mean_sojourn_non_jockeyed: Option<f64>,
}

/// Pools `results` (replications of one configuration) into a summary row.
///
/// The result does not depend on the order of `results`.
pub fn summarize(results: &[SimResult], config: &SimConfig) -> Result<RunSummary> {
    let agg = pool(results)?;
    if agg.lambda != config.lambda || agg.d != config.d {
        return Err(Error::InvalidArgument(
            "results were produced by a different configuration".into(),
        ));
    }
    Ok(agg.summary())
}

/// Reduces replications to one aggregate, in seed order so the floating-point
/// sums do not depend on the input order.
pub fn pool(results: &[SimResult]) -> Result<Aggregate> {
    if results.is_empty() {
        return Err(Error::InvalidArgument("no results to summarize".into()));
    }
    let mut order: Vec<&SimResult> = results.iter().collect();
    order.sort_by(|a, b| {
        a.seed
            .cmp(&b.seed)
            .then(a.delta_lambda.total_cmp(&b.delta_lambda))
            .then(a.trace_hash.cmp(&b.trace_hash))
    });
    let mut agg = Aggregate::default();
    for r in order {
        agg.merge(&Aggregate::from_result(r))?;
    }
    Ok(agg)
}

/// Length frequencies of one queue with the moments of a Gaussian fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthHistogram {
    pub queue: QueueId,
    /// `frequencies[L]` = number of samples with length `L`.
    pub frequencies: Vec<u64>,
    pub mean: f64,
    /// Population standard deviation of the samples.
    pub std_dev: f64,
    pub skewness: f64,
}

impl LengthHistogram {
    pub fn from_counts(queue: QueueId, frequencies: Vec<u64>) -> Self {
        let m = histogram_moments(&frequencies);
        LengthHistogram {
            queue,
            frequencies,
            mean: m.mean,
            std_dev: m.std_dev,
            skewness: m.skewness,
        }
    }

    pub fn samples(&self) -> u64 {
        self.frequencies.iter().sum()
    }

    /// Number of strict local maxima after smoothing with a centred moving
    /// average of `window` bins; plateaus count once.
    pub fn modes(&self, window: usize) -> usize {
        let smooth = moving_average(&self.frequencies, window.max(1));
        let mut modes = 0;
        let mut rising = true;
        for w in smooth.windows(2) {
            if w[1] > w[0] {
                rising = true;
            } else if w[1] < w[0] {
                if rising {
                    modes += 1;
                }
                rising = false;
            }
        }
        if rising && smooth.iter().any(|&v| v > 0.0) {
            modes += 1;
        }
        modes
    }
}

fn moving_average(xs: &[u64], window: usize) -> Vec<f64> {
    let half = window / 2;
    (0..xs.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(xs.len());
            xs[lo..hi].iter().sum::<u64>() as f64 / (hi - lo) as f64
        })
        .collect()
}

/// Per-queue length histograms pooled over `results`.
pub fn fit_lengths(results: &[SimResult]) -> Result<[LengthHistogram; 2]> {
    Ok(pool(results)?.histograms())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SojournComparison {
    /// Absent when no completed job ever jockeyed.
    pub jockeyed: Option<Welford>,
    /// Absent when every completed job jockeyed.
    pub non_jockeyed: Option<Welford>,
    pub by_count: BTreeMap<u32, Welford>,
}

pub fn sojourn_comparison(results: &[SimResult]) -> Result<SojournComparison> {
    Ok(pool(results)?.sojourns())
}

const SUMMARY_HEADER: [&str; 14] = [
    "lambda",
    "mu_i",
    "mu_j",
    "mean_t_w_k",
    "mean_t_w_tau",
    "mean_xi_simulated",
    "xi_model",
    "n_jobs",
    "n_jockey_events",
    "mean_xi_total",
    "n_decisions",
    "mean_sojourn_jockeyed",
    "mean_sojourn_non_jockeyed",
    "point",
];
const HISTOGRAM_HEADER: [&str; 6] = ["queue", "length", "frequency", "point", "fit_mean", "fit_std"];
const SOJOURN_HEADER: [&str; 4] = ["jockey_count", "mean_sojourn", "n", "point"];

#[derive(Serialize)]
struct SummaryRow {
    lambda: f64,
    mu_i: f64,
    mu_j: f64,
    mean_t_w_k: f64,
    mean_t_w_tau: f64,
    mean_xi_simulated: f64,
    xi_model: f64,
    n_jobs: u64,
    n_jockey_events: u64,
    mean_xi_total: f64,
    n_decisions: u64,
    mean_sojourn_jockeyed: Option<f64>,
    mean_sojourn_non_jockeyed: Option<f64>,
    point: usize,
}

#[derive(Serialize)]
struct HistogramRow {
    queue: &'static str,
    length: usize,
    frequency: u64,
    point: usize,
    fit_mean: f64,
    fit_std: f64,
}

#[derive(Serialize)]
struct SojournRow {
    jockey_count: u32,
    mean_sojourn: f64,
    n: u64,
    point: usize,
}

/// A CSV writer that always emits `header`, even with no rows.
fn csv_writer<W: Write>(out: W, header: &[&str]) -> Result<csv::Writer<W>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(header)?;
    Ok(w)
}

/// Writes summary rows, one per grid point, in the given order.
pub fn write_summary_csv<W: Write>(out: W, rows: &[RunSummary]) -> Result<()> {
    let mut w = csv_writer(out, &SUMMARY_HEADER)?;
    for (point, s) in rows.iter().enumerate() {
        w.serialize(SummaryRow {
            lambda: s.lambda,
            mu_i: s.mu_i,
            mu_j: s.mu_j,
            mean_t_w_k: s.mean_t_w_k,
            mean_t_w_tau: s.mean_t_w_tau,
            mean_xi_simulated: s.mean_xi_simulated,
            xi_model: s.xi_model,
            n_jobs: s.n_jobs,
            n_jockey_events: s.n_jockey_events,
            mean_xi_total: s.mean_xi_total,
            n_decisions: s.n_decisions,
            mean_sojourn_jockeyed: s.mean_sojourn_jockeyed,
            mean_sojourn_non_jockeyed: s.mean_sojourn_non_jockeyed,
            point,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the nonzero histogram bins of every grid point.
pub fn write_histogram_csv<W: Write>(out: W, points: &[[LengthHistogram; 2]]) -> Result<()> {
    let mut w = csv_writer(out, &HISTOGRAM_HEADER)?;
    for (point, hists) in points.iter().enumerate() {
        for h in hists {
            for (length, &frequency) in h.frequencies.iter().enumerate() {
                if frequency == 0 {
                    continue;
                }
                w.serialize(HistogramRow {
                    queue: h.queue.label(),
                    length,
                    frequency,
                    point,
                    fit_mean: h.mean,
                    fit_std: h.std_dev,
                })?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes mean sojourn per jockey count for every grid point.
pub fn write_sojourn_csv<W: Write>(out: W, points: &[SojournComparison]) -> Result<()> {
    let mut w = csv_writer(out, &SOJOURN_HEADER)?;
    for (point, s) in points.iter().enumerate() {
        for (&jockey_count, stats) in &s.by_count {
            w.serialize(SojournRow {
                jockey_count,
                mean_sojourn: stats.mean,
                n: stats.n,
                point,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}
