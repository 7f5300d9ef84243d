//! Per-job jockeying rationale.
//!
//! A waiting job at pose `k` compares its expected wait against the wait it
//! would face at the predicted landing pose `τ = L_target + round(β) + 1` of the
//! other queue, where `β = λ P` is the expected number of arrivals routed to
//! the target first and `P` comes from a Gaussian model of the queue lengths.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::config::SimConfig;
use crate::history::PositionHistory;
use crate::quadrature;
use crate::queue::{Job, QueueId, QueueState};

/// Below this the conditioning mass of the routing probability is treated as empty.
pub const DEGENERATE_DENOMINATOR: f64 = 1e-12;

/// Half-width, in standard deviations, of the window the routing integral is
/// restricted to. The excluded Gaussian mass is below 1e-23.
const WINDOW_SIGMAS: f64 = 10.0;

/// Gaussian fits to the two queue-length distributions, `X` for queue i and
/// `Y` for queue j, sharing one standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueLengthModel {
    pub mean_i: f64,
    pub mean_j: f64,
    pub sigma: f64,
}

impl QueueLengthModel {
    pub fn new(mean_i: f64, mean_j: f64, sigma: f64) -> Self {
        assert!(sigma > 0.0, "sigma must be positive, got {sigma}");
        assert!(mean_i >= 0.0 && mean_j >= 0.0, "mean lengths are nonnegative");
        QueueLengthModel { mean_i, mean_j, sigma }
    }

    /// The same fit oriented so that `X` describes `target`.
    pub fn toward(&self, target: QueueId) -> QueueLengthModel {
        match target {
            QueueId::I => *self,
            QueueId::J => QueueLengthModel {
                mean_i: self.mean_j,
                mean_j: self.mean_i,
                sigma: self.sigma,
            },
        }
    }
}

/// Which conditioning applies to the waiting-time comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DecisionCase {
    /// At least one arrival is expected to join the target first.
    Routed,
    /// No joiners expected, but the evaluation was triggered by a departure.
    DepartureOnly,
    /// No joiners and no departure.
    Unconditioned,
}

impl DecisionCase {
    pub fn classify(joiners: u64, departures: u32) -> Self {
        match (joiners, departures) {
            (0, 0) => DecisionCase::Unconditioned,
            (0, _) => DecisionCase::DepartureOnly,
            _ => DecisionCase::Routed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JockeyDecision {
    pub migrate: bool,
    pub current_pose: usize,
    pub predicted_pose: usize,
    pub t_w_current: f64,
    pub t_w_target: f64,
    pub beta: f64,
    pub routing_probability: f64,
    pub case: DecisionCase,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoutingProbability {
    pub value: f64,
    /// The conditioning window `[1, τ]` carried less than
    /// [`DEGENERATE_DENOMINATOR`] of the `Y` mass; `value` is then the
    /// `τ → ∞` limit.
    pub degenerate: bool,
}

/// `P(Z < z)` for a standard normal `Z`.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// `P(a < Z < b)` for a standard normal `Z`, evaluated on the tail that keeps
/// precision.
pub fn std_normal_mass(a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    if a > 0.0 {
        // Both in the upper half: difference of upper tails.
        std_normal_cdf(-a) - std_normal_cdf(-b)
    } else {
        std_normal_cdf(b) - std_normal_cdf(a)
    }
}

fn normal_pdf(x: f64, mean: f64, sigma: f64) -> f64 {
    let z = (x - mean) / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

/// `P(X < Y | 1 ≤ Y ≤ τ_i)` restricted to `X ≥ 0`:
///
/// `∫_1^τ ∫_0^y f_X(x) f_Y(y) dx dy / ∫_1^τ f_Y(y) dy`
///
/// with `X ~ N(mean_i, σ)` and `Y ~ N(mean_j, σ)` independent. The inner
/// integral is a normal mass; the outer one is computed by adaptive
/// Gauss–Kronrod quadrature to `tolerance` relative to the denominator.
pub fn routing_probability(tau_i: f64, model: &QueueLengthModel, tolerance: f64) -> RoutingProbability {
    let QueueLengthModel {
        mean_i: x_mean,
        mean_j: y_mean,
        sigma,
    } = *model;
    let z = |v: f64, mean: f64| (v - mean) / sigma;
    let denominator = std_normal_mass(z(1.0, y_mean), z(tau_i, y_mean));
    if denominator >= DEGENERATE_DENOMINATOR {
        let value = conditional_ratio(x_mean, y_mean, sigma, 1.0, tau_i, denominator, tolerance);
        return RoutingProbability {
            value: value.clamp(0.0, 1.0),
            degenerate: false,
        };
    }
    let unconditional = std_normal_mass(z(1.0, y_mean), f64::INFINITY);
    let value = if unconditional > 0.0 {
        let upper = 1.0f64.max(y_mean) + WINDOW_SIGMAS * sigma;
        conditional_ratio(x_mean, y_mean, sigma, 1.0, upper, unconditional, tolerance)
    } else {
        // No mass above 1 at all: fall back to the unrestricted P(X < Y).
        std_normal_cdf((y_mean - x_mean) / (sigma * std::f64::consts::SQRT_2))
    };
    RoutingProbability {
        value: value.clamp(0.0, 1.0),
        degenerate: true,
    }
}

fn conditional_ratio(
    x_mean: f64,
    y_mean: f64,
    sigma: f64,
    low: f64,
    high: f64,
    denominator: f64,
    tolerance: f64,
) -> f64 {
    let lo = low.max(y_mean - WINDOW_SIGMAS * sigma);
    let hi = high.min(y_mean + WINDOW_SIGMAS * sigma);
    if hi <= lo {
        return 0.0;
    }
    let x_floor = -x_mean / sigma;
    let integrand = |y: f64| normal_pdf(y, y_mean, sigma) * std_normal_mass(x_floor, (y - x_mean) / sigma);
    // Pieces no wider than two sigmas so the first pass resolves the peak.
    let pieces = (((hi - lo) / (2.0 * sigma)).ceil() as usize).clamp(1, 64);
    let mut breaks: Vec<f64> = (0..=pieces)
        .map(|k| lo + (hi - lo) * k as f64 / pieces as f64)
        .collect();
    breaks[pieces] = hi;
    let numerator = quadrature::integrate_with_breaks(integrand, &breaks, tolerance * denominator);
    numerator.value / denominator
}

/// `β = λ P`.
pub fn expected_joiners(lambda: f64, p: f64) -> f64 {
    assert!((0.0..=1.0).contains(&p), "probability out of range: {p}");
    lambda * p
}

/// Expected wait at `pose` of `queue`: the mean recorded time-to-completion
/// when the pose is known, otherwise Little's-law `L_Q / λ`.
pub fn expected_wait(
    queue: &QueueState,
    pose: usize,
    history: &PositionHistory,
    lambda: f64,
    min_history: usize,
) -> f64 {
    expected_wait_for_len(queue.len(), pose, history, lambda, min_history)
}

pub(crate) fn expected_wait_for_len(
    queue_len: usize,
    pose: usize,
    history: &PositionHistory,
    lambda: f64,
    min_history: usize,
) -> f64 {
    history.mean(pose, min_history).unwrap_or(queue_len as f64 / lambda)
}

/// Whether a job at `pose` may consider moving to a queue of `target_len`
/// jobs: it must be waiting and stand behind the whole target queue.
pub fn is_candidate(pose: usize, target_len: usize) -> bool {
    pose >= 1 && pose > target_len
}

/// Inputs for one waiting-time comparison once the routing probability is known.
#[derive(Debug, Clone, Copy)]
pub struct Comparison<'a> {
    pub current_pose: usize,
    pub current_len: usize,
    pub current_history: &'a PositionHistory,
    pub target_len: usize,
    pub target_history: &'a PositionHistory,
    pub routing_probability: f64,
    pub lambda: f64,
    pub min_history: usize,
    pub departures: u32,
}

impl Comparison<'_> {
    pub fn decide(&self) -> JockeyDecision {
        let beta = expected_joiners(self.lambda, self.routing_probability);
        let joiners = beta.round() as u64;
        let predicted_pose = self.target_len + joiners as usize + 1;
        let t_w_current = expected_wait_for_len(
            self.current_len,
            self.current_pose,
            self.current_history,
            self.lambda,
            self.min_history,
        );
        let t_w_target = expected_wait_for_len(
            self.target_len,
            predicted_pose,
            self.target_history,
            self.lambda,
            self.min_history,
        );
        JockeyDecision {
            migrate: t_w_target < t_w_current,
            current_pose: self.current_pose,
            predicted_pose,
            t_w_current,
            t_w_target,
            beta,
            routing_probability: self.routing_probability,
            case: DecisionCase::classify(joiners, self.departures),
        }
    }
}

/// Decides whether `job`, waiting in its current queue, should move to the
/// other one. `departures` is the number of service completions that
/// triggered this evaluation.
///
/// The routing probability is conditioned on the target's landing pose
/// before any joiners, `τ_i = L_target + 1`.
pub fn should_jockey(
    job: &Job,
    queues: &[QueueState; 2],
    histories: &[PositionHistory; 2],
    model: &QueueLengthModel,
    config: &SimConfig,
    departures: u32,
) -> JockeyDecision {
    debug_assert!(job.position >= 1, "only waiting jobs are jockey candidates");
    let current = job.current_queue;
    let target = current.other();
    let target_len = queues[target.index()].len();
    let p = routing_probability(
        (target_len + 1) as f64,
        &model.toward(target),
        config.quadrature_tolerance,
    );
    Comparison {
        current_pose: job.position,
        current_len: queues[current.index()].len(),
        current_history: &histories[current.index()],
        target_len,
        target_history: &histories[target.index()],
        routing_probability: p.value,
        lambda: config.lambda,
        min_history: config.min_history_for_eq2,
        departures,
    }
    .decide()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wait_from_history_mean() {
        let h = PositionHistory::from_durations([(3, 2.0), (3, 4.0)]);
        let q = QueueState::new(QueueId::I, 1.0);
        assert_eq!(expected_wait(&q, 3, &h, 7.0, 1), 3.0);
    }

    #[test]
    fn wait_falls_back_to_littles_law() {
        let h = PositionHistory::new();
        let mut q = QueueState::new(QueueId::I, 1.0);
        q.buffer.extend(0..14);
        assert_eq!(expected_wait(&q, 3, &h, 7.0, 1), 2.0);
    }

    #[test]
    fn joiners() {
        assert!((expected_joiners(5.0, 0.49996) - 2.4998).abs() < 1e-12);
        assert_eq!(expected_joiners(5.0, 1.0), 5.0);
        assert_eq!(expected_joiners(5.0, 0.0), 0.0);
    }

    #[test]
    fn symmetric_limit_is_half() {
        let m = QueueLengthModel::new(20.0, 20.0, 1.5);
        let p = routing_probability(1e6, &m, 1e-10);
        assert!((p.value - 0.5).abs() < 1e-8, "{}", p.value);
        assert!(!p.degenerate);
    }

    #[test]
    fn degenerate_window_flags() {
        let m = QueueLengthModel::new(5.0, 40.0, 1.0);
        let p = routing_probability(2.0, &m, 1e-8);
        assert!(p.degenerate);
        let limit = routing_probability(1e6, &m, 1e-8);
        assert!((p.value - limit.value).abs() < 1e-8);
    }

    #[test]
    fn case_classification() {
        assert_eq!(DecisionCase::classify(2, 1), DecisionCase::Routed);
        assert_eq!(DecisionCase::classify(2, 0), DecisionCase::Routed);
        assert_eq!(DecisionCase::classify(0, 1), DecisionCase::DepartureOnly);
        assert_eq!(DecisionCase::classify(0, 0), DecisionCase::Unconditioned);
    }

    #[test]
    fn strict_improvement_required() {
        let empty = PositionHistory::new();
        let base = Comparison {
            current_pose: 3,
            current_len: 10,
            current_history: &empty,
            target_len: 9,
            target_history: &empty,
            routing_probability: 0.0,
            lambda: 5.0,
            min_history: 1,
            departures: 1,
        };
        // Little's law on both sides: 10/5 vs 9/5.
        assert!(base.decide().migrate);
        let tie = Comparison { target_len: 10, ..base };
        let d = tie.decide();
        assert_eq!(d.t_w_current, d.t_w_target);
        assert!(!d.migrate);
    }

    #[test]
    fn table_wait_columns_trigger_migration() {
        let current = PositionHistory::from_durations([(7, 19.098)]);
        let target = PositionHistory::from_durations([(6, 17.487)]);
        let d = Comparison {
            current_pose: 7,
            current_len: 8,
            current_history: &current,
            target_len: 5,
            target_history: &target,
            routing_probability: 0.0,
            lambda: 7.0,
            min_history: 1,
            departures: 1,
        }
        .decide();
        assert_eq!(d.predicted_pose, 6);
        assert!(d.migrate);
    }
}
