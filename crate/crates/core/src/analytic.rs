//! Closed-form jockeying-frequency model.
//!
//! The number of jockeys `ξ` over `d` independent runs is binomial with success
//! probability `P(H < G)`, where `G ~ Exp(μ_i)` is the wait at the current
//! position and `H ~ Exp(μ_j)` the wait at the target position. Hence
//! `E[ξ] = d μ_j / (μ_i + μ_j)`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Above this size factorials are evaluated through `ln Γ`.
const DIRECT_LIMIT: u64 = 20;

/// Service rates as seen from a jockeying job: `mu_i` serves the queue it is
/// in, `mu_j` the queue it would move to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePair {
    pub mu_i: f64,
    pub mu_j: f64,
}

impl RatePair {
    pub fn new(mu_i: f64, mu_j: f64) -> Result<Self> {
        if !(mu_i > 0.0 && mu_i.is_finite() && mu_j > 0.0 && mu_j.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "rates must be positive and finite, got ({mu_i}, {mu_j})"
            )));
        }
        Ok(RatePair { mu_i, mu_j })
    }

    pub fn swapped(self) -> Self {
        RatePair {
            mu_i: self.mu_j,
            mu_j: self.mu_i,
        }
    }
}

/// `λ^β e^{−λ} / β!`
pub fn poisson_pmf(beta: u64, lambda: f64) -> f64 {
    assert!(lambda > 0.0, "lambda must be positive");
    if beta <= DIRECT_LIMIT && lambda < 700.0 {
        let mut p = (-lambda).exp();
        for k in 1..=beta {
            p *= lambda / k as f64;
        }
        p
    } else {
        (beta as f64 * lambda.ln() - lambda - ln_gamma(beta as f64 + 1.0)).exp()
    }
}

/// `μ e^{−μ t}` for `t ≥ 0`.
pub fn exponential_pdf(t: f64, mu: f64) -> Result<f64> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::InvalidArgument(format!("t must be >= 0, got {t}")));
    }
    if mu.is_nan() || mu <= 0.0 {
        return Err(Error::InvalidArgument(format!("mu must be > 0, got {mu}")));
    }
    Ok(mu * (-mu * t).exp())
}

/// Mean of `t (1 − e^{−μ t})` over the recorded times at a pose.
///
/// `None` means the pose has no records.
pub fn conditional_expected_wait(times_at_pose: &[f64], mu: f64) -> Option<f64> {
    if times_at_pose.is_empty() {
        return None;
    }
    assert!(mu > 0.0, "mu must be positive");
    let sum: f64 = times_at_pose.iter().map(|&t| t * -(-mu * t).exp_m1()).sum();
    Some(sum / times_at_pose.len() as f64)
}

/// `P(H < G) = μ_j / (μ_i + μ_j)`.
pub fn p_race(rates: RatePair) -> f64 {
    rates.mu_j / (rates.mu_i + rates.mu_j)
}

/// `C(d, ξ) p^ξ (1 − p)^{d − ξ}`.
pub fn binomial_pmf(xi: u64, d: u64, p: f64) -> Result<f64> {
    if xi > d {
        return Err(Error::InvalidArgument(format!("xi = {xi} exceeds d = {d}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("p must lie in [0, 1], got {p}")));
    }
    let fails = d - xi;
    if p == 0.0 {
        return Ok(if xi == 0 { 1.0 } else { 0.0 });
    }
    if p == 1.0 {
        return Ok(if fails == 0 { 1.0 } else { 0.0 });
    }
    if d <= DIRECT_LIMIT {
        Ok(binomial_coefficient(d, xi) * p.powi(xi as i32) * (1.0 - p).powi(fails as i32))
    } else {
        let ln_c = ln_gamma(d as f64 + 1.0) - ln_gamma(xi as f64 + 1.0) - ln_gamma(fails as f64 + 1.0);
        Ok((ln_c + xi as f64 * p.ln() + fails as f64 * (-p).ln_1p()).exp())
    }
}

fn binomial_coefficient(n: u64, k: u64) -> f64 {
    let k = k.min(n - k);
    (1..=k).fold(1.0, |acc, i| acc * (n - k + i) as f64 / i as f64)
}

/// `E[ξ] = d μ_j / (μ_i + μ_j)`.
pub fn expected_jockeys(d: u32, rates: RatePair) -> f64 {
    assert!(d >= 1, "d must be at least 1");
    d as f64 * p_race(rates)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poisson_values() {
        assert_eq!(poisson_pmf(0, 3.0), (-3.0f64).exp());
        let direct = 5f64.powi(5) * (-5f64).exp() / 120.0;
        let via_log = (5.0 * 5f64.ln() - 5.0 - ln_gamma(6.0)).exp();
        assert!((poisson_pmf(5, 5.0) - direct).abs() < 1e-15);
        assert!((direct - via_log).abs() < 1e-13);
        assert!((poisson_pmf(5, 5.0) - 0.175_467).abs() < 1e-6);
    }

    #[test]
    fn poisson_large_count_is_finite() {
        let p = poisson_pmf(1000, 1000.0);
        assert!(p > 0.0 && p < 0.02);
    }

    #[test]
    fn exponential_pdf_points() {
        assert_eq!(exponential_pdf(0.0, 2.5).unwrap(), 2.5);
        assert!((exponential_pdf(0.5, 2.0).unwrap() - 2.0 / std::f64::consts::E).abs() < 1e-15);
        assert!(exponential_pdf(-1.0, 1.0).is_err());
    }

    #[test]
    fn conditional_wait_values() {
        assert_eq!(conditional_expected_wait(&[], 1.0), None);
        let v = conditional_expected_wait(&[1.0], 1e6).unwrap();
        assert!((v - 1.0).abs() < 1e-6);
        let v = conditional_expected_wait(&[2.0, 4.0], 1.0).unwrap();
        let expected = (2.0 * (1.0 - (-2.0f64).exp()) + 4.0 * (1.0 - (-4.0f64).exp())) / 2.0;
        assert!((v - expected).abs() < 1e-14);
        assert!((v - 2.828_033_438_985_918_7).abs() < 1e-12);
    }

    #[test]
    fn race_values() {
        let r = RatePair::new(4.0, 3.0).unwrap();
        assert!((p_race(r) - 3.0 / 7.0).abs() < 1e-15);
        assert_eq!(p_race(RatePair::new(2.0, 2.0).unwrap()), 0.5);
        assert!(RatePair::new(0.0, 1.0).is_err());
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial_pmf(0, 5, 0.0).unwrap(), 1.0);
        assert_eq!(binomial_pmf(5, 5, 1.0).unwrap(), 1.0);
        let p = 3.0 / 7.0;
        let v = binomial_pmf(2, 5, p).unwrap();
        assert!((v - 5760.0 / 16807.0).abs() < 1e-15);
        assert!(binomial_pmf(6, 5, 0.5).is_err());
        assert!(binomial_pmf(1, 5, 1.5).is_err());
    }

    #[test]
    fn binomial_log_domain_agrees() {
        // Direct and log-domain evaluation meet at the switchover.
        for xi in 0..=20u64 {
            let direct = binomial_pmf(xi, 20, 0.3).unwrap();
            let ln_c = ln_gamma(21.0) - ln_gamma(xi as f64 + 1.0) - ln_gamma((20 - xi) as f64 + 1.0);
            let via_log = (ln_c + xi as f64 * 0.3f64.ln() + (20 - xi) as f64 * 0.7f64.ln()).exp();
            assert!((direct - via_log).abs() < 1e-13, "xi {xi}");
        }
        let total: f64 = (0..=500).map(|k| binomial_pmf(k, 500, 0.37).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn expected_jockeys_table_values() {
        let e = |a, b| expected_jockeys(5, RatePair::new(a, b).unwrap());
        assert!((e(4.0, 3.0) - 2.1428).abs() < 1e-4);
        assert!((e(10.0, 1.0) - 0.4545).abs() < 1e-4);
        assert!((e(7.0, 2.0) - 1.1111).abs() < 1e-4);
    }
}
