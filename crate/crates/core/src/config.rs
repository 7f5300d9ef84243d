//! Experiment parameterization and the service-rate split.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the rate-asymmetry parameter is chosen for a replication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DeltaLambdaPolicy {
    Fixed {
        value: f64,
    },
    /// Uniform over `[low, high)`, drawn once per replication.
    Sampled {
        low: f64,
        high: f64,
    },
}

impl DeltaLambdaPolicy {
    /// Default sampling window `(0.1 λ, 0.9 λ)`.
    pub fn default_sampled(lambda: f64) -> Self {
        DeltaLambdaPolicy::Sampled {
            low: 0.1 * lambda,
            high: 0.9 * lambda,
        }
    }
}

impl fmt::Display for DeltaLambdaPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeltaLambdaPolicy::Fixed { value } => write!(f, "fixed:{value}"),
            DeltaLambdaPolicy::Sampled { low, high } => write!(f, "sampled:{low}:{high}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Horizon {
    /// Stop once this many jobs have completed service.
    Departures { count: u64 },
    /// Stop before processing the first event later than this time.
    Time { until: f64 },
}

impl Horizon {
    pub fn is_empty(&self) -> bool {
        match *self {
            Horizon::Departures { count } => count == 0,
            Horizon::Time { until } => until <= 0.0,
        }
    }
}

impl fmt::Display for Horizon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Horizon::Departures { count } => write!(f, "departures:{count}"),
            Horizon::Time { until } => write!(f, "time:{until}"),
        }
    }
}

/// Standard deviation used by the Gaussian queue-length model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SigmaPolicy {
    Fixed {
        value: f64,
    },
    /// Pooled sample standard deviation of the length samples seen so far,
    /// floored at [`SIGMA_FLOOR`].
    Estimated,
}

/// Lower bound applied to an estimated sigma.
pub const SIGMA_FLOOR: f64 = 0.5;

impl fmt::Display for SigmaPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SigmaPolicy::Fixed { value } => write!(f, "fixed:{value}"),
            SigmaPolicy::Estimated => f.write_str("estimated"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub lambda: f64,
    pub delta_lambda: DeltaLambdaPolicy,
    pub horizon: Horizon,
    pub seed: u64,
    /// Trial count of the binomial jockeying-frequency model.
    pub d: u32,
    pub sigma_policy: SigmaPolicy,
    pub quadrature_tolerance: f64,
    /// Records needed at a pose before the empirical waiting-time branch is used.
    pub min_history_for_eq2: usize,
}

pub const DEFAULT_HORIZON_DEPARTURES: u64 = 100_000;

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            lambda: 7.0,
            delta_lambda: DeltaLambdaPolicy::default_sampled(7.0),
            horizon: Horizon::Departures {
                count: DEFAULT_HORIZON_DEPARTURES,
            },
            seed: 0,
            d: 5,
            sigma_policy: SigmaPolicy::Estimated,
            quadrature_tolerance: 1e-8,
            min_history_for_eq2: 1,
        }
    }
}

impl SimConfig {
    /// Fixed-asymmetry configuration whose rates come out as `(mu_i, mu_j)`.
    pub fn with_rates(mu_i: f64, mu_j: f64) -> Self {
        SimConfig {
            lambda: mu_i + mu_j,
            delta_lambda: DeltaLambdaPolicy::Fixed { value: mu_i - mu_j },
            ..SimConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::config("lambda", format!("must be > 0, got {}", self.lambda)));
        }
        match self.delta_lambda {
            DeltaLambdaPolicy::Fixed { value } => {
                if !(value > 0.0 && value < self.lambda) {
                    return Err(Error::config(
                        "delta_lambda",
                        format!("must lie in (0, lambda = {}), got {value}", self.lambda),
                    ));
                }
            }
            DeltaLambdaPolicy::Sampled { low, high } => {
                if !(low > 0.0 && high <= self.lambda && low < high) {
                    return Err(Error::config(
                        "delta_lambda",
                        format!(
                            "sampling range [{low}, {high}) must be a nonempty subrange of (0, lambda = {})",
                            self.lambda
                        ),
                    ));
                }
            }
        }
        match self.horizon {
            Horizon::Departures { .. } => {}
            Horizon::Time { until } => {
                if !(until >= 0.0 && until.is_finite()) {
                    return Err(Error::config(
                        "horizon",
                        format!("time must be finite and >= 0, got {until}"),
                    ));
                }
            }
        }
        if self.d < 1 {
            return Err(Error::config("d", "must be >= 1"));
        }
        if let SigmaPolicy::Fixed { value } = self.sigma_policy {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::config("sigma_policy", format!("sigma must be > 0, got {value}")));
            }
        }
        if self.quadrature_tolerance.is_nan() || self.quadrature_tolerance <= 0.0 {
            return Err(Error::config("quadrature_tolerance", "must be > 0"));
        }
        if self.min_history_for_eq2 < 1 {
            return Err(Error::config("min_history_for_eq2", "must be >= 1"));
        }
        Ok(())
    }

    /// Sets one field from its textual `key = value` form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "lambda" => self.lambda = parse_f64(key, value)?,
            "delta_lambda" => self.delta_lambda = parse_delta_lambda(value)?,
            "horizon" => self.horizon = parse_horizon(value)?,
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| Error::config(key, format!("expected an unsigned integer, got `{value}`")))?
            }
            "d" => {
                self.d = value
                    .parse()
                    .map_err(|_| Error::config(key, format!("expected an unsigned integer, got `{value}`")))?
            }
            "sigma_policy" => self.sigma_policy = parse_sigma_policy(value)?,
            "quadrature_tolerance" => self.quadrature_tolerance = parse_f64(key, value)?,
            "min_history_for_eq2" => {
                self.min_history_for_eq2 = value
                    .parse()
                    .map_err(|_| Error::config(key, format!("expected an unsigned integer, got `{value}`")))?
            }
            _ => return Err(Error::config(key, "unknown field")),
        }
        Ok(())
    }

    pub const FIELDS: &'static [&'static str] = &[
        "lambda",
        "delta_lambda",
        "horizon",
        "seed",
        "d",
        "sigma_policy",
        "quadrature_tolerance",
        "min_history_for_eq2",
    ];
}

fn parse_f64(field: &str, value: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .map_err(|_| Error::config(field, format!("expected a number, got `{value}`")))
}

/// `fixed:<v>`, `sampled:<low>:<high>` or a bare number.
pub fn parse_delta_lambda(value: &str) -> Result<DeltaLambdaPolicy> {
    let parts: Vec<&str> = value.split(':').map(str::trim).collect();
    match parts.as_slice() {
        [v] => Ok(DeltaLambdaPolicy::Fixed {
            value: parse_f64("delta_lambda", v)?,
        }),
        ["fixed", v] => Ok(DeltaLambdaPolicy::Fixed {
            value: parse_f64("delta_lambda", v)?,
        }),
        ["sampled", lo, hi] => Ok(DeltaLambdaPolicy::Sampled {
            low: parse_f64("delta_lambda", lo)?,
            high: parse_f64("delta_lambda", hi)?,
        }),
        _ => Err(Error::config(
            "delta_lambda",
            format!("expected `fixed:<v>` or `sampled:<low>:<high>`, got `{value}`"),
        )),
    }
}

/// `departures:<n>`, `time:<t>` or a bare integer (departures).
pub fn parse_horizon(value: &str) -> Result<Horizon> {
    let parts: Vec<&str> = value.split(':').map(str::trim).collect();
    let count = |v: &str| {
        v.parse::<u64>()
            .map_err(|_| Error::config("horizon", format!("expected a departure count, got `{v}`")))
    };
    match parts.as_slice() {
        [v] => Ok(Horizon::Departures { count: count(v)? }),
        ["departures", v] => Ok(Horizon::Departures { count: count(v)? }),
        ["time", v] => Ok(Horizon::Time {
            until: parse_f64("horizon", v)?,
        }),
        _ => Err(Error::config(
            "horizon",
            format!("expected `departures:<n>` or `time:<t>`, got `{value}`"),
        )),
    }
}

/// `estimated`, `fixed:<v>` or a bare number.
pub fn parse_sigma_policy(value: &str) -> Result<SigmaPolicy> {
    let parts: Vec<&str> = value.split(':').map(str::trim).collect();
    match parts.as_slice() {
        ["estimated"] => Ok(SigmaPolicy::Estimated),
        ["fixed", v] | [v] => Ok(SigmaPolicy::Fixed {
            value: parse_f64("sigma_policy", v)?,
        }),
        _ => Err(Error::config(
            "sigma_policy",
            format!("expected `estimated` or `fixed:<v>`, got `{value}`"),
        )),
    }
}

/// Splits the arrival rate into the two service rates
/// `((λ + δλ)/2, (λ − δλ)/2)`, so that `mu_i + mu_j = λ`.
pub fn service_rates(lambda: f64, delta_lambda: f64) -> Result<(f64, f64)> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::config("lambda", format!("must be > 0, got {lambda}")));
    }
    if !(delta_lambda > 0.0 && delta_lambda < lambda) {
        return Err(Error::config(
            "delta_lambda",
            format!("must lie in (0, {lambda}), got {delta_lambda}"),
        ));
    }
    let mu_i = (lambda + delta_lambda) / 2.0;
    // Derived by subtraction so the pair sums back to lambda.
    let mu_j = lambda - mu_i;
    Ok((mu_i, mu_j))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rates_for_table_rows() {
        assert_eq!(service_rates(7.0, 1.0).unwrap(), (4.0, 3.0));
        assert_eq!(service_rates(11.0, 9.0).unwrap(), (10.0, 1.0));
    }

    #[test]
    fn near_symmetric_split() {
        let (a, b) = service_rates(2.0, 1e-9).unwrap();
        assert!((a - 1.0).abs() <= 1e-9);
        assert!((b - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn rejects_degenerate_asymmetry() {
        for d in [0.0, -1.0, 7.0, 8.0, f64::NAN] {
            assert!(service_rates(7.0, d).is_err(), "delta {d}");
        }
        assert!(service_rates(0.0, 0.0).is_err());
    }

    #[test]
    fn parse_forms() {
        assert_eq!(parse_horizon("250").unwrap(), Horizon::Departures { count: 250 });
        assert_eq!(parse_horizon("time:12.5").unwrap(), Horizon::Time { until: 12.5 });
        assert_eq!(
            parse_delta_lambda("sampled:1:2").unwrap(),
            DeltaLambdaPolicy::Sampled { low: 1.0, high: 2.0 }
        );
        assert_eq!(
            parse_delta_lambda("fixed:2").unwrap(),
            DeltaLambdaPolicy::Fixed { value: 2.0 }
        );
        assert_eq!(parse_sigma_policy("estimated").unwrap(), SigmaPolicy::Estimated);
        assert_eq!(
            parse_sigma_policy("fixed:1").unwrap(),
            SigmaPolicy::Fixed { value: 1.0 }
        );
        assert!(parse_horizon("weeks:3").is_err());
    }

    #[test]
    fn validation_names_the_field() {
        let mut c = SimConfig::with_rates(4.0, 3.0);
        c.d = 0;
        match c.validate() {
            Err(Error::InvalidConfig { field, .. }) => assert_eq!(field, "d"),
            other => panic!("unexpected {other:?}"),
        }
        let mut c = SimConfig::with_rates(4.0, 3.0);
        c.delta_lambda = DeltaLambdaPolicy::Sampled { low: 0.0, high: 3.0 };
        assert!(c.validate().is_err());
    }
}
