//! Simulation and analytic model of jockeying between two FCFS queues.
//!
//! Jobs arrive as a Poisson stream, join the shorter of two exponential
//! servers whose rates split the arrival rate, and keep re-evaluating whether
//! the other queue would complete them sooner. The [`analytic`] module gives
//! the closed-form expected jockeying frequency the simulation is checked
//! against.

pub mod analytic;
pub mod config;
pub mod decision;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod history;
pub mod metrics;
pub mod quadrature;
pub mod queue;
pub mod reproduce;
pub mod rng;
pub mod stats;

pub use config::{service_rates, DeltaLambdaPolicy, Horizon, SigmaPolicy, SimConfig};
pub use engine::{run, run_with, RunOptions, SimResult, Simulation};
pub use error::{Error, Result};
