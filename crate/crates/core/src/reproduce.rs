//! Named reproduction recipes for the published tables and figure data.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::analytic::{expected_jockeys, RatePair};
use crate::config::{DeltaLambdaPolicy, Horizon, SimConfig};
use crate::decision::{expected_joiners, routing_probability, QueueLengthModel};
use crate::error::Result;
use crate::experiment::{create_dir, create_file, ExperimentPlan};

/// Disagreement above which a Table 1 row is flagged.
pub const TABLE1_FLAG: f64 = 1e-3;
/// Arrivals per step and shared standard deviation behind Table 1.
pub const TABLE1_ARRIVALS: f64 = 5.0;
pub const TABLE1_SIGMA: f64 = 1.0;

/// A published routing-probability row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Table1Row {
    pub len_q1: f64,
    pub len_q2: f64,
    pub tau_1: f64,
    pub tau_2: f64,
    pub p: f64,
    pub beta: f64,
}

pub const TABLE1: [Table1Row; 5] = [
    Table1Row {
        len_q1: 5.0,
        len_q2: 2.0,
        tau_1: 5.0,
        tau_2: 7.0,
        p: 0.49996,
        beta: 2.4998,
    },
    Table1Row {
        len_q1: 2.0,
        len_q2: 10.0,
        tau_1: 7.0,
        tau_2: 10.0,
        p: 0.83999,
        beta: 4.199995,
    },
    Table1Row {
        len_q1: 13.0,
        len_q2: 12.0,
        tau_1: 13.0,
        tau_2: 17.0,
        p: 0.5,
        beta: 2.5,
    },
    Table1Row {
        len_q1: 15.0,
        len_q2: 20.0,
        tau_1: 20.0,
        tau_2: 20.0,
        p: 1.0,
        beta: 5.0,
    },
    Table1Row {
        len_q1: 1.0,
        len_q2: 4.0,
        tau_1: 6.0,
        tau_2: 4.0,
        p: 0.5,
        beta: 2.5,
    },
];

/// Equal lengths with a conditioning window centred on them, where symmetry
/// forces `P = 1/2`.
pub const SYMMETRIC_ROW: Table1Row = Table1Row {
    len_q1: 8.0,
    len_q2: 8.0,
    tau_1: 15.0,
    tau_2: 15.0,
    p: 0.5,
    beta: 2.5,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Table1Entry {
    pub label: &'static str,
    pub row: Table1Row,
    pub p: f64,
    pub beta: f64,
    pub delta_p: f64,
    pub delta_beta: f64,
    pub degenerate: bool,
    pub flagged: bool,
}

/// Evaluates a row with the lengths as the Gaussian means (`X` for queue 1,
/// `Y` for queue 2) and the conditioning window `[1, τ_1]`.
pub fn evaluate_table1_row(label: &'static str, row: Table1Row, tolerance: f64) -> Table1Entry {
    let model = QueueLengthModel::new(row.len_q1, row.len_q2, TABLE1_SIGMA);
    let p = routing_probability(row.tau_1, &model, tolerance);
    let beta = expected_joiners(TABLE1_ARRIVALS, p.value);
    let delta_p = (p.value - row.p).abs();
    let delta_beta = (beta - row.beta).abs();
    Table1Entry {
        label,
        row,
        p: p.value,
        beta,
        delta_p,
        delta_beta,
        degenerate: p.degenerate,
        flagged: delta_p > TABLE1_FLAG || delta_beta > TABLE1_FLAG,
    }
}

/// The published rows followed by the symmetric control row.
pub fn table1(tolerance: f64) -> Vec<Table1Entry> {
    const LABELS: [&str; 5] = ["row 1", "row 2", "row 3", "row 4", "row 5"];
    let mut entries: Vec<Table1Entry> = TABLE1
        .iter()
        .zip(LABELS)
        .map(|(row, label)| evaluate_table1_row(label, *row, tolerance))
        .collect();
    entries.push(evaluate_table1_row("symmetric", SYMMETRIC_ROW, tolerance));
    entries
}

pub fn format_table1(entries: &[Table1Entry]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<10} {:>6} {:>6} {:>6} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}  note",
        "row", "len_1", "len_2", "tau_1", "P paper", "P", "|dP|", "b paper", "beta", "|dbeta|"
    );
    for e in entries {
        let mut note = Vec::new();
        if e.flagged {
            note.push(format!("differs by more than {TABLE1_FLAG:e}"));
        }
        if e.degenerate {
            note.push("empty conditioning window".to_string());
        }
        let _ = writeln!(
            s,
            "{:<10} {:>6} {:>6} {:>6} {:>9.5} {:>9.5} {:>9.2e} {:>9.4} {:>9.4} {:>9.2e}  {}",
            e.label,
            e.row.len_q1,
            e.row.len_q2,
            e.row.tau_1,
            e.row.p,
            e.p,
            e.delta_p,
            e.row.beta,
            e.beta,
            e.delta_beta,
            note.join("; ")
        );
    }
    s
}

pub fn write_table1_csv<W: Write>(out: W, entries: &[Table1Entry]) -> Result<()> {
    #[derive(Serialize)]
    struct Row {
        row: &'static str,
        len_q1: f64,
        len_q2: f64,
        tau_1: f64,
        p_paper: f64,
        p: f64,
        delta_p: f64,
        beta_paper: f64,
        beta: f64,
        delta_beta: f64,
        flagged: bool,
    }
    let mut w = csv::Writer::from_writer(out);
    for e in entries {
        w.serialize(Row {
            row: e.label,
            len_q1: e.row.len_q1,
            len_q2: e.row.len_q2,
            tau_1: e.row.tau_1,
            p_paper: e.row.p,
            p: e.p,
            delta_p: e.delta_p,
            beta_paper: e.row.beta,
            beta: e.beta,
            delta_beta: e.delta_beta,
            flagged: e.flagged,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// A published row of averaged simulation measures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Table2Row {
    pub lambda: f64,
    pub mu_i: f64,
    pub mu_j: f64,
    pub t_w_k: f64,
    pub t_w_tau: f64,
    pub xi: f64,
    pub xi_model: f64,
}

pub const TABLE2_D: u32 = 5;

pub const TABLE2: [Table2Row; 6] = [
    Table2Row {
        lambda: 7.0,
        mu_i: 4.0,
        mu_j: 3.0,
        t_w_k: 18.653,
        t_w_tau: 18.817,
        xi: 1.75,
        xi_model: 2.1428,
    },
    Table2Row {
        lambda: 7.0,
        mu_i: 4.5,
        mu_j: 2.5,
        t_w_k: 19.098,
        t_w_tau: 17.487,
        xi: 1.51,
        xi_model: 1.7857,
    },
    Table2Row {
        lambda: 9.0,
        mu_i: 6.0,
        mu_j: 3.0,
        t_w_k: 29.523,
        t_w_tau: 26.694,
        xi: 1.005,
        xi_model: 1.667,
    },
    Table2Row {
        lambda: 9.0,
        mu_i: 7.0,
        mu_j: 2.0,
        t_w_k: 29.725,
        t_w_tau: 25.740,
        xi: 0.664,
        xi_model: 1.1111,
    },
    Table2Row {
        lambda: 11.0,
        mu_i: 9.0,
        mu_j: 2.0,
        t_w_k: 30.025,
        t_w_tau: 25.274,
        xi: 0.512,
        xi_model: 0.909,
    },
    Table2Row {
        lambda: 11.0,
        mu_i: 10.0,
        mu_j: 1.0,
        t_w_k: 30.125,
        t_w_tau: 24.43,
        xi: 0.453,
        xi_model: 0.4545,
    },
];

/// Analytic expected jockey count for every row, with `d = 5`.
pub fn table2_analytic() -> Vec<(Table2Row, f64)> {
    TABLE2
        .iter()
        .map(|row| {
            let rates = RatePair::new(row.mu_i, row.mu_j).expect("published rates are positive");
            (*row, expected_jockeys(TABLE2_D, rates))
        })
        .collect()
}

pub fn format_table2_analytic(rows: &[(Table2Row, f64)]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>6} {:>6} {:>6} {:>10} {:>10} {:>9}",
        "lambda", "mu_i", "mu_j", "xi paper", "xi_model", "|diff|"
    );
    for (row, xi) in rows {
        let _ = writeln!(
            s,
            "{:>6} {:>6} {:>6} {:>10.4} {:>10.4} {:>9.2e}",
            row.lambda,
            row.mu_i,
            row.mu_j,
            row.xi_model,
            xi,
            (xi - row.xi_model).abs()
        );
    }
    s
}

fn rate_point(lambda: f64, mu_i: f64, mu_j: f64, base: &SimConfig) -> SimConfig {
    debug_assert!((mu_i + mu_j - lambda).abs() < 1e-12);
    SimConfig {
        lambda,
        delta_lambda: DeltaLambdaPolicy::Fixed { value: mu_i - mu_j },
        ..base.clone()
    }
}

/// The six published rate pairs as grid points derived from `base`.
pub fn table2_plan(base: &SimConfig, replications: u32) -> ExperimentPlan {
    ExperimentPlan {
        points: TABLE2
            .iter()
            .map(|r| {
                rate_point(
                    r.lambda,
                    r.mu_i,
                    r.mu_j,
                    &SimConfig {
                        d: TABLE2_D,
                        ..base.clone()
                    },
                )
            })
            .collect(),
        replications,
        ..ExperimentPlan::default()
    }
}

/// Asymmetry of the near-symmetric histogram point.
pub const SYMMETRIC_DELTA: f64 = 1e-9;

/// Figure data: a near-symmetric run for the length histograms followed by
/// the published rate pairs for the rate-gap and sojourn figures.
pub fn figures_plan(base: &SimConfig, replications: u32) -> ExperimentPlan {
    let mut plan = table2_plan(base, replications);
    let symmetric = SimConfig {
        delta_lambda: DeltaLambdaPolicy::Fixed { value: SYMMETRIC_DELTA },
        ..plan.points[0].clone()
    };
    plan.points.insert(0, symmetric);
    plan
}

/// Base configuration of the simulated recipes.
pub fn recipe_base(seed: u64, horizon: Horizon) -> SimConfig {
    SimConfig {
        seed,
        horizon,
        ..SimConfig::default()
    }
}

/// Writes the Table 1 CSV under `out` and returns the formatted report.
pub fn reproduce_table1(out: &Path, tolerance: f64) -> Result<(Vec<Table1Entry>, String)> {
    let entries = table1(tolerance);
    create_dir(out)?;
    write_table1_csv(create_file(&out.join("table1.csv"))?, &entries)?;
    let report = format_table1(&entries);
    Ok((entries, report))
}

pub fn write_table2_analytic_csv<W: Write>(out: W, rows: &[(Table2Row, f64)]) -> Result<()> {
    #[derive(Serialize)]
    struct Row {
        lambda: f64,
        mu_i: f64,
        mu_j: f64,
        d: u32,
        xi_model: f64,
        xi_model_paper: f64,
    }
    let mut w = csv::Writer::from_writer(out);
    for (row, xi) in rows {
        w.serialize(Row {
            lambda: row.lambda,
            mu_i: row.mu_i,
            mu_j: row.mu_j,
            d: TABLE2_D,
            xi_model: *xi,
            xi_model_paper: row.xi_model,
        })?;
    }
    w.flush()?;
    Ok(())
}
