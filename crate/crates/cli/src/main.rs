use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use jockey_core::config::Horizon;
use jockey_core::experiment::{self, ExperimentOutcome, ExperimentPlan, DEFAULT_REPLICATIONS};
use jockey_core::reproduce;
use jockey_core::SimConfig;

/// Two-queue jockeying simulator and reproduction harness.
#[derive(Debug, Parser)]
#[command(name = "jockey", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Common {
    /// Base seed; replication r runs with seed + r.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads [default: available parallelism].
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Write the event log of every replication.
    #[arg(long, global = true)]
    trace: bool,

    /// Replications per grid point.
    #[arg(long, global = true)]
    replications: Option<u32>,

    #[command(flatten)]
    config: ConfigFlags,
}

/// Overrides applied to every grid point, named after the configuration fields.
#[derive(Debug, Args)]
struct ConfigFlags {
    /// Arrival rate.
    #[arg(long, global = true, allow_hyphen_values = true)]
    lambda: Option<String>,

    /// Rate asymmetry: `fixed:V`, `sampled:LOW:HIGH` or a number.
    #[arg(long = "delta_lambda", global = true, allow_hyphen_values = true)]
    delta_lambda: Option<String>,

    /// Stop condition: `departures:N`, `time:T` or a departure count.
    #[arg(long, global = true, allow_hyphen_values = true)]
    horizon: Option<String>,

    /// Trial count of the binomial jockeying model.
    #[arg(long, global = true, allow_hyphen_values = true)]
    d: Option<String>,

    /// `estimated`, `fixed:V` or a number.
    #[arg(long = "sigma_policy", global = true, allow_hyphen_values = true)]
    sigma_policy: Option<String>,

    #[arg(long = "quadrature_tolerance", global = true, allow_hyphen_values = true)]
    quadrature_tolerance: Option<String>,

    #[arg(long = "min_history_for_eq2", global = true, allow_hyphen_values = true)]
    min_history_for_eq2: Option<String>,
}

impl ConfigFlags {
    fn pairs(&self) -> Vec<(&'static str, &str)> {
        [
            ("lambda", &self.lambda),
            ("delta_lambda", &self.delta_lambda),
            ("horizon", &self.horizon),
            ("d", &self.d),
            ("sigma_policy", &self.sigma_policy),
            ("quadrature_tolerance", &self.quadrature_tolerance),
            ("min_history_for_eq2", &self.min_history_for_eq2),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.as_deref().map(|v| (k, v)))
        .collect()
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment described by a plan file or a previous manifest.
    Run { plan: PathBuf },
    /// Run a named reproduction recipe.
    Reproduce {
        recipe: Recipe,

        /// For table2: only evaluate the closed-form column.
        #[arg(long)]
        analytic_only: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Recipe {
    Table1,
    Table2,
    Figures,
}

impl Recipe {
    fn name(self) -> &'static str {
        match self {
            Recipe::Table1 => "table1",
            Recipe::Table2 => "table2",
            Recipe::Figures => "figures",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn execute(cli: &Cli) -> anyhow::Result<()> {
    let common = &cli.common;
    let jobs = common
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    match &cli.command {
        Command::Run { plan } => {
            let loaded =
                ExperimentPlan::load(plan).with_context(|| format!("cannot load plan `{}`", plan.display()))?;
            let plan = apply_overrides(loaded, common)?;
            let out = common.out.clone().unwrap_or_else(|| experiment::default_out("run"));
            let outcome = experiment::run_experiment(&plan, &out, jobs)?;
            print_summaries(&outcome, &out);
        }
        Command::Reproduce { recipe, analytic_only } => {
            let out = common
                .out
                .clone()
                .unwrap_or_else(|| experiment::default_out(recipe.name()));
            reproduce_recipe(*recipe, *analytic_only, common, &out, jobs)?;
        }
    }
    Ok(())
}

fn reproduce_recipe(
    recipe: Recipe,
    analytic_only: bool,
    common: &Common,
    out: &Path,
    jobs: usize,
) -> anyhow::Result<()> {
    match recipe {
        Recipe::Table1 => {
            let mut config = SimConfig::default();
            for (k, v) in common.config.pairs() {
                config.set(k, v)?;
            }
            let (_, report) = reproduce::reproduce_table1(out, config.quadrature_tolerance)?;
            print!("{report}");
        }
        Recipe::Table2 => {
            let analytic = reproduce::table2_analytic();
            print!("{}", reproduce::format_table2_analytic(&analytic));
            if analytic_only {
                std::fs::create_dir_all(out).with_context(|| format!("cannot create `{}`", out.display()))?;
                let path = out.join("table2_analytic.csv");
                let file =
                    std::fs::File::create(&path).with_context(|| format!("cannot write `{}`", path.display()))?;
                reproduce::write_table2_analytic_csv(file, &analytic)?;
                return Ok(());
            }
            let plan = reproduce::table2_plan(&recipe_base(), DEFAULT_REPLICATIONS);
            let outcome = experiment::run_experiment(&apply_overrides(plan, common)?, out, jobs)?;
            print_summaries(&outcome, out);
        }
        Recipe::Figures => {
            let plan = reproduce::figures_plan(&recipe_base(), DEFAULT_REPLICATIONS);
            let outcome = experiment::run_experiment(&apply_overrides(plan, common)?, out, jobs)?;
            print_summaries(&outcome, out);
        }
    }
    Ok(())
}

fn recipe_base() -> SimConfig {
    reproduce::recipe_base(0, SimConfig::default().horizon)
}

fn apply_overrides(mut plan: ExperimentPlan, common: &Common) -> anyhow::Result<ExperimentPlan> {
    for (key, value) in common.config.pairs() {
        plan.set_all(key, value)?;
    }
    if let Some(seed) = common.seed {
        for point in &mut plan.points {
            point.seed = seed;
        }
    }
    if let Some(n) = common.replications {
        plan.replications = n;
    }
    plan.trace |= common.trace;
    plan.validate()?;
    Ok(plan)
}

fn print_summaries(outcome: &ExperimentOutcome, out: &Path) {
    println!(
        "{:>5} {:>6} {:>7} {:>7} {:>10} {:>10} {:>10} {:>9} {:>9}",
        "point", "lambda", "mu_i", "mu_j", "T_w,k", "T_w,tau", "xi (i)", "xi all", "xi_model"
    );
    for (i, p) in outcome.points.iter().enumerate() {
        let s = &p.summary;
        println!(
            "{:>5} {:>6} {:>7.3} {:>7.3} {:>10.3} {:>10.3} {:>10.5} {:>9.4} {:>9.4}",
            i, s.lambda, s.mu_i, s.mu_j, s.mean_t_w_k, s.mean_t_w_tau, s.mean_xi_simulated, s.mean_xi_total, s.xi_model
        );
    }
    let horizon = outcome.manifest.plan.points.first().map(|p| p.horizon);
    if let Some(Horizon::Departures { count }) = horizon {
        println!(
            "{} replication(s) x {count} departures per point; outputs in {}",
            outcome.manifest.plan.replications,
            out.display()
        );
    } else {
        println!("outputs in {}", out.display());
    }
}
