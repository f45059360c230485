//! Command-line surface and one handler per subcommand.
//!
//! Every handler writes into the output directory and finishes with a
//! `manifest.json` for that command.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use longhorizon::data::{write_csv, write_experimental, write_historical, Column, Table};
use longhorizon::ope::EstimatorKind;
use longhorizon::policy::Policy;
use longhorizon::sim::{
    churn_population, power_curve, validation_on, Assignment, PowerConfig, PowerResult, ValidationOptions,
    ValidationReport,
};
use longhorizon::surrogate::{ate_bias_bound, covariate_shift_report, BiasBoundReport, ShiftReport, SurrogateModel};
use serde::Serialize;

use crate::artifacts::{OutputDir, RunManifest};
use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult, InStage};
use crate::pipeline::{
    bts_stage, evaluate_stage, fit_surrogate, impute_outcomes, learn_policy_stage, load_inputs, outcome_table,
    read_outcomes, run_pipeline, write_bts, EvalUnits, Inputs, IMPUTED_COLUMN,
};

#[derive(Debug, Parser)]
#[command(name = "longhorizon", version, about = "Surrogate-index policy learning over files")]
pub struct Cli {
    /// Pipeline config (JSON). Optional for `power` only.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the config's `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; overrides the config's `output_dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorArg {
    Ht,
    Hajek,
    Dr,
}

impl From<EstimatorArg> for EstimatorKind {
    fn from(e: EstimatorArg) -> Self {
        match e {
            EstimatorArg::Ht => EstimatorKind::Ht,
            EstimatorArg::Hajek => EstimatorKind::Hajek,
            EstimatorArg::Dr => EstimatorKind::Dr,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AssignmentArg {
    Design,
    Uniform,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Full loop: surrogate, imputation, policy, evaluation, BTS.
    Run,
    /// Draw a simulated experiment and historical sample with ground truth.
    Simulate,
    /// Fit the surrogate index on the historical sample.
    FitSurrogate,
    /// Impute long-term outcomes for the experimental units.
    Impute {
        /// Saved surrogate model; fitted from the config when omitted.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Learn a policy from per-unit outcomes on the training split.
    LearnPolicy {
        #[arg(long)]
        outcomes: PathBuf,
        #[arg(long, default_value = IMPUTED_COLUMN)]
        column: String,
    },
    /// Estimate a policy's value next to the treat-none baseline.
    Evaluate {
        /// Saved policy, or `treat-none`.
        #[arg(long)]
        policy: String,
        #[arg(long)]
        outcomes: PathBuf,
        #[arg(long, default_value = IMPUTED_COLUMN)]
        column: String,
        #[arg(long, value_enum)]
        estimator: Option<EstimatorArg>,
        #[arg(long)]
        replicates: Option<usize>,
        /// Evaluate on every unit instead of the held-out split.
        #[arg(long)]
        all_units: bool,
    },
    /// Bootstrap Thompson sampling assignment probabilities.
    BtsAssign {
        #[arg(long)]
        outcomes: PathBuf,
        #[arg(long, default_value = IMPUTED_COLUMN)]
        column: String,
        #[arg(long)]
        replicates: Option<usize>,
    },
    /// Horizon sweep against simulator ground truth.
    Validate {
        /// Comma-separated surrogate horizons.
        #[arg(long, value_delimiter = ',')]
        horizons: Option<Vec<usize>>,
    },
    /// Monte-Carlo power of the churn experiment test.
    Power {
        /// Comma-separated effect sizes.
        #[arg(long, value_delimiter = ',')]
        taus: Option<Vec<f64>>,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long, value_enum)]
        assignment: Option<AssignmentArg>,
    },
    /// Surrogate bias bound and covariate shift between the two samples.
    Diagnose,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Run => "run",
            Command::Simulate => "simulate",
            Command::FitSurrogate => "fit-surrogate",
            Command::Impute { .. } => "impute",
            Command::LearnPolicy { .. } => "learn-policy",
            Command::Evaluate { .. } => "evaluate",
            Command::BtsAssign { .. } => "bts-assign",
            Command::Validate { .. } => "validate",
            Command::Power { .. } => "power",
            Command::Diagnose => "diagnose",
        }
    }
}

fn load_config(cli: &Cli) -> CliResult<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None if matches!(cli.command, Command::Power { .. }) => PipelineConfig::from_json("{}")?,
        None => return Err(CliError::config("--config is required")),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn output_dir(cli: &Cli, cfg: &PipelineConfig) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

/// Parse, validate and dispatch.
pub fn execute(cli: Cli) -> CliResult<RunManifest> {
    let mut cfg = load_config(&cli)?;
    match &cli.command {
        Command::Evaluate {
            estimator, replicates, ..
        } => {
            if let Some(e) = estimator {
                cfg.evaluation.estimator = (*e).into();
            }
            if let Some(r) = replicates {
                cfg.evaluation.replicates = *r;
            }
        }
        Command::BtsAssign { replicates: Some(r), .. } => cfg.bts.replicates = *r,
        Command::Validate { horizons: Some(h) } => cfg.validation.horizons = h.clone(),
        Command::Power {
            taus,
            q,
            reps,
            assignment,
        } => {
            if let Some(t) = taus {
                cfg.power.taus = t.clone();
            }
            if let Some(q) = q {
                cfg.power.q = *q;
            }
            if let Some(r) = reps {
                cfg.power.n_reps = *r;
            }
            if let Some(a) = assignment {
                cfg.power.assignment = match a {
                    AssignmentArg::Design => Assignment::Design,
                    AssignmentArg::Uniform => Assignment::Uniform,
                };
            }
        }
        _ => {}
    }
    cfg.validate()?;
    for p in input_paths(&cli.command) {
        if !p.exists() {
            return Err(CliError::config(format!("input file not found: {}", p.display())));
        }
    }
    let out = output_dir(&cli, &cfg);
    let name = cli.command.name();
    if let Command::Run = cli.command {
        return run_pipeline(&cfg, &out);
    }
    let mut dir = OutputDir::create(&out)?;
    match &cli.command {
        Command::Run => unreachable!("handled above"),
        Command::Simulate => simulate(&cfg, &mut dir)?,
        Command::FitSurrogate => {
            let inputs = dir.timed("data", |_| load_inputs(&cfg))?;
            dir.timed("surrogate", |o| {
                let m = fit_surrogate(&cfg, &inputs)?;
                o.write_with("surrogate", "surrogate_model.json", |p| m.save(p))?;
                Ok(())
            })?;
        }
        Command::Impute { model } => {
            let inputs = dir.timed("data", |_| load_inputs(&cfg))?;
            dir.timed("impute", |o| {
                let m = match model {
                    Some(p) => SurrogateModel::load(p).stage("impute")?,
                    None => fit_surrogate(&cfg, &inputs)?,
                };
                let y = impute_outcomes(&m, &inputs.experiment)?;
                let t = outcome_table(&y, IMPUTED_COLUMN)?;
                o.write_with("impute", "imputed.csv", |p| write_csv(&t, p))?;
                Ok(())
            })?;
        }
        Command::LearnPolicy { outcomes, column } => {
            let inputs = dir.timed("data", |_| load_inputs(&cfg))?;
            let y = read_outcomes(outcomes, column, inputs.experiment.n_units())?;
            dir.timed("policy", |o| {
                let l = learn_policy_stage(&cfg, &inputs.experiment, &y)?;
                o.write_with("policy", "policy.json", |p| l.policy.save(p))?;
                if let Some(sel) = &l.selection {
                    o.write_json("policy", "policy_selection.json", sel)?;
                }
                Ok(())
            })?;
        }
        Command::Evaluate {
            policy,
            outcomes,
            column,
            all_units,
            ..
        } => {
            let inputs = dir.timed("data", |_| load_inputs(&cfg))?;
            let y = read_outcomes(outcomes, column, inputs.experiment.n_units())?;
            let policy = load_policy(policy, &inputs)?;
            let units = if *all_units { EvalUnits::All } else { EvalUnits::Test };
            dir.timed("evaluate", |o| {
                let ev = evaluate_stage(&cfg, &inputs, &y, column, &policy, units)?;
                o.write_json("evaluate", "evaluation.json", &ev)?;
                Ok(())
            })?;
        }
        Command::BtsAssign { outcomes, column, .. } => {
            let inputs = dir.timed("data", |_| load_inputs(&cfg))?;
            let y = read_outcomes(outcomes, column, inputs.experiment.n_units())?;
            dir.timed("bts", |o| {
                let r = bts_stage(&cfg, &inputs.experiment, &y, &cfg.policy.classifier)?;
                write_bts(o, &cfg, &r)?;
                o.write_json(
                    "bts",
                    "bts_summary.json",
                    &BtsSummary {
                        replicates: cfg.bts.replicates,
                        kept_replicates: r.kept_replicates,
                        dropped_replicates: r.dropped_replicates,
                        floor: cfg.bts.floor,
                        ceiling: cfg.bts.ceiling,
                    },
                )?;
                Ok(())
            })?;
        }
        Command::Validate { .. } => validate(&cfg, &mut dir)?,
        Command::Power { .. } => power(&cfg, &mut dir)?,
        Command::Diagnose => diagnose(&cfg, &mut dir)?,
    }
    dir.finish(name, cfg.hash(), cfg.seed)
}

/// Files named on the command line, checked before any compute.
fn input_paths(cmd: &Command) -> Vec<&Path> {
    match cmd {
        Command::Impute { model: Some(m) } => vec![m.as_path()],
        Command::LearnPolicy { outcomes, .. } | Command::BtsAssign { outcomes, .. } => vec![outcomes.as_path()],
        Command::Evaluate { policy, outcomes, .. } => {
            let mut v = vec![outcomes.as_path()];
            if policy != "treat-none" {
                v.push(Path::new(policy));
            }
            v
        }
        _ => Vec::new(),
    }
}

fn load_policy(spec: &str, inputs: &Inputs) -> CliResult<Policy> {
    if spec == "treat-none" {
        let e = &inputs.experiment;
        return Ok(Policy::constant(0, e.n_actions(), e.features()));
    }
    let p = Policy::load(spec).stage("evaluate")?;
    if p.action_set != inputs.experiment.n_actions() {
        return Err(CliError::config(format!(
            "policy {spec} has {} actions, the experiment has {}",
            p.action_set,
            inputs.experiment.n_actions()
        )));
    }
    Ok(p)
}

#[derive(Debug, Serialize)]
struct BtsSummary {
    replicates: usize,
    kept_replicates: usize,
    dropped_replicates: usize,
    floor: f64,
    ceiling: f64,
}

fn simulate(cfg: &PipelineConfig, dir: &mut OutputDir) -> CliResult<()> {
    let dgp = cfg
        .dgp()
        .ok_or_else(|| CliError::config("`simulate` needs a `data.simulate` section"))?;
    let inputs = dir.timed("data", |_| load_inputs(cfg))?;
    let sim = inputs.sim.expect("simulated inputs");
    let schema = sim.dgp.schema();
    dir.timed("write", |o| {
        o.write_with("simulate", "experimental.csv", |p| write_experimental(&sim.experiment, &schema, p))?;
        o.write_with("simulate", "historical.csv", |p| write_historical(&sim.historical, &schema, p))?;
        let truth = sim.truth_table().stage("simulate")?;
        o.write_with("simulate", "truth.csv", |p| write_csv(&truth, p))?;
        let y = outcome_table(&sim.outcomes, "y")?;
        o.write_with("simulate", "outcomes.csv", |p| write_csv(&y, p))?;
        o.write_json("simulate", "schema.json", &schema)?;
        o.write_json("simulate", "dgp.json", &dgp)?;
        Ok(())
    })
}

fn table(stage: &'static str, cols: Vec<(&str, Column)>) -> CliResult<Table> {
    Table::new(cols.into_iter().map(|(n, c)| (n.to_string(), c)).collect()).stage(stage)
}

fn validate(cfg: &PipelineConfig, dir: &mut OutputDir) -> CliResult<()> {
    let inputs = dir.timed("data", |_| load_inputs(cfg))?;
    let sim = inputs
        .sim
        .ok_or_else(|| CliError::config("`validate` needs simulated data (`data.simulate`)"))?;
    let horizons = if cfg.validation.horizons.is_empty() {
        (1..=sim.config().n_periods).collect()
    } else {
        cfg.validation.horizons.clone()
    };
    let opts = ValidationOptions {
        surrogate: cfg.surrogate.spec.clone(),
        outcome: cfg.outcome_options(0),
        classifier: cfg.policy.classifier.clone(),
        test_fraction: cfg.evaluation.test_fraction,
        bootstrap_replicates: cfg.evaluation.replicates,
        level: cfg.evaluation.level,
        seed: cfg.stage_seed("validate"),
    };
    let report = dir.timed("validate", |_| validation_on(&sim, &horizons, &opts).stage("validate"))?;
    dir.timed("write", |o| write_validation(o, &report))
}

fn write_validation(o: &mut OutputDir, r: &ValidationReport) -> CliResult<()> {
    const S: &str = "validate";
    let mut att: Vec<Vec<f64>> = vec![Vec::new(); 8];
    for h in &r.horizons {
        for a in &h.att {
            for (col, v) in att.iter_mut().zip([
                h.horizon as f64,
                a.action as f64,
                a.index.point,
                a.index.low,
                a.index.high,
                a.truth.point,
                a.truth.low,
                a.truth.high,
            ]) {
                col.push(v);
            }
        }
    }
    let names = ["horizon", "action", "att_index", "att_index_low", "att_index_high", "att_truth", "att_truth_low", "att_truth_high"];
    let t = table(S, names.iter().zip(att).map(|(n, v)| (*n, to_column(n, v))).collect())?;
    o.write_with(S, "panel_a_att.csv", |p| write_csv(&t, p))?;

    let hs = &r.horizons;
    let col = |f: &dyn Fn(&longhorizon::sim::HorizonReport) -> f64| Column::Float(hs.iter().map(f).collect());
    let horizon = || Column::Int(hs.iter().map(|h| h.horizon as i64).collect());
    let t = table(
        S,
        vec![
            ("horizon", horizon()),
            ("status_quo", col(&|h| h.value_status_quo)),
            ("index_policy", col(&|h| h.value_index_policy)),
            ("proxy_policy", col(&|h| h.value_proxy_policy)),
            ("outcome_policy", col(&|h| h.value_outcome_policy)),
            ("oracle_policy", col(&|_| r.value_oracle_policy)),
        ],
    )?;
    o.write_with(S, "panel_b_policy_values.csv", |p| write_csv(&t, p))?;

    let t = table(
        S,
        vec![
            ("horizon", horizon()),
            ("true_difference", col(&|h| h.value_difference)),
            ("dr_difference", col(&|h| h.value_difference_dr.point)),
            ("dr_low", col(&|h| h.value_difference_dr.low)),
            ("dr_high", col(&|h| h.value_difference_dr.high)),
            ("agreement_rate", col(&|h| h.agreement_rate)),
        ],
    )?;
    o.write_with(S, "panel_c_value_difference.csv", |p| write_csv(&t, p))?;

    let rows: Vec<(usize, &longhorizon::sim::SurrogateSetRow)> =
        hs.iter().flat_map(|h| h.surrogate_sets.iter().map(move |s| (h.horizon, s))).collect();
    let t = table(
        S,
        vec![
            ("horizon", Column::Int(rows.iter().map(|(h, _)| *h as i64).collect())),
            ("surrogate_set", Column::categorical(&rows.iter().map(|(_, s)| s.set.name()).collect::<Vec<_>>())),
            ("att_index", Column::Float(rows.iter().map(|(_, s)| s.att_index).collect())),
            ("att_truth", Column::Float(rows.iter().map(|(_, s)| s.att_truth).collect())),
            ("policy_value", Column::Float(rows.iter().map(|(_, s)| s.policy_value).collect())),
            (
                "agreement_with_outcome_policy",
                Column::Float(rows.iter().map(|(_, s)| s.agreement_with_outcome_policy).collect()),
            ),
        ],
    )?;
    o.write_with(S, "panel_d_surrogate_sets.csv", |p| write_csv(&t, p))?;
    o.write_json(S, "validation.json", r)?;
    Ok(())
}

fn to_column(name: &str, v: Vec<f64>) -> Column {
    if name == "horizon" || name == "action" {
        Column::Int(v.into_iter().map(|x| x as i64).collect())
    } else {
        Column::Float(v)
    }
}

#[derive(Debug, Serialize)]
struct PowerReport {
    population: usize,
    q: f64,
    alpha: f64,
    n_reps: usize,
    assignment: Assignment,
    results: Vec<PowerResult>,
}

fn power(cfg: &PipelineConfig, dir: &mut OutputDir) -> CliResult<()> {
    let p = &cfg.power;
    let base = PowerConfig {
        q: p.q,
        tau_effect: 0.0,
        n_reps: p.n_reps,
        alpha: p.alpha,
        assignment: p.assignment,
    };
    let results = dir.timed("power", |_| {
        let pop = churn_population(p.population, cfg.stage_seed("power_population"));
        power_curve(&pop.base_outcomes, &pop.risk, &base, &p.taus, cfg.stage_seed("power")).stage("power")
    })?;
    dir.timed("write", |o| {
        let f = |g: &dyn Fn(&PowerResult) -> f64| Column::Float(results.iter().map(g).collect());
        let i = |g: &dyn Fn(&PowerResult) -> usize| Column::Int(results.iter().map(|r| g(r) as i64).collect());
        let t = table(
            "power",
            vec![
                ("tau", f(&|r| r.tau_effect)),
                ("power", f(&|r| r.power)),
                ("mc_se", f(&|r| (r.power * (1.0 - r.power) / r.n_reps as f64).sqrt())),
                ("rejections", i(&|r| r.rejections)),
                ("n_reps", i(&|r| r.n_reps)),
                ("degenerate_reps", i(&|r| r.degenerate_reps)),
                ("mean_att", f(&|r| r.mean_att)),
                ("mean_true_att", f(&|r| r.mean_true_att)),
                ("mean_fraction_treated", f(&|r| r.mean_fraction_treated)),
            ],
        )?;
        o.write_with("power", "power.csv", |path| write_csv(&t, path))?;
        o.write_json(
            "power",
            "power.json",
            &PowerReport {
                population: p.population,
                q: p.q,
                alpha: p.alpha,
                n_reps: p.n_reps,
                assignment: p.assignment,
                results: results.clone(),
            },
        )?;
        Ok(())
    })
}

#[derive(Debug, Serialize)]
struct Diagnosis {
    /// Only defined for binary experiments.
    bias_bound: Option<BiasBoundReport>,
    /// Historical sample is `d1`, experiment is `d2`.
    shift: ShiftReport,
    non_overlapping_features: Vec<String>,
}

fn diagnose(cfg: &PipelineConfig, dir: &mut OutputDir) -> CliResult<()> {
    let inputs = dir.timed("data", |_| load_inputs(cfg))?;
    let inputs = inputs.with_surrogate_columns(&cfg.surrogate.columns)?;
    let d = dir.timed("diagnose", |_| {
        let bias_bound = if inputs.experiment.n_actions() == 2 {
            Some(ate_bias_bound(&inputs.historical, &inputs.experiment).stage("diagnose")?)
        } else {
            log::warn!("the bias bound is defined for binary experiments only; skipped");
            None
        };
        let shift = covariate_shift_report(inputs.historical.features(), inputs.experiment.features()).stage("diagnose")?;
        let non_overlapping_features = shift.rows.iter().filter(|r| !r.overlap).map(|r| r.feature.clone()).collect();
        Ok(Diagnosis {
            bias_bound,
            shift,
            non_overlapping_features,
        })
    })?;
    dir.write_with("diagnose", "shift.csv", |p| d.shift.write_csv(p))?;
    dir.write_json("diagnose", "diagnose.json", &d)?;
    Ok(())
}
