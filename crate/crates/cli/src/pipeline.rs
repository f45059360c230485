//! Stage functions shared by `run` and the single-stage subcommands.
//!
//! Each stage takes its inputs explicitly, so running the subcommands one
//! after another over files reproduces the in-process pipeline exactly.

use std::path::Path;

use longhorizon::data::{
    load_csv, load_experimental, load_historical, train_test_split, Column, ColumnSpec, DatasetSchema,
    ExperimentalDataset, HistoricalDataset, Table,
};
use longhorizon::explore::{bts_policy, sample_actions, write_assignment_csv, BtsResult, PolicyPipeline};
use longhorizon::learners::LearnerSpec;
use longhorizon::ope::{bootstrap_ci, fit_crossfit_outcome_model, EstimatorKind, EvaluationReport, PolicySnapshot};
use longhorizon::policy::{dr_scores, learn_policy, policy_assign, select_policy_classifier, Policy, PolicySelection};
use longhorizon::sim::{generate, true_policy_value_on, SimData};
use longhorizon::surrogate::{fit_surrogate_index, impute, SurrogateModel, SurrogateOptions, TuningOptions};
use serde::{Deserialize, Serialize};

use crate::artifacts::{OutputDir, RunManifest};
use crate::config::{DataSource, PipelineConfig};
use crate::error::{CliError, CliResult, InStage};

/// Column name of imputed outcomes in `imputed.csv`.
pub const IMPUTED_COLUMN: &str = "y_tilde";

/// The experiment and historical sample, plus ground truth when simulated.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub experiment: ExperimentalDataset,
    pub historical: HistoricalDataset,
    pub schema: DatasetSchema,
    pub sim: Option<SimData>,
}

pub fn load_inputs(cfg: &PipelineConfig) -> CliResult<Inputs> {
    match cfg.data()? {
        DataSource::Simulate(_) => {
            let dgp = cfg.dgp().expect("simulated data source");
            let sim = generate(&dgp).stage("data")?;
            Ok(Inputs {
                experiment: sim.experiment.clone(),
                historical: sim.historical.clone(),
                schema: sim.dgp.schema(),
                sim: Some(sim),
            })
        }
        DataSource::Files(f) => {
            let text = std::fs::read_to_string(&f.schema)
                .map_err(|e| CliError::config(format!("cannot read schema {}: {e}", f.schema.display())))?;
            let schema: DatasetSchema = serde_json::from_str(&text)
                .map_err(|e| CliError::config(format!("invalid schema {}: {e}", f.schema.display())))?;
            Ok(Inputs {
                experiment: load_experimental(&f.experimental, &schema).stage("data")?,
                historical: load_historical(&f.historical, &schema).stage("data")?,
                schema,
                sim: None,
            })
        }
    }
}

fn select(table: &Table, names: &Option<Vec<String>>, stage: &'static str) -> CliResult<Table> {
    match names {
        None => Ok(table.clone()),
        Some(n) => table.select(n).stage(stage),
    }
}

impl Inputs {
    /// Restrict both samples to the configured surrogate columns.
    pub fn with_surrogate_columns(&self, columns: &Option<Vec<String>>) -> CliResult<Self> {
        if columns.is_none() {
            return Ok(self.clone());
        }
        let exp_s = select(self.experiment.surrogates(), columns, "surrogate")?;
        let hist_s = select(self.historical.surrogates(), columns, "surrogate")?;
        Ok(Self {
            experiment: self.experiment.with_surrogates(exp_s).stage("surrogate")?,
            historical: self.historical.with_surrogates(hist_s).stage("surrogate")?,
            schema: self.schema.clone(),
            sim: self.sim.clone(),
        })
    }
}

pub fn fit_surrogate(cfg: &PipelineConfig, inputs: &Inputs) -> CliResult<SurrogateModel> {
    let s = &cfg.surrogate;
    let inputs = inputs.with_surrogate_columns(&s.columns)?;
    let options = SurrogateOptions {
        include_covariates: s.include_covariates,
        tuning: (!s.grid.is_empty()).then(|| TuningOptions {
            grid: s.grid.clone(),
            n_folds: s.n_folds,
            seed: cfg.stage_seed("surrogate"),
        }),
    };
    fit_surrogate_index(&inputs.historical, &s.spec, &options).stage("surrogate")
}

pub fn impute_outcomes(model: &SurrogateModel, experiment: &ExperimentalDataset) -> CliResult<Vec<f64>> {
    let names: Vec<&str> = model.surrogate_columns.iter().map(|c| c.name.as_str()).collect();
    let s = experiment.surrogates().select(&names).stage("impute")?;
    let exp = experiment.with_surrogates(s).stage("impute")?;
    impute(model, &exp).stage("impute")
}

/// `unit_id, <column>` table of per-unit outcomes.
pub fn outcome_table(values: &[f64], column: &str) -> CliResult<Table> {
    Table::new(vec![
        ("unit_id".into(), Column::Int((0..values.len() as i64).collect())),
        (column.into(), Column::Float(values.to_vec())),
    ])
    .stage("impute")
}

/// Read one outcome column, checking the row count against the experiment.
pub fn read_outcomes(path: &Path, column: &str, n_units: usize) -> CliResult<Vec<f64>> {
    let t = load_csv(path, &[ColumnSpec::float(column)]).stage("outcomes")?;
    let y = t.numeric(column).stage("outcomes")?;
    if y.len() != n_units {
        return Err(CliError::Stage {
            stage: "outcomes",
            source: longhorizon::Error::Data(format!(
                "{} has {} rows, the experiment has {n_units}",
                path.display(),
                y.len()
            )),
        });
    }
    Ok(y)
}

/// Train/test split of the experimental units.
pub fn split(cfg: &PipelineConfig, n_units: usize) -> CliResult<(Vec<usize>, Vec<usize>)> {
    train_test_split(n_units, cfg.evaluation.test_fraction, cfg.stage_seed("split")).stage("split")
}

/// Outcome model and classifier with their own covariate lists.
#[derive(Debug, Clone)]
pub struct FeaturePipeline {
    pub cfg: PipelineConfig,
    pub classifier: LearnerSpec,
}

impl FeaturePipeline {
    fn scores(&self, exp: &ExperimentalDataset, outcomes: &[f64], seed: u64) -> longhorizon::Result<longhorizon::policy::DrScoreMatrix<f64>> {
        let features = match &self.cfg.outcome_model.features {
            None => exp.features().clone(),
            Some(n) => exp.features().select(n)?,
        };
        let exp_mu = exp.with_features(features)?;
        let mu = fit_crossfit_outcome_model(&exp_mu, outcomes, &self.cfg.outcome_options(seed))?;
        dr_scores(exp, outcomes, mu.predictions())
    }

    fn policy_features(&self, exp: &ExperimentalDataset) -> longhorizon::Result<Table> {
        match &self.cfg.policy.features {
            None => Ok(exp.features().clone()),
            Some(n) => exp.features().select(n),
        }
    }
}

impl PolicyPipeline for FeaturePipeline {
    fn learn(&self, exp: &ExperimentalDataset, outcomes: &[f64], seed: u64) -> longhorizon::Result<Policy> {
        let scores = self.scores(exp, outcomes, seed)?;
        learn_policy(&scores, &self.policy_features(exp)?, &self.classifier)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnedPolicy {
    pub policy: Policy,
    /// Cross-validated classifier choice, when candidates were configured.
    pub selection: Option<PolicySelection>,
    pub n_train: usize,
}

/// DR scores on the training units, optional classifier selection, then the
/// policy fit.
pub fn learn_policy_stage(cfg: &PipelineConfig, experiment: &ExperimentalDataset, outcomes: &[f64]) -> CliResult<LearnedPolicy> {
    let (train, _) = split(cfg, experiment.n_units())?;
    let exp = experiment.take_rows(&train);
    let y: Vec<f64> = train.iter().map(|&i| outcomes[i]).collect();
    let seed = cfg.stage_seed("policy");
    let mut pipeline = FeaturePipeline {
        cfg: cfg.clone(),
        classifier: cfg.policy.classifier.clone(),
    };
    let selection = if cfg.policy.candidates.is_empty() {
        None
    } else {
        let scores = pipeline.scores(&exp, &y, seed).stage("policy")?;
        let features = pipeline.policy_features(&exp).stage("policy")?;
        let sel = select_policy_classifier(&scores, &features, &cfg.policy.candidates, cfg.policy.n_folds, seed)
            .stage("policy")?;
        pipeline.classifier = sel.best.clone();
        Some(sel)
    };
    let policy = pipeline.learn(&exp, &y, seed).stage("policy")?;
    Ok(LearnedPolicy {
        policy,
        selection,
        n_train: train.len(),
    })
}

/// Policy values known from the simulator, on the same units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueValues {
    pub target: f64,
    pub treat_none: f64,
    pub oracle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub units: String,
    pub n_units: usize,
    pub outcome_column: String,
    pub target: EvaluationReport,
    /// The status quo that treats no one.
    pub treat_none: EvaluationReport,
    /// `target.point - treat_none.point`.
    pub difference: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<TrueValues>,
    /// Intervals treat the outcome column as data.
    pub note: String,
}

/// Which units an evaluation runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalUnits {
    Test,
    All,
}

/// Value of `policy` and of treat-none, with bootstrap intervals.
///
/// For DR the outcome model is cross-fitted on the evaluation units and held
/// fixed across bootstrap replicates.
pub fn evaluate_stage(
    cfg: &PipelineConfig,
    inputs: &Inputs,
    outcomes: &[f64],
    outcome_column: &str,
    policy: &Policy,
    units: EvalUnits,
) -> CliResult<Evaluation> {
    let n = inputs.experiment.n_units();
    if outcomes.len() != n {
        return Err(CliError::Stage {
            stage: "evaluate",
            source: longhorizon::Error::Data(format!("{} outcomes for {n} units", outcomes.len())),
        });
    }
    let idx: Vec<usize> = match units {
        EvalUnits::Test => split(cfg, n)?.1,
        EvalUnits::All => (0..n).collect(),
    };
    let exp = inputs.experiment.take_rows(&idx);
    let y: Vec<f64> = idx.iter().map(|&i| outcomes[i]).collect();
    let k = exp.n_actions();
    let e = &cfg.evaluation;
    let seed = cfg.stage_seed("evaluate");
    let target = match &policy.model {
        longhorizon::policy::PolicyModel::Table { .. } if units == EvalUnits::Test => {
            let full = policy_assign(policy, inputs.experiment.features()).stage("evaluate")?;
            full.take_rows(&idx)
        }
        _ => policy_assign(policy, exp.features()).stage("evaluate")?,
    };
    let baseline = PolicySnapshot::constant(exp.n_units(), k, 0).stage("evaluate")?;
    let mu = match e.estimator {
        EstimatorKind::Dr => {
            let features = match &cfg.outcome_model.features {
                None => exp.features().clone(),
                Some(f) => exp.features().select(f).stage("evaluate")?,
            };
            let exp_mu = exp.with_features(features).stage("evaluate")?;
            let m = fit_crossfit_outcome_model(&exp_mu, &y, &cfg.outcome_options(derive(seed, "outcome"))).stage("evaluate")?;
            Some(m.predictions().clone())
        }
        _ => None,
    };
    let boot = |snap: &PolicySnapshot<f64>, name: &str| {
        bootstrap_ci(e.estimator, &exp, &y, snap, mu.as_ref(), e.replicates, e.level, derive(seed, name))
            .map(|b| b.report())
            .stage("evaluate")
    };
    let target_report = boot(&target, "target")?;
    let base_report = boot(&baseline, "treat_none")?;
    let truth = match &inputs.sim {
        Some(sim) => Some(TrueValues {
            target: true_policy_value_on(sim, &idx, &target).stage("evaluate")?,
            treat_none: true_policy_value_on(sim, &idx, &baseline).stage("evaluate")?,
            oracle: {
                let oracle = PolicySnapshot::<f64>::deterministic(&idx.iter().map(|&i| sim.oracle_policy[i]).collect::<Vec<_>>(), k)
                    .stage("evaluate")?;
                true_policy_value_on(sim, &idx, &oracle).stage("evaluate")?
            },
        }),
        None => None,
    };
    Ok(Evaluation {
        units: match units {
            EvalUnits::Test => "test".into(),
            EvalUnits::All => "all".into(),
        },
        n_units: idx.len(),
        outcome_column: outcome_column.into(),
        difference: target_report.point - base_report.point,
        target: target_report,
        treat_none: base_report,
        truth,
        note: "bootstrap intervals hold the outcome column fixed; surrogate-model error is not propagated".into(),
    })
}

fn derive(seed: u64, name: &str) -> u64 {
    longhorizon::rng::derive_named_seed(seed, name)
}

/// BTS over all experimental units with the configured pipeline.
pub fn bts_stage(cfg: &PipelineConfig, experiment: &ExperimentalDataset, outcomes: &[f64], classifier: &LearnerSpec) -> CliResult<BtsResult> {
    let pipeline = FeaturePipeline {
        cfg: cfg.clone(),
        classifier: classifier.clone(),
    };
    bts_policy(experiment, outcomes, &pipeline, &cfg.bts_config()).stage("bts")
}

pub fn write_bts(out: &mut OutputDir, cfg: &PipelineConfig, result: &BtsResult) -> CliResult<()> {
    let seed = derive(cfg.stage_seed("bts"), "sample");
    let sampled = sample_actions(&result.snapshot, seed);
    out.write_with("bts", "bts_assignment.csv", |p| write_assignment_csv(&result.snapshot, &sampled, seed, p))?;
    Ok(())
}

/// The whole loop: data, surrogate index, imputation, policy, evaluation,
/// BTS assignment. Writes every artifact plus `manifest.json` into `out`.
pub fn run_pipeline(cfg: &PipelineConfig, out_dir: &Path) -> CliResult<RunManifest> {
    cfg.validate()?;
    let mut out = OutputDir::create(out_dir)?;
    let inputs = out.timed("data", |_| load_inputs(cfg))?;
    let model = out.timed("surrogate", |o| {
        let m = fit_surrogate(cfg, &inputs)?;
        o.write_with("surrogate", "surrogate_model.json", |p| m.save(p))?;
        Ok(m)
    })?;
    let y_tilde = out.timed("impute", |o| {
        let y = impute_outcomes(&model, &inputs.experiment)?;
        let t = outcome_table(&y, IMPUTED_COLUMN)?;
        o.write_with("impute", "imputed.csv", |p| longhorizon::data::write_csv(&t, p))?;
        Ok(y)
    })?;
    let learned = out.timed("policy", |o| {
        let l = learn_policy_stage(cfg, &inputs.experiment, &y_tilde)?;
        o.write_with("policy", "policy.json", |p| l.policy.save(p))?;
        if let Some(sel) = &l.selection {
            o.write_json("policy", "policy_selection.json", sel)?;
        }
        Ok(l)
    })?;
    out.timed("evaluate", |o| {
        let ev = evaluate_stage(cfg, &inputs, &y_tilde, IMPUTED_COLUMN, &learned.policy, EvalUnits::Test)?;
        o.write_json("evaluate", "evaluation.json", &ev)?;
        Ok(())
    })?;
    let classifier = learned.selection.as_ref().map_or(&cfg.policy.classifier, |s| &s.best);
    out.timed("bts", |o| {
        let r = bts_stage(cfg, &inputs.experiment, &y_tilde, classifier)?;
        write_bts(o, cfg, &r)
    })?;
    out.finish("run", cfg.hash(), cfg.seed)
}
