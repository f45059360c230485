//! Held-out comparison of policies learned from the surrogate index, the
//! true outcome and a raw short-term proxy, across surrogate horizons.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::DgpConfig;
use super::generate::{generate, true_policy_value_on, SimData};
use crate::data::{train_test_split, ExperimentalDataset, HistoricalDataset};
use crate::error::{Error, Result};
use crate::explore::{DrPolicyPipeline, PolicyPipeline};
use crate::learners::LearnerSpec;
use crate::ope::{estimate_ate_att, fit_crossfit_outcome_model, percentile, Estimand, OutcomeModelOptions, PolicySnapshot};
use crate::policy::Policy;
use crate::rng::{derive_named_seed, derive_seed, rng_from_seed};
use crate::surrogate::{fit_surrogate_index, impute, SurrogateOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationOptions {
    pub surrogate: LearnerSpec,
    pub outcome: OutcomeModelOptions,
    pub classifier: LearnerSpec,
    pub test_fraction: f64,
    pub bootstrap_replicates: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            surrogate: LearnerSpec::ridge(0.0),
            outcome: OutcomeModelOptions::new(LearnerSpec::ridge(1.0), 3, 0),
            classifier: LearnerSpec::CartTree {
                max_depth: 3,
                min_samples_leaf: 100,
            },
            test_fraction: 0.2,
            bootstrap_replicates: 200,
            level: 0.95,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub point: f64,
    pub low: f64,
    pub high: f64,
}

impl Interval {
    pub fn contains(&self, v: f64) -> bool {
        self.low <= v && v <= self.high
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        self.low <= other.high && other.low <= self.high
    }
}

/// ATT of `action` against control, on the index and on the true outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttComparison {
    pub action: usize,
    pub index: Interval,
    pub truth: Interval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateSet {
    Consumption,
    Revenue,
    Both,
}

impl SurrogateSet {
    pub const ALL: [SurrogateSet; 3] = [SurrogateSet::Consumption, SurrogateSet::Revenue, SurrogateSet::Both];

    pub fn name(self) -> &'static str {
        match self {
            SurrogateSet::Consumption => "consumption",
            SurrogateSet::Revenue => "revenue",
            SurrogateSet::Both => "both",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateSetRow {
    pub set: SurrogateSet,
    /// ATT of the strongest action on the index (point estimate).
    pub att_index: f64,
    pub att_truth: f64,
    /// True held-out value of the policy learned from this index.
    pub policy_value: f64,
    pub agreement_with_outcome_policy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonReport {
    pub horizon: usize,
    pub att: Vec<AttComparison>,
    /// True held-out values. The status quo treats no one.
    pub value_status_quo: f64,
    pub value_index_policy: f64,
    pub value_proxy_policy: f64,
    pub value_outcome_policy: f64,
    /// `value_index_policy - value_outcome_policy`.
    pub value_difference: f64,
    /// Doubly-robust estimate of the same difference on the held-out units,
    /// from realized outcomes, with a percentile bootstrap interval.
    pub value_difference_dr: Interval,
    pub agreement_rate: f64,
    pub surrogate_sets: Vec<SurrogateSetRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub n_train: usize,
    pub n_test: usize,
    pub value_oracle_policy: f64,
    pub horizons: Vec<HorizonReport>,
}

/// Generate data from `cfg` and run [`validation_on`] with default options.
pub fn validation_experiment(cfg: &DgpConfig, horizons: &[usize]) -> Result<ValidationReport> {
    let sim = generate(cfg)?;
    let opts = ValidationOptions {
        seed: derive_named_seed(cfg.seed, "validation"),
        ..ValidationOptions::default()
    };
    validation_on(&sim, horizons, &opts)
}

/// Percentile bootstrap of a statistic of resampled unit indices.
fn bootstrap_interval<F>(n: usize, b: usize, level: f64, seed: u64, point: f64, stat: F) -> Result<Interval>
where
    F: Fn(&[usize]) -> Result<f64> + Sync,
{
    let mut reps: Vec<f64> = (0..b)
        .into_par_iter()
        .filter_map(|r| {
            let mut rng = rng_from_seed(derive_seed(seed, r as u64));
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            stat(&idx).ok()
        })
        .collect();
    if reps.is_empty() {
        return Err(Error::Numeric("every bootstrap replicate failed".into()));
    }
    reps.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    Ok(Interval {
        point,
        low: percentile(&reps, alpha).min(point),
        high: percentile(&reps, 1.0 - alpha).max(point),
    })
}

fn att_interval(exp: &ExperimentalDataset, y: &[f64], a: usize, opts: &ValidationOptions, seed: u64) -> Result<Interval> {
    let point = estimate_ate_att(exp, y, (a, 0), Estimand::Att)?.point;
    bootstrap_interval(exp.n_units(), opts.bootstrap_replicates, opts.level, seed, point, |idx| {
        let yb: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
        Ok(estimate_ate_att(&exp.take_rows(idx), &yb, (a, 0), Estimand::Att)?.point)
    })
}

fn restrict(sim: &SimData, names: &[String]) -> Result<(ExperimentalDataset, HistoricalDataset)> {
    let exp = sim.experiment.with_surrogates(sim.experiment.surrogates().select(names)?)?;
    let hist = sim.historical.with_surrogates(sim.historical.surrogates().select(names)?)?;
    Ok((exp, hist))
}

fn index_outcomes(sim: &SimData, names: &[String], spec: &LearnerSpec) -> Result<(ExperimentalDataset, Vec<f64>)> {
    let (exp, hist) = restrict(sim, names)?;
    let model = fit_surrogate_index(&hist, spec, &SurrogateOptions::default())?;
    let y = impute(&model, &exp)?;
    Ok((exp, y))
}

struct Split<'a> {
    sim: &'a SimData,
    train: Vec<usize>,
    test: Vec<usize>,
    train_exp: ExperimentalDataset,
    pipeline: DrPolicyPipeline,
    seed: u64,
}

impl Split<'_> {
    fn learn(&self, y: &[f64]) -> Result<Policy> {
        let yt: Vec<f64> = self.train.iter().map(|&i| y[i]).collect();
        self.pipeline.learn(&self.train_exp, &yt, self.seed)
    }

    /// Actions of `policy` on the test units and their true value.
    fn evaluate(&self, policy: &Policy) -> Result<(Vec<usize>, f64)> {
        let x = self.sim.experiment.features().take_rows(&self.test);
        let actions = policy.actions(&x)?;
        let snap = PolicySnapshot::<f64>::deterministic(&actions, self.sim.config().k_actions)?;
        let v = true_policy_value_on(self.sim, &self.test, &snap)?;
        Ok((actions, v))
    }
}

fn agreement(a: &[usize], b: &[usize]) -> f64 {
    a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / a.len() as f64
}

/// Run the horizon sweep on an existing simulation.
///
/// Policies are learned on a training split with the same pipeline and seed
/// for every outcome column, so any difference between them comes from the
/// outcome alone. Values are oracle values on the held-out split.
pub fn validation_on(sim: &SimData, horizons: &[usize], opts: &ValidationOptions) -> Result<ValidationReport> {
    if horizons.is_empty() {
        return Err(Error::arg("no horizons requested"));
    }
    for &h in horizons {
        sim.horizon_columns(h)?;
    }
    let k = sim.config().k_actions;
    let n = sim.n_units();
    let (train, test) = train_test_split(n, opts.test_fraction, derive_named_seed(opts.seed, "split"))?;
    let split = Split {
        sim,
        train_exp: sim.experiment.take_rows(&train),
        train,
        test,
        pipeline: DrPolicyPipeline {
            outcome: opts.outcome.clone(),
            classifier: opts.classifier.clone(),
        },
        seed: derive_named_seed(opts.seed, "policy"),
    };
    let none = PolicySnapshot::<f64>::constant(split.test.len(), k, 0)?;
    let value_status_quo = true_policy_value_on(sim, &split.test, &none)?;
    let oracle: Vec<usize> = split.test.iter().map(|&i| sim.oracle_policy[i]).collect();
    let value_oracle_policy = true_policy_value_on(sim, &split.test, &PolicySnapshot::<f64>::deterministic(&oracle, k)?)?;

    let outcome_policy = split.learn(&sim.outcomes)?;
    let (outcome_actions, value_outcome_policy) = split.evaluate(&outcome_policy)?;

    let test_exp = sim.experiment.take_rows(&split.test);
    let test_y: Vec<f64> = split.test.iter().map(|&i| sim.outcomes[i]).collect();
    let mu_opts = OutcomeModelOptions {
        seed: derive_named_seed(opts.seed, "evaluation"),
        ..opts.outcome.clone()
    };
    let mu = fit_crossfit_outcome_model(&test_exp, &test_y, &mu_opts)?;

    let mut reports = Vec::with_capacity(horizons.len());
    for &h in horizons {
        let hseed = derive_seed(opts.seed, h as u64);
        let names = sim.horizon_columns(h)?;
        let (exp_h, y_index) = index_outcomes(sim, &names, &opts.surrogate)?;

        let att = (1..k)
            .map(|a| {
                Ok(AttComparison {
                    action: a,
                    index: att_interval(&exp_h, &y_index, a, opts, derive_seed(hseed, 2 * a as u64))?,
                    truth: att_interval(&exp_h, &sim.outcomes, a, opts, derive_seed(hseed, 2 * a as u64 + 1))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let (index_actions, value_index_policy) = split.evaluate(&split.learn(&y_index)?)?;
        let proxy = sim.proxy_outcome(h)?;
        let (_, value_proxy_policy) = split.evaluate(&split.learn(&proxy)?)?;

        // Per-unit DR contributions to V(index policy) - V(outcome policy).
        let diff: Vec<f64> = (0..split.test.len())
            .map(|j| {
                let (ai, ao) = (index_actions[j], outcome_actions[j]);
                let obs = test_exp.actions()[j];
                let p = test_exp.propensity(j, obs);
                let m = mu.predictions();
                let resid = (test_y[j] - m.get(j, obs)) / p;
                let direct = m.get(j, ai) - m.get(j, ao);
                let wi = f64::from(u8::from(obs == ai));
                let wo = f64::from(u8::from(obs == ao));
                direct + (wi - wo) * resid
            })
            .collect();
        let mean = |idx: &[usize]| idx.iter().map(|&i| diff[i]).sum::<f64>() / idx.len() as f64;
        let all: Vec<usize> = (0..diff.len()).collect();
        let value_difference_dr = bootstrap_interval(
            diff.len(),
            opts.bootstrap_replicates,
            opts.level,
            derive_seed(hseed, 1_000),
            mean(&all),
            |idx| Ok(mean(idx)),
        )?;

        let mut surrogate_sets = Vec::with_capacity(3);
        for set in SurrogateSet::ALL {
            let cols: Vec<String> = match set {
                SurrogateSet::Consumption => names[..1].to_vec(),
                SurrogateSet::Revenue => names[1..].to_vec(),
                SurrogateSet::Both => names.clone(),
            };
            let (exp_s, y_s) = index_outcomes(sim, &cols, &opts.surrogate)?;
            let top = k - 1;
            let (actions, policy_value) = split.evaluate(&split.learn(&y_s)?)?;
            surrogate_sets.push(SurrogateSetRow {
                set,
                att_index: estimate_ate_att(&exp_s, &y_s, (top, 0), Estimand::Att)?.point,
                att_truth: estimate_ate_att(&exp_s, &sim.outcomes, (top, 0), Estimand::Att)?.point,
                policy_value,
                agreement_with_outcome_policy: agreement(&actions, &outcome_actions),
            });
        }

        reports.push(HorizonReport {
            horizon: h,
            att,
            value_status_quo,
            value_index_policy,
            value_proxy_policy,
            value_outcome_policy,
            value_difference: value_index_policy - value_outcome_policy,
            value_difference_dr,
            agreement_rate: agreement(&index_actions, &outcome_actions),
            surrogate_sets,
        });
    }
    Ok(ValidationReport {
        n_train: split.train.len(),
        n_test: split.test.len(),
        value_oracle_policy,
        horizons: reports,
    })
}
