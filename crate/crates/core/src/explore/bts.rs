use std::io::Write;
use std::path::Path;

use log::warn;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::clip::clip_probabilities;
use crate::data::{propensity_column, ExperimentalDataset};
use crate::error::{Error, Result};
use crate::learners::LearnerSpec;
use crate::ope::{fit_crossfit_outcome_model, OutcomeModelOptions, PolicySnapshot};
use crate::policy::{dr_scores, learn_policy_binary, learn_policy_multi, Policy};
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BtsConfig {
    pub replicates: usize,
    pub floor: f64,
    pub ceiling: f64,
    pub seed: u64,
}

impl BtsConfig {
    pub fn validate(&self, n_actions: usize) -> Result<()> {
        if self.replicates < 1 {
            return Err(Error::arg("BTS needs at least one replicate"));
        }
        if !(self.floor >= 0.0 && self.floor < self.ceiling && self.ceiling <= 1.0) {
            return Err(Error::arg(format!(
                "need 0 <= floor < ceiling <= 1, got {} and {}",
                self.floor, self.ceiling
            )));
        }
        let k = n_actions as f64;
        if k * self.floor > 1.0 + 1e-12 || k * self.ceiling < 1.0 - 1e-12 {
            return Err(Error::arg(format!("floor/ceiling infeasible for {n_actions} actions")));
        }
        Ok(())
    }
}

/// The full "scores then policy" procedure run on each bootstrap replicate.
pub trait PolicyPipeline: Sync {
    fn learn(&self, exp: &ExperimentalDataset, outcomes: &[f64], seed: u64) -> Result<Policy>;
}

/// Cross-fitted outcome model, DR scores, then weighted classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrPolicyPipeline {
    pub outcome: OutcomeModelOptions,
    pub classifier: LearnerSpec,
}

impl PolicyPipeline for DrPolicyPipeline {
    fn learn(&self, exp: &ExperimentalDataset, outcomes: &[f64], seed: u64) -> Result<Policy> {
        let opts = OutcomeModelOptions {
            seed,
            ..self.outcome.clone()
        };
        let mu = fit_crossfit_outcome_model(exp, outcomes, &opts)?;
        let scores = dr_scores(exp, outcomes, mu.predictions())?;
        if exp.n_actions() == 2 {
            learn_policy_binary(&scores, exp.features(), &self.classifier)
        } else {
            learn_policy_multi(&scores, exp.features(), &self.classifier)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BtsResult {
    /// Clipped assignment probabilities.
    pub snapshot: PolicySnapshot<f64>,
    /// Win counts per unit and action over the kept replicates.
    pub tallies: Vec<Vec<usize>>,
    /// `tallies / kept`, before clipping.
    pub raw: Vec<Vec<f64>>,
    pub kept_replicates: usize,
    pub dropped_replicates: usize,
}

/// Turn per-unit win counts into clipped probabilities.
pub fn bts_from_tallies(tallies: &[Vec<usize>], floor: f64, ceiling: f64) -> Result<(Vec<Vec<f64>>, PolicySnapshot<f64>)> {
    let mut raw = Vec::with_capacity(tallies.len());
    let mut clipped = Vec::with_capacity(tallies.len());
    for (i, t) in tallies.iter().enumerate() {
        let r: usize = t.iter().sum();
        if r == 0 {
            return Err(Error::arg(format!("unit {i} has no replicate votes")));
        }
        let p: Vec<f64> = t.iter().map(|&c| c as f64 / r as f64).collect();
        clipped.push(clip_probabilities(&p, floor, ceiling)?);
        raw.push(p);
    }
    Ok((raw, PolicySnapshot::stochastic(clipped)?))
}

/// Bootstrap Thompson sampling: refit the pipeline on `R` unit-resampled
/// replicates, count how often each action is chosen for each original unit,
/// and clip the resulting shares. Replicates that fail are dropped.
pub fn bts_policy<P: PolicyPipeline + ?Sized>(
    exp: &ExperimentalDataset,
    outcomes: &[f64],
    pipeline: &P,
    cfg: &BtsConfig,
) -> Result<BtsResult> {
    let k = exp.n_actions();
    cfg.validate(k)?;
    let n = exp.n_units();
    if outcomes.len() != n {
        return Err(Error::arg(format!("{} outcomes for {n} units", outcomes.len())));
    }
    let runs: Vec<Option<Vec<usize>>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let seed = derive_seed(cfg.seed, r as u64);
            let mut rng = rng_from_seed(seed);
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let boot = exp.take_rows(&idx);
            let y: Vec<f64> = idx.iter().map(|&i| outcomes[i]).collect();
            let fitted = pipeline
                .learn(&boot, &y, derive_seed(seed, 1))
                .and_then(|p| p.actions(exp.features()));
            match fitted {
                Ok(a) => Some(a),
                Err(e) => {
                    warn!("BTS replicate {r} dropped: {e}");
                    None
                }
            }
        })
        .collect();
    let mut tallies = vec![vec![0usize; k]; n];
    let mut kept = 0;
    for actions in runs.iter().flatten() {
        kept += 1;
        for (i, &a) in actions.iter().enumerate() {
            tallies[i][a] += 1;
        }
    }
    if kept == 0 {
        return Err(Error::Numeric("every BTS replicate failed".into()));
    }
    let (raw, snapshot) = bts_from_tallies(&tallies, cfg.floor, cfg.ceiling)?;
    Ok(BtsResult {
        snapshot,
        tallies,
        raw,
        kept_replicates: kept,
        dropped_replicates: cfg.replicates - kept,
    })
}

/// Draw one action per unit from the snapshot rows.
pub fn sample_actions(snapshot: &PolicySnapshot<f64>, seed: u64) -> Vec<usize> {
    let mut rng = rng_from_seed(seed);
    (0..snapshot.n_units())
        .map(|i| {
            let u: f64 = rng.random();
            let row = snapshot.row(i);
            let mut acc = 0.0;
            for (a, p) in row.iter().enumerate() {
                acc += p;
                if u < acc {
                    return a;
                }
            }
            row.iter().rposition(|p| *p > 0.0).unwrap_or(0)
        })
        .collect()
}

/// CSV with `unit_id, p0..p{K-1}, sampled_action, seed`.
pub fn write_assignment_csv_to<W: Write>(snapshot: &PolicySnapshot<f64>, sampled: &[usize], seed: u64, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["unit_id".to_string()];
    header.extend((0..snapshot.n_actions()).map(propensity_column));
    header.push("sampled_action".into());
    header.push("seed".into());
    w.write_record(&header)?;
    for i in 0..snapshot.n_units() {
        let mut rec = vec![i.to_string()];
        rec.extend(snapshot.row(i).iter().map(|p| format!("{p:?}")));
        rec.push(sampled[i].to_string());
        rec.push(seed.to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: "<csv writer>".into(),
        source: e,
    })
}

pub fn write_assignment_csv(snapshot: &PolicySnapshot<f64>, sampled: &[usize], seed: u64, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_assignment_csv_to(snapshot, sampled, seed, f)
}
