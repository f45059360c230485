//! The pipeline configuration document.
//!
//! One JSON file drives every subcommand. Stage seeds derive from the master
//! `seed` by name (`derive_named_seed(seed, "<stage>")`), so a config plus a
//! seed fixes every number the pipeline emits. For simulated data the
//! generator seed is the `"simulate"` stage seed; the `seed` field inside the
//! simulator block is ignored.

use std::path::{Path, PathBuf};

use longhorizon::explore::BtsConfig;
use longhorizon::learners::LearnerSpec;
use longhorizon::ope::{EstimatorKind, OutcomeModelOptions};
use longhorizon::rng::derive_named_seed;
use longhorizon::sim::{Assignment, DgpConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    /// Default output directory when `--out` is not given.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Required by every stage except `power`.
    #[serde(default)]
    pub data: Option<DataSource>,
    #[serde(default)]
    pub surrogate: SurrogateStage,
    #[serde(default)]
    pub outcome_model: OutcomeStage,
    #[serde(default)]
    pub policy: PolicyStage,
    #[serde(default)]
    pub evaluation: EvaluationStage,
    #[serde(default)]
    pub bts: BtsStage,
    #[serde(default)]
    pub power: PowerStage,
    #[serde(default)]
    pub validation: ValidationStage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Simulate(DgpConfig),
    Files(DataFiles),
}

/// Paths are resolved against the working directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataFiles {
    pub experimental: PathBuf,
    pub historical: PathBuf,
    /// JSON dataset schema (feature, surrogate, action and outcome columns).
    pub schema: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurrogateStage {
    #[serde(default = "default_surrogate_spec")]
    pub spec: LearnerSpec,
    /// Subset of surrogate columns to use; all when unset.
    #[serde(default)]
    pub columns: Option<Vec<String>>,
    #[serde(default = "yes")]
    pub include_covariates: bool,
    /// Candidate learners for cross-validated selection.
    #[serde(default)]
    pub grid: Vec<LearnerSpec>,
    #[serde(default = "three")]
    pub n_folds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeStage {
    #[serde(default = "default_outcome_spec")]
    pub spec: LearnerSpec,
    #[serde(default = "three")]
    pub n_folds: usize,
    #[serde(default = "yes")]
    pub interactions: bool,
    /// Covariates the outcome model sees; all when unset.
    #[serde(default)]
    pub features: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyStage {
    #[serde(default = "default_classifier")]
    pub classifier: LearnerSpec,
    /// When non-empty, the classifier is chosen from these by
    /// cross-validated policy value.
    #[serde(default)]
    pub candidates: Vec<LearnerSpec>,
    #[serde(default = "three")]
    pub n_folds: usize,
    /// Covariates the classifier sees; all when unset.
    #[serde(default)]
    pub features: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationStage {
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default = "default_estimator")]
    pub estimator: EstimatorKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BtsStage {
    #[serde(default = "default_bts_replicates")]
    pub replicates: usize,
    #[serde(default = "default_floor")]
    pub floor: f64,
    #[serde(default = "default_ceiling")]
    pub ceiling: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerStage {
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default = "default_taus")]
    pub taus: Vec<f64>,
    #[serde(default = "default_power_reps")]
    pub n_reps: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_assignment")]
    pub assignment: Assignment,
    /// Size of the synthetic subscriber base.
    #[serde(default = "default_population")]
    pub population: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationStage {
    /// Surrogate horizons (months of revenue); every month when empty.
    #[serde(default)]
    pub horizons: Vec<usize>,
}

fn yes() -> bool {
    true
}
fn three() -> usize {
    3
}
fn default_surrogate_spec() -> LearnerSpec {
    LearnerSpec::ridge(0.0)
}
fn default_outcome_spec() -> LearnerSpec {
    LearnerSpec::ridge(1.0)
}
fn default_classifier() -> LearnerSpec {
    LearnerSpec::CartTree {
        max_depth: 3,
        min_samples_leaf: 50,
    }
}
fn default_test_fraction() -> f64 {
    0.2
}
fn default_replicates() -> usize {
    200
}
fn default_level() -> f64 {
    0.95
}
fn default_estimator() -> EstimatorKind {
    EstimatorKind::Dr
}
fn default_bts_replicates() -> usize {
    50
}
fn default_floor() -> f64 {
    0.05
}
fn default_ceiling() -> f64 {
    0.95
}
fn default_q() -> f64 {
    0.01
}
fn default_taus() -> Vec<f64> {
    vec![0.0, 0.05, 0.1, 0.2, 0.3, 0.5, 1.0]
}
fn default_power_reps() -> usize {
    100
}
fn default_alpha() -> f64 {
    0.05
}
fn default_assignment() -> Assignment {
    Assignment::Design
}
fn default_population() -> usize {
    100_000
}

macro_rules! defaults_from_serde {
    ($($t:ty),*) => {$(
        impl Default for $t {
            fn default() -> Self {
                serde_json::from_str("{}").expect("every field has a default")
            }
        }
    )*};
}

defaults_from_serde!(SurrogateStage, OutcomeStage, PolicyStage, EvaluationStage, BtsStage, PowerStage, ValidationStage);

impl PipelineConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Hex SHA-256 of the canonical JSON form of the config.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&json);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn stage_seed(&self, stage: &str) -> u64 {
        derive_named_seed(self.seed, stage)
    }

    /// The simulator config with its seed taken from the master seed.
    pub fn dgp(&self) -> Option<DgpConfig> {
        match &self.data {
            Some(DataSource::Simulate(d)) => Some(DgpConfig {
                seed: self.stage_seed("simulate"),
                ..d.clone()
            }),
            _ => None,
        }
    }

    pub fn data(&self) -> CliResult<&DataSource> {
        self.data
            .as_ref()
            .ok_or_else(|| CliError::config("this command needs a `data` section in the config"))
    }

    pub fn outcome_options(&self, seed: u64) -> OutcomeModelOptions {
        OutcomeModelOptions {
            spec: self.outcome_model.spec.clone(),
            n_folds: self.outcome_model.n_folds,
            interactions: self.outcome_model.interactions,
            seed,
        }
    }

    pub fn bts_config(&self) -> BtsConfig {
        BtsConfig {
            replicates: self.bts.replicates,
            floor: self.bts.floor,
            ceiling: self.bts.ceiling,
            seed: self.stage_seed("bts"),
        }
    }

    /// Checks that need no data. Referenced files must exist.
    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::config(m));
        match &self.data {
            None => {}
            Some(DataSource::Simulate(d)) => d.validate().map_err(|e| CliError::config(e.to_string()))?,
            Some(DataSource::Files(f)) => {
                for p in [&f.experimental, &f.historical, &f.schema] {
                    if !p.exists() {
                        return bad(format!("data file not found: {}", p.display()));
                    }
                }
            }
        }
        let specs = [&self.surrogate.spec, &self.outcome_model.spec, &self.policy.classifier];
        for s in specs.into_iter().chain(&self.surrogate.grid).chain(&self.policy.candidates) {
            s.validate().map_err(|e| CliError::config(e.to_string()))?;
        }
        let e = &self.evaluation;
        if !(e.test_fraction > 0.0 && e.test_fraction < 1.0) {
            return bad(format!("evaluation.test_fraction must be in (0, 1), got {}", e.test_fraction));
        }
        if !(e.level > 0.0 && e.level < 1.0) {
            return bad(format!("evaluation.level must be in (0, 1), got {}", e.level));
        }
        if e.replicates == 0 || self.bts.replicates == 0 {
            return bad("replicate counts must be positive".into());
        }
        if self.outcome_model.n_folds < 2 || self.policy.n_folds < 2 || self.surrogate.n_folds < 2 {
            return bad("fold counts must be at least 2".into());
        }
        if !(self.bts.floor >= 0.0 && self.bts.floor < self.bts.ceiling && self.bts.ceiling <= 1.0) {
            return bad("bts needs 0 <= floor < ceiling <= 1".into());
        }
        let p = &self.power;
        if !(p.q > 0.0 && p.q < 1.0) || !(p.alpha > 0.0 && p.alpha < 1.0) {
            return bad("power.q and power.alpha must lie in (0, 1)".into());
        }
        if p.n_reps == 0 || p.population < 2 {
            return bad("power needs positive n_reps and a population of at least 2".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = PipelineConfig::from_json(r#"{"data": {"simulate": {"n_units": 100, "n_historical": 100,
            "k_actions": 2, "dim_x": 3, "n_periods": 4, "promo_periods": 2, "promo_cost": 0.5,
            "effect_profile": {"type": "bimodal_gap", "min_gap": 1.0}, "surrogacy_violation": 0.0,
            "confounder_strength": 0.3, "comparability_drift": 0.0,
            "noise": {"consumption": 0.3, "revenue": 0.5}, "design": "uniform", "seed": 0}}}"#)
        .unwrap();
        assert_eq!(c.evaluation.replicates, 200);
        assert_eq!(c.bts.floor, 0.05);
        c.validate().unwrap();
        assert_eq!(c.hash().len(), 64);
        let mut d = c.clone();
        d.seed = 1;
        assert_ne!(c.hash(), d.hash());
    }

    #[test]
    fn unknown_fields_and_bad_values_are_config_errors() {
        assert!(PipelineConfig::from_json(r#"{"data": {"files": {"experimental": "a", "historical": "b", "schema": "c"}}, "bogus": 1}"#).is_err());
        let c = PipelineConfig::from_json(r#"{"data": {"files": {"experimental": "/nonexistent/a.csv", "historical": "b", "schema": "c"}}}"#).unwrap();
        let err = c.validate().unwrap_err();
        assert_eq!(err.exit_code(), crate::error::EXIT_CONFIG);
        assert!(err.to_string().contains("/nonexistent/a.csv"));
    }
}
