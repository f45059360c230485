use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::data::{check_same_columns, ColumnSpec, ExperimentalDataset, HistoricalDataset, Table};
use crate::error::{Error, Result};
use crate::learners::{fit_regressor, read_text, select_regressor, write_text, FittedRegressor, LearnerSpec};

pub const SURROGATE_FORMAT_VERSION: u32 = 1;

/// Optional cross-validated choice of the surrogate learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningOptions {
    pub grid: Vec<LearnerSpec>,
    pub n_folds: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateOptions {
    /// Condition on covariates as well as surrogates (the default). Turning
    /// this off gives an S-only index for surrogate-set comparisons.
    pub include_covariates: bool,
    #[serde(default)]
    pub tuning: Option<TuningOptions>,
}

impl Default for SurrogateOptions {
    fn default() -> Self {
        Self {
            include_covariates: true,
            tuning: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateModel {
    pub format_version: u32,
    pub regressor: FittedRegressor,
    pub surrogate_columns: Vec<ColumnSpec>,
    /// Empty when the index is S-only.
    pub covariate_columns: Vec<ColumnSpec>,
    pub n_train: usize,
    pub r2_in_sample: f64,
}

fn design(surrogates: &Table, covariates: Option<&Table>) -> Result<Table> {
    match covariates {
        None => Ok(surrogates.clone()),
        Some(x) => {
            let clash: Vec<&String> = surrogates.names().iter().filter(|n| x.position(n).is_some()).collect();
            if !clash.is_empty() {
                return Err(Error::schema(format!(
                    "surrogate and covariate columns share names: {clash:?}"
                )));
            }
            surrogates.hstack(x)
        }
    }
}

pub(crate) fn r_squared(y: &[f64], fitted: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let sst: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    if sst <= 0.0 {
        return 1.0;
    }
    let ssr: f64 = y.iter().zip(fitted).map(|(a, b)| (a - b) * (a - b)).sum();
    (1.0 - ssr / sst).clamp(0.0, 1.0)
}

/// Regress historical `Y` on `(S, X)` (or `S` alone).
pub fn fit_surrogate_index(
    historical: &HistoricalDataset,
    spec: &LearnerSpec,
    options: &SurrogateOptions,
) -> Result<SurrogateModel> {
    if historical.n_units() == 0 {
        return Err(Error::arg("historical dataset is empty"));
    }
    if historical.surrogates().n_cols() == 0 {
        return Err(Error::arg("no surrogate columns declared"));
    }
    let covariates = options.include_covariates.then(|| historical.features());
    let table = design(historical.surrogates(), covariates)?;
    let y = historical.outcomes();
    let first = y[0];
    if y.iter().all(|v| *v == first) {
        warn!("historical outcome has zero variance; the surrogate index is constant");
    }
    let chosen = match &options.tuning {
        Some(t) if !t.grid.is_empty() => {
            let mut grid = t.grid.clone();
            if !grid.contains(spec) {
                grid.push(spec.clone());
            }
            select_regressor(&grid, &table, y, None, t.n_folds, t.seed)?.best
        }
        _ => spec.clone(),
    };
    let regressor = fit_regressor(&chosen, &table, y, None)?;
    let fitted = regressor.predict(&table)?;
    Ok(SurrogateModel {
        format_version: SURROGATE_FORMAT_VERSION,
        r2_in_sample: r_squared(y, &fitted),
        regressor,
        surrogate_columns: historical.surrogates().schema(),
        covariate_columns: covariates.map(Table::schema).unwrap_or_default(),
        n_train: historical.n_units(),
    })
}

/// Imputed long-term outcome for every experimental unit.
pub fn impute(model: &SurrogateModel, experiment: &ExperimentalDataset) -> Result<Vec<f64>> {
    impute_tables(model, experiment.surrogates(), experiment.features())
}

/// [`impute`] on bare surrogate and covariate tables.
pub fn impute_tables(model: &SurrogateModel, surrogates: &Table, features: &Table) -> Result<Vec<f64>> {
    check_same_columns("surrogate", &model.surrogate_columns, &surrogates.schema())?;
    let table = if model.covariate_columns.is_empty() {
        surrogates.clone()
    } else {
        let names: Vec<&str> = model.covariate_columns.iter().map(|c| c.name.as_str()).collect();
        let missing: Vec<&&str> = names.iter().filter(|n| features.position(n).is_none()).collect();
        if !missing.is_empty() {
            return Err(Error::schema(format!("covariate schema mismatch: missing {missing:?}")));
        }
        let x = features.select(&names)?;
        check_same_columns("covariate", &model.covariate_columns, &x.schema())?;
        design(surrogates, Some(&x))?
    };
    model.regressor.predict(&table)
}

impl SurrogateModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)?;
        if m.format_version != SURROGATE_FORMAT_VERSION {
            return Err(Error::schema(format!(
                "unsupported surrogate model format_version {}",
                m.format_version
            )));
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_text(path.as_ref(), &self.to_json()?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&read_text(path.as_ref())?)
    }
}
