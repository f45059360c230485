use std::path::Path;

use serde::{Deserialize, Serialize};

use super::csv_io::{load_csv, write_csv};
use super::table::{Column, ColumnSpec, Table};
use crate::error::{Error, Result};

/// Experimental data: covariates, assigned action, surrogates and the design
/// probabilities of every action for every unit.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentalDataset {
    features: Table,
    actions: Vec<usize>,
    surrogates: Table,
    /// Row-major `n_units x n_actions`.
    propensities: Vec<f64>,
    n_actions: usize,
}

impl ExperimentalDataset {
    /// Validates that propensities lie strictly inside (0, 1), sum to one per
    /// unit, and that every action id is below `n_actions`.
    pub fn new(
        features: Table,
        actions: Vec<usize>,
        surrogates: Table,
        propensities: Vec<Vec<f64>>,
        n_actions: usize,
    ) -> Result<Self> {
        let n = actions.len();
        if n_actions < 2 {
            return Err(Error::arg("an experiment needs at least two actions"));
        }
        if features.n_rows() != n || surrogates.n_rows() != n || propensities.len() != n {
            return Err(Error::schema(format!(
                "row counts differ: features {}, actions {n}, surrogates {}, propensities {}",
                features.n_rows(),
                surrogates.n_rows(),
                propensities.len()
            )));
        }
        let mut flat = Vec::with_capacity(n * n_actions);
        for (i, row) in propensities.iter().enumerate() {
            if row.len() != n_actions {
                return Err(Error::schema(format!(
                    "unit {i} has {} propensities, expected {n_actions}",
                    row.len()
                )));
            }
            flat.extend_from_slice(row);
        }
        let ds = Self {
            features,
            actions,
            surrogates,
            propensities: flat,
            n_actions,
        };
        ds.validate()?;
        Ok(ds)
    }

    fn validate(&self) -> Result<()> {
        for i in 0..self.n_units() {
            let a = self.actions[i];
            if a >= self.n_actions {
                return Err(Error::Data(format!(
                    "unit {i} has action {a}, outside 0..{}",
                    self.n_actions
                )));
            }
            let row = self.propensity_row(i);
            for &p in row {
                if !(p > 0.0 && p < 1.0) {
                    return Err(Error::Positivity {
                        unit: i,
                        probability: p,
                    });
                }
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::Data(format!(
                    "propensities of unit {i} sum to {s}, not 1"
                )));
            }
        }
        Ok(())
    }

    pub fn n_units(&self) -> usize {
        self.actions.len()
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn features(&self) -> &Table {
        &self.features
    }

    pub fn surrogates(&self) -> &Table {
        &self.surrogates
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }

    pub fn propensity(&self, unit: usize, action: usize) -> f64 {
        self.propensities[unit * self.n_actions + action]
    }

    pub fn propensity_row(&self, unit: usize) -> &[f64] {
        &self.propensities[unit * self.n_actions..(unit + 1) * self.n_actions]
    }

    /// Design probability of the action each unit actually received.
    pub fn observed_propensities(&self) -> Vec<f64> {
        (0..self.n_units())
            .map(|i| self.propensity(i, self.actions[i]))
            .collect()
    }

    pub fn take_rows(&self, rows: &[usize]) -> ExperimentalDataset {
        let mut propensities = Vec::with_capacity(rows.len() * self.n_actions);
        for &i in rows {
            propensities.extend_from_slice(self.propensity_row(i));
        }
        ExperimentalDataset {
            features: self.features.take_rows(rows),
            actions: rows.iter().map(|&i| self.actions[i]).collect(),
            surrogates: self.surrogates.take_rows(rows),
            propensities,
            n_actions: self.n_actions,
        }
    }

    /// Same units and actions with new design probabilities (validated).
    pub fn with_propensities(&self, propensities: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(
            self.features.clone(),
            self.actions.clone(),
            self.surrogates.clone(),
            propensities,
            self.n_actions,
        )
    }

    pub fn with_surrogates(&self, surrogates: Table) -> Result<Self> {
        if surrogates.n_rows() != self.n_units() {
            return Err(Error::schema("surrogate table row count differs"));
        }
        Ok(Self {
            surrogates,
            ..self.clone()
        })
    }

    pub fn with_features(&self, features: Table) -> Result<Self> {
        if features.n_rows() != self.n_units() {
            return Err(Error::schema("feature table row count differs"));
        }
        Ok(Self {
            features,
            ..self.clone()
        })
    }
}

/// Historical data: covariates, surrogates and the realized long-term outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoricalDataset {
    features: Table,
    surrogates: Table,
    outcomes: Vec<f64>,
}

impl HistoricalDataset {
    pub fn new(features: Table, surrogates: Table, outcomes: Vec<f64>) -> Result<Self> {
        let n = outcomes.len();
        if features.n_rows() != n || surrogates.n_rows() != n {
            return Err(Error::schema(format!(
                "row counts differ: features {}, surrogates {}, outcomes {n}",
                features.n_rows(),
                surrogates.n_rows()
            )));
        }
        if let Some(i) = outcomes.iter().position(|y| !y.is_finite()) {
            return Err(Error::Data(format!("outcome of unit {i} is not finite")));
        }
        Ok(Self {
            features,
            surrogates,
            outcomes,
        })
    }

    pub fn n_units(&self) -> usize {
        self.outcomes.len()
    }

    pub fn features(&self) -> &Table {
        &self.features
    }

    pub fn surrogates(&self) -> &Table {
        &self.surrogates
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    pub fn take_rows(&self, rows: &[usize]) -> HistoricalDataset {
        HistoricalDataset {
            features: self.features.take_rows(rows),
            surrogates: self.surrogates.take_rows(rows),
            outcomes: rows.iter().map(|&i| self.outcomes[i]).collect(),
        }
    }

    pub fn with_surrogates(&self, surrogates: Table) -> Result<Self> {
        Self::new(self.features.clone(), surrogates, self.outcomes.clone())
    }
}

/// Error unless the two surrogate tables declare the same (name, kind) set.
pub fn check_surrogate_schema(expected: &Table, actual: &Table) -> Result<()> {
    check_same_columns("surrogate", &expected.schema(), &actual.schema())
}

pub(crate) fn check_same_columns(
    what: &str,
    expected: &[ColumnSpec],
    actual: &[ColumnSpec],
) -> Result<()> {
    let missing: Vec<&str> = expected
        .iter()
        .filter(|c| !actual.contains(c))
        .map(|c| c.name.as_str())
        .collect();
    let extra: Vec<&str> = actual
        .iter()
        .filter(|c| !expected.contains(c))
        .map(|c| c.name.as_str())
        .collect();
    if missing.is_empty() && extra.is_empty() {
        Ok(())
    } else {
        Err(Error::schema(format!(
            "{what} schema mismatch: missing {missing:?}, unexpected {extra:?}"
        )))
    }
}

/// Column layout of the experimental and historical CSV files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub features: Vec<ColumnSpec>,
    pub surrogates: Vec<ColumnSpec>,
    #[serde(default = "default_action_column")]
    pub action_column: String,
    #[serde(default = "default_outcome_column")]
    pub outcome_column: String,
    pub n_actions: usize,
}

fn default_action_column() -> String {
    "action".into()
}

fn default_outcome_column() -> String {
    "y".into()
}

/// Name of the propensity column for action `a` (`p0`, `p1`, ...).
pub fn propensity_column(a: usize) -> String {
    format!("p{a}")
}

impl DatasetSchema {
    fn experimental_columns(&self) -> Vec<ColumnSpec> {
        let mut cols = self.features.clone();
        cols.extend(self.surrogates.iter().cloned());
        cols.push(ColumnSpec::int(&self.action_column));
        cols.extend((0..self.n_actions).map(|a| ColumnSpec::float(propensity_column(a))));
        cols
    }

    fn historical_columns(&self) -> Vec<ColumnSpec> {
        let mut cols = self.features.clone();
        cols.extend(self.surrogates.iter().cloned());
        cols.push(ColumnSpec::float(&self.outcome_column));
        cols
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.features.iter().map(|c| c.name.clone()).collect()
    }

    pub fn surrogate_names(&self) -> Vec<String> {
        self.surrogates.iter().map(|c| c.name.clone()).collect()
    }
}

pub fn load_experimental(path: impl AsRef<Path>, schema: &DatasetSchema) -> Result<ExperimentalDataset> {
    let table = load_csv(path, &schema.experimental_columns())?;
    experimental_from_table(&table, schema)
}

pub fn experimental_from_table(table: &Table, schema: &DatasetSchema) -> Result<ExperimentalDataset> {
    let features = table.select(&schema.feature_names())?;
    let surrogates = table.select(&schema.surrogate_names())?;
    let actions = match table.column(&schema.action_column)? {
        Column::Int(v) => v
            .iter()
            .enumerate()
            .map(|(i, &a)| {
                usize::try_from(a).map_err(|_| Error::Cell {
                    row: i,
                    column: schema.action_column.clone(),
                    message: format!("negative action {a}"),
                })
            })
            .collect::<Result<Vec<_>>>()?,
        _ => return Err(Error::schema("action column must be an integer column")),
    };
    let cols = (0..schema.n_actions)
        .map(|a| table.numeric(&propensity_column(a)))
        .collect::<Result<Vec<_>>>()?;
    let propensities = (0..table.n_rows())
        .map(|i| cols.iter().map(|c| c[i]).collect())
        .collect();
    ExperimentalDataset::new(features, actions, surrogates, propensities, schema.n_actions)
}

pub fn experimental_to_table(exp: &ExperimentalDataset, schema: &DatasetSchema) -> Result<Table> {
    let mut t = exp.features().hstack(exp.surrogates())?;
    t = t.with_column(
        schema.action_column.clone(),
        Column::Int(exp.actions().iter().map(|&a| a as i64).collect()),
    )?;
    for a in 0..exp.n_actions() {
        t = t.with_column(
            propensity_column(a),
            Column::Float((0..exp.n_units()).map(|i| exp.propensity(i, a)).collect()),
        )?;
    }
    Ok(t)
}

pub fn write_experimental(
    exp: &ExperimentalDataset,
    schema: &DatasetSchema,
    path: impl AsRef<Path>,
) -> Result<()> {
    write_csv(&experimental_to_table(exp, schema)?, path)
}

pub fn load_historical(path: impl AsRef<Path>, schema: &DatasetSchema) -> Result<HistoricalDataset> {
    let table = load_csv(path, &schema.historical_columns())?;
    let features = table.select(&schema.feature_names())?;
    let surrogates = table.select(&schema.surrogate_names())?;
    let outcomes = table.numeric(&schema.outcome_column)?;
    HistoricalDataset::new(features, surrogates, outcomes)
}

pub fn write_historical(
    hist: &HistoricalDataset,
    schema: &DatasetSchema,
    path: impl AsRef<Path>,
) -> Result<()> {
    let t = hist
        .features()
        .hstack(hist.surrogates())?
        .with_column(schema.outcome_column.clone(), Column::Float(hist.outcomes().to_vec()))?;
    write_csv(&t, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentalDataset {
        let x = Table::from_floats(vec![("x", vec![0.0, 1.0])]).unwrap();
        let s = Table::from_floats(vec![("s", vec![2.0, 3.0])]).unwrap();
        ExperimentalDataset::new(x, vec![0, 1], s, vec![vec![0.5, 0.5], vec![0.25, 0.75]], 2)
            .unwrap()
    }

    #[test]
    fn rejects_boundary_propensities() {
        let x = Table::from_floats(vec![("x", vec![0.0])]).unwrap();
        let s = Table::from_floats(vec![("s", vec![0.0])]).unwrap();
        let err = ExperimentalDataset::new(x, vec![0], s, vec![vec![1.0, 0.0]], 2).unwrap_err();
        assert!(matches!(err, Error::Positivity { unit: 0, .. }));
    }

    #[test]
    fn rejects_bad_row_sum_and_action() {
        let x = Table::from_floats(vec![("x", vec![0.0])]).unwrap();
        let s = Table::from_floats(vec![("s", vec![0.0])]).unwrap();
        assert!(ExperimentalDataset::new(x.clone(), vec![0], s.clone(), vec![vec![0.5, 0.4]], 2).is_err());
        assert!(ExperimentalDataset::new(x, vec![2], s, vec![vec![0.5, 0.5]], 2).is_err());
    }

    #[test]
    fn observed_propensities() {
        assert_eq!(tiny().observed_propensities(), vec![0.5, 0.75]);
    }

    #[test]
    fn surrogate_schema_check_detects_rename() {
        let e = tiny();
        let renamed = e.surrogates().rename("s", "s_renamed").unwrap();
        let err = check_surrogate_schema(e.surrogates(), &renamed).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("s_renamed") && msg.contains("missing"), "{msg}");
        assert!(check_surrogate_schema(e.surrogates(), e.surrogates()).is_ok());
    }
}
