//! Encoding of tables into dense numeric design matrices.
//!
//! Float and int columns pass through. Categorical columns expand into one
//! indicator per level except the first (the first level is the baseline).
//! Levels unseen at fit time encode as the baseline.

use serde::{Deserialize, Serialize};

use crate::data::{Column, ColumnKind, Table};
use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub data: Vec<f64>,
    pub n_rows: usize,
    pub n_cols: usize,
}

impl DenseMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            data: vec![0.0; n_rows * n_cols],
            n_rows,
            n_cols,
        }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n_cols + j] = v;
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.get(i, j)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedColumn {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<String>,
}

/// Name-keyed schema recorded at fit time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub columns: Vec<EncodedColumn>,
}

impl FeatureSchema {
    pub fn from_table(table: &Table) -> Self {
        let columns = table
            .columns()
            .map(|(name, col)| EncodedColumn {
                name: name.to_string(),
                kind: col.kind(),
                levels: match col {
                    Column::Categorical { levels, codes } => {
                        // Only levels that occur, in first-appearance order.
                        let mut used = vec![false; levels.len()];
                        let mut order = Vec::new();
                        for &c in codes {
                            if !used[c as usize] {
                                used[c as usize] = true;
                                order.push(levels[c as usize].clone());
                            }
                        }
                        order
                    }
                    _ => Vec::new(),
                },
            })
            .collect();
        Self { columns }
    }

    /// Number of encoded (numeric) features.
    pub fn width(&self) -> usize {
        self.columns
            .iter()
            .map(|c| match c.kind {
                ColumnKind::Categorical => c.levels.len().saturating_sub(1),
                _ => 1,
            })
            .sum()
    }

    pub fn names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn encoded_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for c in &self.columns {
            match c.kind {
                ColumnKind::Categorical => {
                    for l in c.levels.iter().skip(1) {
                        out.push(format!("{}={}", c.name, l));
                    }
                }
                _ => out.push(c.name.clone()),
            }
        }
        out
    }

    /// Encode `table`, looking columns up by name.
    pub fn encode(&self, table: &Table) -> Result<DenseMatrix> {
        let n = table.n_rows();
        let width = self.width();
        let mut m = DenseMatrix::zeros(n, width);
        let mut offset = 0;
        for spec in &self.columns {
            let col = table.column(&spec.name)?;
            let kind = col.kind();
            let compatible = kind == spec.kind
                || (spec.kind == ColumnKind::Float && kind == ColumnKind::Int)
                || (spec.kind == ColumnKind::Int && kind == ColumnKind::Float);
            if !compatible {
                return Err(Error::schema(format!(
                    "column '{}' has kind {:?}, model expects {:?}",
                    spec.name, kind, spec.kind
                )));
            }
            match col {
                Column::Float(v) => {
                    for (i, &x) in v.iter().enumerate() {
                        m.set(i, offset, x);
                    }
                    offset += 1;
                }
                Column::Int(v) => {
                    for (i, &x) in v.iter().enumerate() {
                        m.set(i, offset, x as f64);
                    }
                    offset += 1;
                }
                Column::Categorical { levels, codes } => {
                    // Map table levels to schema indicator slots.
                    let slot: Vec<Option<usize>> = levels
                        .iter()
                        .map(|l| {
                            spec.levels
                                .iter()
                                .position(|s| s == l)
                                .and_then(|p| p.checked_sub(1))
                        })
                        .collect();
                    for (i, &c) in codes.iter().enumerate() {
                        if let Some(j) = slot[c as usize] {
                            m.set(i, offset + j, 1.0);
                        }
                    }
                    offset += spec.levels.len().saturating_sub(1);
                }
            }
        }
        Ok(m)
    }
}
