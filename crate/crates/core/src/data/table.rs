use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Storage kind of a column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Float,
    Int,
    Categorical,
}

/// A column declaration: name plus kind.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
}

impl ColumnSpec {
    pub fn new(name: impl Into<String>, kind: ColumnKind) -> Self {
        Self {
            name: name.into(),
            kind,
        }
    }

    pub fn float(name: impl Into<String>) -> Self {
        Self::new(name, ColumnKind::Float)
    }

    pub fn int(name: impl Into<String>) -> Self {
        Self::new(name, ColumnKind::Int)
    }

    pub fn categorical(name: impl Into<String>) -> Self {
        Self::new(name, ColumnKind::Categorical)
    }
}

/// Column values. Categorical columns are interned: `codes[i]` indexes
/// into `levels`, and levels are kept in order of first appearance.
#[derive(Debug, Clone)]
pub enum Column {
    Float(Vec<f64>),
    Int(Vec<i64>),
    Categorical { levels: Vec<String>, codes: Vec<u32> },
}

impl Column {
    pub fn kind(&self) -> ColumnKind {
        match self {
            Column::Float(_) => ColumnKind::Float,
            Column::Int(_) => ColumnKind::Int,
            Column::Categorical { .. } => ColumnKind::Categorical,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Column::Float(v) => v.len(),
            Column::Int(v) => v.len(),
            Column::Categorical { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Intern string values into a categorical column.
    pub fn categorical<S: AsRef<str>>(values: &[S]) -> Self {
        let mut levels: Vec<String> = Vec::new();
        let mut index: HashMap<String, u32> = HashMap::new();
        let codes = values
            .iter()
            .map(|v| {
                let v = v.as_ref();
                *index.entry(v.to_string()).or_insert_with(|| {
                    levels.push(v.to_string());
                    (levels.len() - 1) as u32
                })
            })
            .collect();
        Column::Categorical { levels, codes }
    }

    /// Numeric view (float, or int widened). `None` for categorical columns.
    pub fn as_f64(&self) -> Option<Vec<f64>> {
        match self {
            Column::Float(v) => Some(v.clone()),
            Column::Int(v) => Some(v.iter().map(|&x| x as f64).collect()),
            Column::Categorical { .. } => None,
        }
    }

    /// Cell rendered as text, as written to CSV.
    pub fn cell_string(&self, row: usize) -> String {
        match self {
            // `{:?}` on f64 is the shortest representation that round-trips.
            Column::Float(v) => format!("{:?}", v[row]),
            Column::Int(v) => v[row].to_string(),
            Column::Categorical { levels, codes } => levels[codes[row] as usize].clone(),
        }
    }

    pub fn level_of(&self, row: usize) -> Option<&str> {
        match self {
            Column::Categorical { levels, codes } => Some(levels[codes[row] as usize].as_str()),
            _ => None,
        }
    }

    pub fn take(&self, rows: &[usize]) -> Column {
        match self {
            Column::Float(v) => Column::Float(rows.iter().map(|&i| v[i]).collect()),
            Column::Int(v) => Column::Int(rows.iter().map(|&i| v[i]).collect()),
            Column::Categorical { levels, codes } => Column::Categorical {
                levels: levels.clone(),
                codes: rows.iter().map(|&i| codes[i]).collect(),
            },
        }
    }
}

impl PartialEq for Column {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Column::Float(a), Column::Float(b)) => a == b,
            (Column::Int(a), Column::Int(b)) => a == b,
            (Column::Categorical { .. }, Column::Categorical { .. }) => {
                self.len() == other.len()
                    && (0..self.len()).all(|i| self.level_of(i) == other.level_of(i))
            }
            _ => false,
        }
    }
}

/// Immutable columnar table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    names: Vec<String>,
    columns: Vec<Column>,
    n_rows: usize,
}

impl Table {
    /// Build a table, checking equal lengths, unique names and finite floats.
    pub fn new(columns: Vec<(String, Column)>) -> Result<Self> {
        let n_rows = columns.first().map(|(_, c)| c.len()).unwrap_or(0);
        let mut seen = HashMap::new();
        for (name, col) in &columns {
            if seen.insert(name.clone(), ()).is_some() {
                return Err(Error::schema(format!("duplicate column '{name}'")));
            }
            if col.len() != n_rows {
                return Err(Error::schema(format!(
                    "column '{name}' has {} rows, expected {n_rows}",
                    col.len()
                )));
            }
            if let Column::Float(v) = col {
                if let Some(row) = v.iter().position(|x| !x.is_finite()) {
                    return Err(Error::Cell {
                        row,
                        column: name.clone(),
                        message: "non-finite value".into(),
                    });
                }
            }
        }
        let (names, columns) = columns.into_iter().unzip();
        Ok(Self {
            names,
            columns,
            n_rows,
        })
    }

    /// Table with `n_rows` rows and no columns.
    pub fn empty(n_rows: usize) -> Self {
        Self {
            names: Vec::new(),
            columns: Vec::new(),
            n_rows,
        }
    }

    /// Convenience constructor for all-float tables.
    pub fn from_floats(columns: Vec<(&str, Vec<f64>)>) -> Result<Self> {
        Self::new(
            columns
                .into_iter()
                .map(|(n, v)| (n.to_string(), Column::Float(v)))
                .collect(),
        )
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn schema(&self) -> Vec<ColumnSpec> {
        self.names
            .iter()
            .zip(&self.columns)
            .map(|(n, c)| ColumnSpec::new(n.clone(), c.kind()))
            .collect()
    }

    pub fn columns(&self) -> impl Iterator<Item = (&str, &Column)> {
        self.names.iter().map(String::as_str).zip(self.columns.iter())
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.position(name)
            .map(|i| &self.columns[i])
            .ok_or_else(|| Error::schema(format!("missing column '{name}'")))
    }

    /// Numeric values of a float or int column.
    pub fn numeric(&self, name: &str) -> Result<Vec<f64>> {
        self.column(name)?
            .as_f64()
            .ok_or_else(|| Error::schema(format!("column '{name}' is categorical")))
    }

    /// Columns in the given order.
    pub fn select<S: AsRef<str>>(&self, names: &[S]) -> Result<Table> {
        let cols = names
            .iter()
            .map(|n| {
                let n = n.as_ref();
                self.column(n).map(|c| (n.to_string(), c.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        let n_rows = self.n_rows;
        let mut t = Table::new(cols)?;
        t.n_rows = n_rows;
        Ok(t)
    }

    pub fn take_rows(&self, rows: &[usize]) -> Table {
        Table {
            names: self.names.clone(),
            columns: self.columns.iter().map(|c| c.take(rows)).collect(),
            n_rows: rows.len(),
        }
    }

    /// Side-by-side concatenation; names must not collide.
    pub fn hstack(&self, other: &Table) -> Result<Table> {
        if self.n_cols() > 0 && other.n_cols() > 0 && self.n_rows != other.n_rows {
            return Err(Error::schema(format!(
                "row count mismatch: {} vs {}",
                self.n_rows, other.n_rows
            )));
        }
        let n_rows = if self.n_cols() > 0 { self.n_rows } else { other.n_rows };
        let mut cols: Vec<(String, Column)> = self
            .names
            .iter()
            .cloned()
            .zip(self.columns.iter().cloned())
            .collect();
        cols.extend(other.names.iter().cloned().zip(other.columns.iter().cloned()));
        let mut t = Table::new(cols)?;
        t.n_rows = n_rows;
        Ok(t)
    }

    pub fn with_column(&self, name: impl Into<String>, column: Column) -> Result<Table> {
        let name = name.into();
        let extra = Table::new(vec![(name, column)])?;
        self.hstack(&extra)
    }

    /// Replace (or append) a column.
    pub fn replace_column(&self, name: &str, column: Column) -> Result<Table> {
        if column.len() != self.n_rows {
            return Err(Error::schema(format!(
                "column '{name}' has {} rows, expected {}",
                column.len(),
                self.n_rows
            )));
        }
        let mut t = self.clone();
        match t.position(name) {
            Some(i) => t.columns[i] = column,
            None => {
                t.names.push(name.to_string());
                t.columns.push(column);
            }
        }
        Ok(t)
    }

    pub fn rename(&self, from: &str, to: &str) -> Result<Table> {
        let i = self
            .position(from)
            .ok_or_else(|| Error::schema(format!("missing column '{from}'")))?;
        if self.position(to).is_some() {
            return Err(Error::schema(format!("duplicate column '{to}'")));
        }
        let mut t = self.clone();
        t.names[i] = to.to_string();
        Ok(t)
    }
}
