use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{ColumnKind, Table};
use crate::error::{Error, Result};
use crate::learners::quantile_sorted;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftRow {
    pub feature: String,
    pub d1_low: f64,
    pub d1_high: f64,
    pub d2_low: f64,
    pub d2_high: f64,
    pub overlap: bool,
}

/// 2.5% and 97.5% quantiles of every shared numeric column in both tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftReport {
    pub rows: Vec<ShiftRow>,
}

fn range(v: &[f64]) -> (f64, f64) {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    (quantile_sorted(&s, 0.025), quantile_sorted(&s, 0.975))
}

pub fn covariate_shift_report(d1: &Table, d2: &Table) -> Result<ShiftReport> {
    let mut rows = Vec::new();
    for (name, col) in d1.columns() {
        let Ok(other) = d2.column(name) else { continue };
        let numeric = |k: ColumnKind| matches!(k, ColumnKind::Float | ColumnKind::Int);
        if !numeric(col.kind()) || !numeric(other.kind()) || col.is_empty() || other.is_empty() {
            continue;
        }
        let (a_lo, a_hi) = range(&col.as_f64().expect("numeric"));
        let (b_lo, b_hi) = range(&other.as_f64().expect("numeric"));
        rows.push(ShiftRow {
            feature: name.to_string(),
            d1_low: a_lo,
            d1_high: a_hi,
            d2_low: b_lo,
            d2_high: b_hi,
            overlap: a_lo <= b_hi && b_lo <= a_hi,
        });
    }
    if rows.is_empty() {
        return Err(Error::arg("the two tables share no numeric columns"));
    }
    Ok(ShiftReport { rows })
}

impl ShiftReport {
    pub fn write_csv_to<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["feature", "p2.5_d1", "p97.5_d1", "p2.5_d2", "p97.5_d2", "overlap"])?;
        for r in &self.rows {
            w.write_record([
                r.feature.clone(),
                format!("{:?}", r.d1_low),
                format!("{:?}", r.d1_high),
                format!("{:?}", r.d2_low),
                format!("{:?}", r.d2_high),
                r.overlap.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::Io {
            path: "<csv writer>".into(),
            source: e,
        })
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv_to(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_shifted_and_single_row() {
        let x: Vec<f64> = (0..200).map(|i| i as f64).collect();
        let d1 = Table::from_floats(vec![("a", x.clone()), ("b", x.clone())]).unwrap();
        let same = covariate_shift_report(&d1, &d1).unwrap();
        assert!(same.rows.iter().all(|r| r.overlap && r.d1_low == r.d2_low && r.d1_high == r.d2_high));

        let shifted: Vec<f64> = x.iter().map(|v| v + 1000.0).collect();
        let d2 = Table::from_floats(vec![("a", x.clone()), ("b", shifted)]).unwrap();
        let r = covariate_shift_report(&d1, &d2).unwrap();
        assert!(r.rows[0].overlap);
        assert!(!r.rows[1].overlap);

        let one = Table::from_floats(vec![("a", vec![3.5])]).unwrap();
        let r = covariate_shift_report(&one, &one).unwrap();
        assert_eq!((r.rows[0].d1_low, r.rows[0].d1_high), (3.5, 3.5));

        let other = Table::from_floats(vec![("z", vec![1.0])]).unwrap();
        assert!(covariate_shift_report(&one, &other).is_err());
    }
}
