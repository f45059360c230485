//! CSV ingestion and export.
//!
//! Files must carry a header row. Only the declared columns are read; extra
//! columns are ignored. Empty cells are rejected: missing values have to be
//! resolved before ingestion.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::table::{Column, ColumnKind, ColumnSpec, Table};
use crate::error::{Error, Result};

/// Read `path` into a table with the declared columns, in declaration order.
pub fn load_csv(path: impl AsRef<Path>, schema: &[ColumnSpec]) -> Result<Table> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

/// Same as [`load_csv`] over any reader.
pub fn read_csv<R: Read>(reader: R, schema: &[ColumnSpec]) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let positions = schema
        .iter()
        .map(|spec| {
            headers
                .iter()
                .position(|h| h == spec.name)
                .ok_or_else(|| Error::schema(format!("missing column '{}'", spec.name)))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut raw: Vec<Vec<String>> = vec![Vec::new(); schema.len()];
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        for (j, &pos) in positions.iter().enumerate() {
            let cell = record.get(pos).unwrap_or("");
            if cell.is_empty() {
                return Err(Error::Cell {
                    row,
                    column: schema[j].name.clone(),
                    message: "missing value".into(),
                });
            }
            raw[j].push(cell.to_string());
        }
    }

    let columns = schema
        .iter()
        .zip(raw)
        .map(|(spec, cells)| Ok((spec.name.clone(), parse_column(spec, &cells)?)))
        .collect::<Result<Vec<_>>>()?;
    let n_rows = columns.first().map(|(_, c)| c.len()).unwrap_or(0);
    let table = Table::new(columns)?;
    debug_assert_eq!(table.n_rows(), n_rows);
    Ok(table)
}

fn parse_column(spec: &ColumnSpec, cells: &[String]) -> Result<Column> {
    let bad = |row: usize, what: &str| Error::Cell {
        row,
        column: spec.name.clone(),
        message: format!("cannot parse '{}' as {what}", cells[row]),
    };
    Ok(match spec.kind {
        ColumnKind::Float => {
            let mut out = Vec::with_capacity(cells.len());
            for (row, c) in cells.iter().enumerate() {
                let v: f64 = c.parse().map_err(|_| bad(row, "float"))?;
                if !v.is_finite() {
                    return Err(bad(row, "finite float"));
                }
                out.push(v);
            }
            Column::Float(out)
        }
        ColumnKind::Int => {
            let mut out = Vec::with_capacity(cells.len());
            for (row, c) in cells.iter().enumerate() {
                out.push(c.parse::<i64>().map_err(|_| bad(row, "integer"))?);
            }
            Column::Int(out)
        }
        ColumnKind::Categorical => Column::categorical(cells),
    })
}

/// Write a table with a header row. Floats use shortest round-trip form.
pub fn write_csv(table: &Table, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(table, file)
}

pub fn write_csv_to<W: Write>(table: &Table, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(table.names())?;
    let cols: Vec<&Column> = table.columns().map(|(_, c)| c).collect();
    for row in 0..table.n_rows() {
        w.write_record(cols.iter().map(|c| c.cell_string(row)))?;
    }
    w.flush().map_err(|e| Error::Io {
        path: "<csv writer>".into(),
        source: e,
    })?;
    Ok(())
}
