//! Columnar datasets, CSV ingestion and fold assignment.

mod csv_io;
mod dataset;
mod folds;
mod table;

pub use csv_io::{load_csv, read_csv, write_csv, write_csv_to};
pub use dataset::{
    check_surrogate_schema, experimental_from_table, experimental_to_table, load_experimental,
    load_historical, propensity_column, write_experimental, write_historical, DatasetSchema,
    ExperimentalDataset, HistoricalDataset,
};
pub(crate) use dataset::check_same_columns;
pub use folds::{make_folds, train_test_split, FoldAssignment};
pub use table::{Column, ColumnKind, ColumnSpec, Table};
