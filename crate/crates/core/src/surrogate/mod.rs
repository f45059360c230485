//! Surrogate index: fit `E[Y | S, X]` on historical data, impute long-term
//! outcomes in the experiment, and report threats to validity.

mod bound;
mod index;
mod shift;

pub use bound::{ate_bias_bound, bias_bound, linear_r2, BiasBoundReport};
pub use index::{fit_surrogate_index, impute, impute_tables, SurrogateModel, SurrogateOptions, TuningOptions, SURROGATE_FORMAT_VERSION};
pub use shift::{covariate_shift_report, ShiftReport, ShiftRow};
