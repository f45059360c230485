//! Synthetic churn-management experiments with complete potential-outcome
//! schedules, for oracle checks of the estimators and policies.

mod config;
mod generate;
mod oracle;
mod power;
mod validation;

pub use config::{DesignKind, DgpConfig, EffectProfile, NoiseScales};
pub use generate::{generate, true_policy_value, true_policy_value_on, Dgp, DgpCoefficients, SimData, SEGMENTS};
pub use oracle::IndexOracle;
pub use power::{
    churn_population, design_vs_uniform, design_vs_uniform_with, power_curve, power_simulation,
    targeted_probabilities, ArmSummary, Assignment, ChurnPopulation, ComparisonRep, DesignComparison,
    DesignComparisonConfig, PowerConfig, PowerResult,
};
pub use validation::{
    validation_experiment, validation_on, AttComparison, HorizonReport, Interval, SurrogateSet, SurrogateSetRow,
    ValidationOptions, ValidationReport,
};

#[cfg(test)]
mod tests;
