use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of the treatment effect on the long-term outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EffectProfile {
    /// `|effect| >= min_gap` everywhere, sign set by a covariate threshold.
    BimodalGap { min_gap: f64 },
    /// Piecewise-linear effect that crosses zero, so many units sit near it.
    ContinuousNearZero,
    /// Effect `effect * depth(a)` for every unit.
    Constant { effect: f64 },
    /// No effect of any action.
    Null,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    /// Every action with probability 1/K.
    Uniform,
    /// Softmax of a linear score in X, mixed half-and-half with uniform.
    Covariate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseScales {
    /// Standard deviation of the consumption shock.
    pub consumption: f64,
    /// Standard deviation of each monthly revenue shock.
    pub revenue: f64,
}

/// Synthetic churn-management experiment.
///
/// Each unit has Gaussian covariates `x1..`, a three-level `segment`, and a
/// latent `U`. Surrogates are a consumption index and `n_periods` monthly
/// revenues; the long-term outcome is total revenue over those months. Action
/// `a` is a discount of depth `a / (K - 1)` that cuts revenue during the first
/// `promo_periods` months and shifts consumption, which carries the lasting
/// effect. `U` loads on post-promotion revenue only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpConfig {
    pub n_units: usize,
    pub n_historical: usize,
    pub k_actions: usize,
    pub dim_x: usize,
    pub n_periods: usize,
    pub promo_periods: usize,
    pub promo_cost: f64,
    pub effect_profile: EffectProfile,
    /// Direct effect `-delta * depth(a)` on the outcome that bypasses the
    /// surrogates.
    pub surrogacy_violation: f64,
    pub confounder_strength: f64,
    /// Historical outcomes are shifted by `drift * consumption`.
    pub comparability_drift: f64,
    pub noise: NoiseScales,
    pub design: DesignKind,
    pub seed: u64,
    /// Seed for the structural coefficients. When unset they come from
    /// `seed`; fixing it lets Monte-Carlo replications redraw units while
    /// keeping the same equations.
    #[serde(default)]
    pub coefficient_seed: Option<u64>,
}

impl Default for DgpConfig {
    fn default() -> Self {
        Self {
            n_units: 20_000,
            n_historical: 20_000,
            k_actions: 2,
            dim_x: 4,
            n_periods: 6,
            promo_periods: 2,
            promo_cost: 0.5,
            effect_profile: EffectProfile::BimodalGap { min_gap: 1.0 },
            surrogacy_violation: 0.0,
            confounder_strength: 0.3,
            comparability_drift: 0.0,
            noise: NoiseScales {
                consumption: 0.3,
                revenue: 0.5,
            },
            design: DesignKind::Uniform,
            seed: 0,
            coefficient_seed: None,
        }
    }
}

impl DgpConfig {
    /// Number of potential surrogate columns (consumption plus each month).
    pub fn dim_s(&self) -> usize {
        self.n_periods + 1
    }

    /// Depth of action `a`: 0 for control, 1 for the strongest action.
    pub fn depth(&self, a: usize) -> f64 {
        a as f64 / (self.k_actions - 1) as f64
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::arg(format!("invalid simulator config: {m}")));
        if self.n_units < 2 || self.n_historical < 2 {
            return bad("need at least two experimental and two historical units");
        }
        if self.k_actions < 2 {
            return bad("need at least two actions");
        }
        if self.dim_x < 2 {
            return bad("dim_x must be at least 2");
        }
        if self.n_periods < 1 || self.promo_periods > self.n_periods {
            return bad("need 1 <= n_periods and promo_periods <= n_periods");
        }
        let nonneg = [
            self.promo_cost,
            self.surrogacy_violation,
            self.confounder_strength,
            self.comparability_drift,
        ];
        if nonneg.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return bad("strengths and costs must be finite and nonnegative");
        }
        if !(self.noise.consumption > 0.0 && self.noise.revenue > 0.0) {
            return bad("noise scales must be positive");
        }
        if let EffectProfile::BimodalGap { min_gap } = self.effect_profile {
            if !(min_gap >= 0.0) {
                return bad("min_gap must be >= 0");
            }
        }
        Ok(())
    }
}
