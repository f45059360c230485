//! Closed-form surrogate-index quantities for binary simulations.
//!
//! Given `X = x`, every surrogate and the outcome are linear in the
//! independent shocks `(A, U, eps_c, eps_1..eps_T)`, so the best linear
//! predictor of `Y` from the surrogates, its effect contrast and the
//! per-covariate bias bound follow from a few covariance matrices.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::generate::Dgp;
use crate::error::{Error, Result};
use crate::learners::solve_psd;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexOracle {
    /// True effect `Y(1) - Y(0)` at `x`.
    pub effect: f64,
    /// Effect of treatment on the linear surrogate index at `x`.
    pub index_effect: f64,
    /// `sqrt(var_Y / var_A * (1 - R2_Y) * (1 - R2_A))` given `X = x`.
    pub bias_bound: f64,
}

fn cov(u: &[f64], v: &[f64], var: &[f64]) -> f64 {
    u.iter().zip(v).zip(var).map(|((a, b), s)| a * b * s).sum()
}

impl Dgp {
    /// Oracle index quantities for a unit with covariates `x`, when the
    /// index uses consumption and the first `horizon` months of revenue.
    pub fn index_oracle(&self, x: &[f64], horizon: usize) -> Result<IndexOracle> {
        let cfg = &self.config;
        if cfg.k_actions != 2 {
            return Err(Error::arg("the closed-form index oracle covers two actions only"));
        }
        if horizon == 0 || horizon > cfg.n_periods {
            return Err(Error::arg(format!(
                "horizon {horizon} outside the surrogate span 1..={}",
                cfg.n_periods
            )));
        }
        let t_all = cfg.n_periods;
        let p = self.design_probabilities(x)[1];
        // Shock order: A, U, eps_c, eps_1..eps_T.
        let m = 3 + t_all;
        let mut var = vec![1.0; m];
        var[0] = p * (1.0 - p);

        let mut c = vec![0.0; m];
        c[0] = self.consumption_shift(1, x) - self.consumption_shift(0, x);
        c[2] = cfg.noise.consumption;
        let mut surrogates = vec![c.clone()];
        for t in 1..=horizon {
            let mut r = c.clone();
            if t <= cfg.promo_periods {
                r[0] -= cfg.promo_cost * cfg.depth(1);
            } else {
                r[1] += cfg.confounder_strength;
            }
            r[2 + t] = cfg.noise.revenue;
            surrogates.push(r);
        }
        let mut y = vec![0.0; m];
        y[0] = self.total_effect(1, x);
        y[1] = cfg.confounder_strength * (t_all - cfg.promo_periods) as f64;
        y[2] = cfg.noise.consumption * t_all as f64;
        for v in &mut y[3..] {
            *v = cfg.noise.revenue;
        }
        let mut a = vec![0.0; m];
        a[0] = 1.0;

        let k = surrogates.len();
        let sss = DMatrix::from_fn(k, k, |i, j| cov(&surrogates[i], &surrogates[j], &var));
        let sy = DVector::from_iterator(k, surrogates.iter().map(|s| cov(s, &y, &var)));
        let sa = DVector::from_iterator(k, surrogates.iter().map(|s| cov(s, &a, &var)));
        let by = solve_psd(sss.clone(), &sy)?;
        let ba = solve_psd(sss, &sa)?;
        let var_y = cov(&y, &y, &var);
        let var_a = var[0];
        let res_y = (var_y - by.dot(&sy)).max(0.0);
        let res_a = (var_a - ba.dot(&sa)).max(0.0);
        Ok(IndexOracle {
            effect: y[0],
            index_effect: by.dot(&sa) / var_a,
            bias_bound: (res_y * res_a).sqrt() / var_a,
        })
    }
}
