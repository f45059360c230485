use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ope::PolicySnapshot;
use crate::scalar::Scalar;

/// Standard normal CDF, `0.5 erfc(-z / sqrt 2)`.
pub fn normal_cdf<T: Scalar>(z: T) -> T {
    T::of(0.5 * libm::erfc(-z.as_f64() / std::f64::consts::SQRT_2))
}

/// Inverse of [`normal_cdf`] by bisection; `p` must lie in (0, 1).
pub fn normal_quantile(p: f64) -> f64 {
    let (mut lo, mut hi) = (-40.0_f64, 40.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if normal_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Garbled-risk design policy: treat when `R - eps >= tau` with Gaussian
/// noise `eps ~ N(0, sigma^2)`, capped at `cap`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignPolicyConfig {
    pub sigma: f64,
    pub tau: f64,
    pub cap: f64,
}

impl Default for DesignPolicyConfig {
    fn default() -> Self {
        Self {
            sigma: 0.003,
            tau: 0.0068,
            cap: 0.5,
        }
    }
}

impl DesignPolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !(self.cap > 0.0 && self.cap <= 1.0) || !self.tau.is_finite() {
            return Err(Error::arg(format!("invalid design policy config {self:?}")));
        }
        Ok(())
    }

    /// Treatment probability for risk `r`, kept at least 1e-6 away from 0
    /// and 1.
    pub fn treat_probability(&self, r: f64) -> f64 {
        normal_cdf((r - self.tau) / self.sigma).min(self.cap).clamp(1e-6, 1.0 - 1e-6)
    }
}

/// Binary snapshot with rows `(1 - p_i, p_i)`.
pub fn design_policy_from_risk<T: Scalar>(risk: &[T], cfg: &DesignPolicyConfig) -> Result<PolicySnapshot<T>> {
    cfg.validate()?;
    let rows = risk
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let r = r.as_f64();
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::arg(format!("risk {i} = {r} is outside (0, 1)")));
            }
            let p = cfg.treat_probability(r);
            Ok(vec![T::of(1.0 - p), T::of(p)])
        })
        .collect::<Result<Vec<_>>>()?;
    PolicySnapshot::stochastic(rows)
}
