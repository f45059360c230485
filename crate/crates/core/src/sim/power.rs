//! Power of a targeted churn experiment and the design-versus-uniform
//! comparison, both on binary or probability-valued churn outcomes.

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explore::{normal_quantile, DesignPolicyConfig};
use crate::learners::quantile_sorted;
use crate::rng::{derive_seed, rng_from_seed};

const PROB_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assignment {
    /// Risk-targeted probabilities, rescaled to treat a fraction `q`.
    Design,
    /// Everyone treated with probability `q`.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerConfig {
    pub q: f64,
    pub tau_effect: f64,
    #[serde(default = "default_reps")]
    pub n_reps: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub assignment: Assignment,
}

fn default_reps() -> usize {
    100
}

fn default_alpha() -> f64 {
    0.05
}

impl PowerConfig {
    pub fn new(q: f64, tau_effect: f64, assignment: Assignment) -> Self {
        Self {
            q,
            tau_effect,
            n_reps: default_reps(),
            alpha: default_alpha(),
            assignment,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(unit(self.q) && unit(self.tau_effect) && unit(self.alpha)) {
            return Err(Error::arg("q, tau_effect and alpha must lie in [0, 1]"));
        }
        if self.q == 0.0 || self.q == 1.0 {
            return Err(Error::arg("q must be strictly between 0 and 1 to leave both arms populated"));
        }
        if self.alpha == 0.0 || self.alpha == 1.0 {
            return Err(Error::arg("alpha must be strictly between 0 and 1"));
        }
        if self.n_reps == 0 {
            return Err(Error::arg("n_reps must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerResult {
    pub q: f64,
    pub tau_effect: f64,
    pub assignment: Assignment,
    pub n_reps: usize,
    pub rejections: usize,
    pub power: f64,
    /// Replications with an empty arm; counted as non-rejections.
    pub degenerate_reps: usize,
    pub mean_att: f64,
    pub mean_true_att: f64,
    pub mean_fraction_treated: f64,
}

/// A synthetic subscriber base: churn risk and realized churn under control.
#[derive(Debug, Clone, PartialEq)]
pub struct ChurnPopulation {
    pub risk: Vec<f64>,
    pub base_outcomes: Vec<u8>,
}

/// `n` subscribers with logistic churn risk (mean about 0.2) and Bernoulli
/// baseline churn.
pub fn churn_population(n: usize, seed: u64) -> ChurnPopulation {
    let mut rng = rng_from_seed(seed);
    let mut risk = Vec::with_capacity(n);
    let mut base_outcomes = Vec::with_capacity(n);
    for _ in 0..n {
        let z: f64 = rng.sample(StandardNormal);
        let r = 1.0 / (1.0 + (1.5 - z).exp());
        base_outcomes.push(u8::from(rng.random::<f64>() < r));
        risk.push(r);
    }
    ChurnPopulation { risk, base_outcomes }
}

fn check_risk(risk: &[f64]) -> Result<()> {
    if risk.is_empty() {
        return Err(Error::arg("empty risk vector"));
    }
    if let Some(i) = risk.iter().position(|r| !(r.is_finite() && *r > 0.0 && *r < 1.0)) {
        return Err(Error::arg(format!("risk {i} is {} (must lie in (0, 1))", risk[i])));
    }
    Ok(())
}

/// Rescale treatment probabilities so their mean is `q`.
fn rescale(g: &[f64], q: f64) -> Result<Vec<f64>> {
    let total: f64 = g.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Numeric("design probabilities sum to zero".into()));
    }
    let f = q * g.len() as f64 / total;
    Ok(g.iter().map(|v| (v * f).clamp(PROB_EPS, 1.0 - PROB_EPS)).collect())
}

/// Treatment probabilities targeting the riskiest units: the smoothed
/// threshold rule centred at the `1 - q` risk quantile, rescaled to mean `q`.
/// The noise scale keeps the default rule's threshold-to-noise ratio, so
/// even zero-risk units keep a small chance of treatment.
pub fn targeted_probabilities(risk: &[f64], q: f64) -> Result<Vec<f64>> {
    check_risk(risk)?;
    let mut sorted = risk.to_vec();
    sorted.sort_by(f64::total_cmp);
    let reference = DesignPolicyConfig::default();
    let tau = quantile_sorted(&sorted, 1.0 - q);
    let cfg = DesignPolicyConfig {
        sigma: tau * reference.sigma / reference.tau,
        tau,
        cap: 1.0,
    };
    let g: Vec<f64> = risk.iter().map(|&r| cfg.treat_probability(r)).collect();
    rescale(&g, q)
}

/// ATT with treated weight 1 and comparison weight `p / (1 - p)`, each arm
/// normalized, and a plug-in standard error. `None` when an arm is empty.
fn att_with_se(y: &[f64], treated: &[bool], p: &[f64]) -> Option<(f64, f64)> {
    let (mut n1, mut s1, mut ss1) = (0.0, 0.0, 0.0);
    let (mut w0, mut s0) = (0.0, 0.0);
    for i in 0..y.len() {
        if treated[i] {
            n1 += 1.0;
            s1 += y[i];
            ss1 += y[i] * y[i];
        } else {
            let w = p[i] / (1.0 - p[i]);
            w0 += w;
            s0 += w * y[i];
        }
    }
    if n1 < 2.0 || w0 <= 0.0 {
        return None;
    }
    let m1 = s1 / n1;
    let m0 = s0 / w0;
    let var1 = ((ss1 - n1 * m1 * m1) / (n1 - 1.0)).max(0.0);
    let mut v0 = 0.0;
    for i in 0..y.len() {
        if !treated[i] {
            let w = p[i] / (1.0 - p[i]);
            v0 += w * w * (y[i] - m0) * (y[i] - m0);
        }
    }
    let se = (var1 / n1 + v0 / (w0 * w0)).sqrt();
    Some((m1 - m0, se))
}

/// Fraction of simulated experiments whose two-sided z-test on the IPW ATT
/// rejects at level `alpha`.
///
/// Treatment never raises churn: a churner under control stays a churner
/// with probability `1 - tau` and is saved otherwise. Replication `r` draws
/// its assignments and flips from `derive_seed(seed, r)`, so curves over
/// `tau` share random numbers.
pub fn power_simulation(base_outcomes: &[u8], risk: &[f64], cfg: &PowerConfig, seed: u64) -> Result<PowerResult> {
    cfg.validate()?;
    let n = base_outcomes.len();
    if risk.len() != n {
        return Err(Error::arg(format!("{} risks for {n} outcomes", risk.len())));
    }
    if base_outcomes.iter().any(|&y| y > 1) {
        return Err(Error::arg("baseline outcomes must be 0 or 1"));
    }
    if base_outcomes.iter().all(|&y| y == 0) {
        return Err(Error::Data("every baseline outcome is zero; power is undefined".into()));
    }
    let p = match cfg.assignment {
        Assignment::Design => targeted_probabilities(risk, cfg.q)?,
        Assignment::Uniform => {
            check_risk(risk)?;
            vec![cfg.q; n]
        }
    };
    let crit = normal_quantile(1.0 - cfg.alpha / 2.0);
    let reps: Vec<(Option<(f64, f64)>, f64, f64)> = (0..cfg.n_reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_from_seed(derive_seed(seed, r as u64));
            let mut y = Vec::with_capacity(n);
            let mut treated = Vec::with_capacity(n);
            let (mut n1, mut eff) = (0.0, 0.0);
            for i in 0..n {
                let assign: f64 = rng.random();
                let flip: f64 = rng.random();
                let t = assign < p[i];
                let y0 = f64::from(base_outcomes[i]);
                let y1 = if base_outcomes[i] == 1 && flip < cfg.tau_effect { 0.0 } else { y0 };
                if t {
                    n1 += 1.0;
                    eff += y1 - y0;
                }
                treated.push(t);
                y.push(if t { y1 } else { y0 });
            }
            let true_att = if n1 > 0.0 { eff / n1 } else { 0.0 };
            (att_with_se(&y, &treated, &p), true_att, n1 / n as f64)
        })
        .collect();
    let mut rejections = 0;
    let mut degenerate = 0;
    let mut att_sum = 0.0;
    for (est, _, _) in &reps {
        match est {
            None => degenerate += 1,
            Some((att, se)) => {
                att_sum += att;
                let significant = if *se > 0.0 { (att / se).abs() > crit } else { *att != 0.0 };
                if significant {
                    rejections += 1;
                }
            }
        }
    }
    let n_ok = (cfg.n_reps - degenerate).max(1) as f64;
    let nr = cfg.n_reps as f64;
    Ok(PowerResult {
        q: cfg.q,
        tau_effect: cfg.tau_effect,
        assignment: cfg.assignment,
        n_reps: cfg.n_reps,
        rejections,
        power: rejections as f64 / nr,
        degenerate_reps: degenerate,
        mean_att: att_sum / n_ok,
        mean_true_att: reps.iter().map(|r| r.1).sum::<f64>() / nr,
        mean_fraction_treated: reps.iter().map(|r| r.2).sum::<f64>() / nr,
    })
}

/// Power at each effect size in `taus`, sharing random numbers across them.
pub fn power_curve(
    base_outcomes: &[u8],
    risk: &[f64],
    base: &PowerConfig,
    taus: &[f64],
    seed: u64,
) -> Result<Vec<PowerResult>> {
    taus.iter()
        .map(|&t| {
            let cfg = PowerConfig {
                tau_effect: t,
                ..base.clone()
            };
            power_simulation(base_outcomes, risk, &cfg, seed)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignComparisonConfig {
    pub q_negative: f64,
    pub n_reps: usize,
    pub treated_fraction: f64,
    /// Explicit design rule. When unset, [`targeted_probabilities`] is used.
    /// Either way the probabilities are rescaled to `treated_fraction`.
    #[serde(default)]
    pub design: Option<DesignPolicyConfig>,
}

impl DesignComparisonConfig {
    pub fn new(q_negative: f64, n_reps: usize) -> Self {
        Self {
            q_negative,
            n_reps,
            treated_fraction: 0.01,
            design: None,
        }
    }
}

/// One replication of the design-versus-uniform comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRep {
    pub churn_design: f64,
    pub churn_uniform: f64,
    pub true_ate: f64,
    pub ate_design: f64,
    pub ate_uniform: f64,
    pub treated_design: f64,
    pub treated_uniform: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub mean_churn: f64,
    pub median_churn: f64,
    pub mean_fraction_treated: f64,
    /// Mean of `estimate - true ATE` over replications.
    pub mean_ate_error: f64,
    /// Monte-Carlo standard error of `mean_ate_error`.
    pub ate_error_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignComparison {
    pub q_negative: f64,
    pub n_reps: usize,
    pub design: ArmSummary,
    pub uniform: ArmSummary,
    /// Median over replications of design churn minus uniform churn.
    pub median_churn_difference: f64,
    pub reps: Vec<ComparisonRep>,
}

/// Hájek ATE with weights `1/p` and `1/(1-p)`; `None` when an arm is empty.
fn hajek_ate(y: &[f64], treated: &[bool], p: &[f64]) -> Option<f64> {
    let (mut s1, mut w1, mut s0, mut w0) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..y.len() {
        if treated[i] {
            s1 += y[i] / p[i];
            w1 += 1.0 / p[i];
        } else {
            s0 += y[i] / (1.0 - p[i]);
            w0 += 1.0 / (1.0 - p[i]);
        }
    }
    (w1 > 0.0 && w0 > 0.0).then(|| s1 / w1 - s0 / w0)
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    quantile_sorted(v, 0.5)
}

fn summarize(churn: &[f64], treated: &[f64], errors: &[f64]) -> ArmSummary {
    let n = churn.len() as f64;
    let m = errors.iter().sum::<f64>() / errors.len().max(1) as f64;
    let sd = if errors.len() > 1 {
        (errors.iter().map(|e| (e - m) * (e - m)).sum::<f64>() / (errors.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    ArmSummary {
        mean_churn: churn.iter().sum::<f64>() / n,
        median_churn: median(&mut churn.to_vec()),
        mean_fraction_treated: treated.iter().sum::<f64>() / n,
        mean_ate_error: m,
        ate_error_se: sd / (errors.len().max(1) as f64).sqrt(),
    }
}

/// Compare risk-targeted and uniform assignment at 1% treated.
pub fn design_vs_uniform(risk: &[f64], q_negative: f64, n_reps: usize, seed: u64) -> Result<DesignComparison> {
    design_vs_uniform_with(risk, &DesignComparisonConfig::new(q_negative, n_reps), seed)
}

/// Each replication redraws treated outcomes around the control churn
/// probability `Y(0)`: uniform on `(0, Y(0))` (the treatment helps), or with
/// probability `q_negative` uniform on `(Y(0), 1)` (it hurts). Outcomes are
/// churn probabilities, so mean churn is the mean of `Y(A)`.
pub fn design_vs_uniform_with(risk: &[f64], cfg: &DesignComparisonConfig, seed: u64) -> Result<DesignComparison> {
    check_risk(risk)?;
    if !(0.0..=1.0).contains(&cfg.q_negative) {
        return Err(Error::arg("q_negative must lie in [0, 1]"));
    }
    if !(cfg.treated_fraction > 0.0 && cfg.treated_fraction < 1.0) {
        return Err(Error::arg("treated_fraction must lie in (0, 1)"));
    }
    if cfg.n_reps == 0 {
        return Err(Error::arg("n_reps must be positive"));
    }
    let n = risk.len();
    let pd = match &cfg.design {
        Some(d) => {
            d.validate()?;
            let g: Vec<f64> = risk.iter().map(|&r| d.treat_probability(r)).collect();
            rescale(&g, cfg.treated_fraction)?
        }
        None => targeted_probabilities(risk, cfg.treated_fraction)?,
    };
    let pu = vec![cfg.treated_fraction; n];
    let reps: Vec<Option<ComparisonRep>> = (0..cfg.n_reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_from_seed(derive_seed(seed, r as u64));
            let mut y1 = Vec::with_capacity(n);
            let mut td = Vec::with_capacity(n);
            let mut tu = Vec::with_capacity(n);
            let mut effect = 0.0;
            for i in 0..n {
                let harm = rng.random::<f64>() < cfg.q_negative;
                let u: f64 = rng.random();
                let v = if harm { risk[i] + u * (1.0 - risk[i]) } else { u * risk[i] };
                effect += v - risk[i];
                y1.push(v);
                td.push(rng.random::<f64>() < pd[i]);
                tu.push(rng.random::<f64>() < pu[i]);
            }
            let observed = |t: &[bool]| -> Vec<f64> { (0..n).map(|i| if t[i] { y1[i] } else { risk[i] }).collect() };
            let yd = observed(&td);
            let yu = observed(&tu);
            let mean = |v: &[f64]| v.iter().sum::<f64>() / n as f64;
            let frac = |t: &[bool]| t.iter().filter(|b| **b).count() as f64 / n as f64;
            Some(ComparisonRep {
                churn_design: mean(&yd),
                churn_uniform: mean(&yu),
                true_ate: effect / n as f64,
                ate_design: hajek_ate(&yd, &td, &pd)?,
                ate_uniform: hajek_ate(&yu, &tu, &pu)?,
                treated_design: frac(&td),
                treated_uniform: frac(&tu),
            })
        })
        .collect();
    let reps: Vec<ComparisonRep> = reps.into_iter().flatten().collect();
    if reps.is_empty() {
        return Err(Error::Numeric("every replication had an empty arm".into()));
    }
    let pick = |f: fn(&ComparisonRep) -> f64| reps.iter().map(f).collect::<Vec<f64>>();
    let design = summarize(
        &pick(|r| r.churn_design),
        &pick(|r| r.treated_design),
        &pick(|r| r.ate_design - r.true_ate),
    );
    let uniform = summarize(
        &pick(|r| r.churn_uniform),
        &pick(|r| r.treated_uniform),
        &pick(|r| r.ate_uniform - r.true_ate),
    );
    Ok(DesignComparison {
        q_negative: cfg.q_negative,
        n_reps: reps.len(),
        design,
        uniform,
        median_churn_difference: median(&mut pick(|r| r.churn_design - r.churn_uniform)),
        reps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ExperimentalDataset, Table};
    use crate::ope::{estimate_ate_att, Estimand};

    #[test]
    fn att_matches_library_estimator() {
        let y = [1.0, 0.0, 1.0, 1.0, 0.0, 0.0];
        let t = [true, true, false, false, false, true];
        let p = [0.2, 0.5, 0.4, 0.1, 0.3, 0.6];
        let exp = ExperimentalDataset::new(
            Table::empty(6),
            t.iter().map(|&b| usize::from(b)).collect(),
            Table::empty(6),
            p.iter().map(|&q| vec![1.0 - q, q]).collect(),
            2,
        )
        .unwrap();
        let lib = estimate_ate_att(&exp, &y, (1, 0), Estimand::Att).unwrap().point;
        let (att, _) = att_with_se(&y, &t, &p).unwrap();
        assert!((att - lib).abs() < 1e-14);
        let lib = estimate_ate_att(&exp, &y, (1, 0), Estimand::Ate).unwrap().point;
        assert!((hajek_ate(&y, &t, &p).unwrap() - lib).abs() < 1e-14);
    }

    #[test]
    fn att_standard_error_by_hand() {
        // Treated {1, 0, 0}: mean 1/3, sample variance 1/3. Controls with
        // p = 0.5 have weight 1: values {1, 0}, mean 1/2, sum w^2 r^2 = 1/2.
        let y = [1.0, 0.0, 0.0, 1.0, 0.0];
        let t = [true, true, true, false, false];
        let p = [0.5; 5];
        let (att, se) = att_with_se(&y, &t, &p).unwrap();
        assert!((att - (1.0 / 3.0 - 0.5)).abs() < 1e-15);
        let want = (1.0 / 9.0 + 0.5 / 4.0f64).sqrt();
        assert!((se - want).abs() < 1e-15);
    }

    #[test]
    fn all_zero_baseline_is_an_error() {
        let cfg = PowerConfig::new(0.1, 0.5, Assignment::Uniform);
        assert!(matches!(
            power_simulation(&[0, 0, 0], &[0.1, 0.2, 0.3], &cfg, 1),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn invalid_power_config() {
        let pop = churn_population(100, 1);
        for (q, tau, alpha) in [(0.0, 0.1, 0.05), (0.1, 1.5, 0.05), (0.1, 0.1, 0.0), (1.2, 0.1, 0.05)] {
            let cfg = PowerConfig {
                alpha,
                ..PowerConfig::new(q, tau, Assignment::Uniform)
            };
            assert!(power_simulation(&pop.base_outcomes, &pop.risk, &cfg, 1).is_err());
        }
    }

    #[test]
    fn maximal_effect_has_full_power() {
        let pop = churn_population(20_000, 3);
        let cfg = PowerConfig {
            n_reps: 20,
            ..PowerConfig::new(0.2, 1.0, Assignment::Uniform)
        };
        let r = power_simulation(&pop.base_outcomes, &pop.risk, &cfg, 9).unwrap();
        assert_eq!(r.power, 1.0);
        assert!((r.mean_fraction_treated - 0.2).abs() < 0.01);
    }

    #[test]
    fn targeted_probabilities_average_to_q() {
        let pop = churn_population(5_000, 2);
        let p = targeted_probabilities(&pop.risk, 0.01).unwrap();
        let m = p.iter().sum::<f64>() / p.len() as f64;
        // The 1e-6 floor can push the mean up by at most that much.
        assert!((m - 0.01).abs() < 1e-5);
        // Higher risk never gets a lower probability.
        let mut idx: Vec<usize> = (0..p.len()).collect();
        idx.sort_by(|&a, &b| pop.risk[a].total_cmp(&pop.risk[b]));
        assert!(idx.windows(2).all(|w| p[w[0]] <= p[w[1]]));
    }

    #[test]
    fn comparison_treats_one_percent() {
        let risk = churn_population(20_000, 5).risk;
        let c = design_vs_uniform(&risk, 0.0, 20, 7).unwrap();
        assert!((c.design.mean_fraction_treated - 0.01).abs() < 0.002);
        assert!((c.uniform.mean_fraction_treated - 0.01).abs() < 0.002);
        assert!(design_vs_uniform(&risk, 1.5, 20, 7).is_err());
        assert!(design_vs_uniform(&[0.0, 0.5], 0.5, 20, 7).is_err());
    }
}
