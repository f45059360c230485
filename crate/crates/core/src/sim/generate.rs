use std::path::Path;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::config::{DesignKind, DgpConfig, EffectProfile};
use crate::data::{
    write_csv, write_experimental, write_historical, Column, ColumnSpec, DatasetSchema, ExperimentalDataset,
    HistoricalDataset, Table,
};
use crate::error::{Error, Result};
use crate::learners::argmax;
use crate::ope::PolicySnapshot;
use crate::rng::{derive_named_seed, rng_from_seed, Rng};
use crate::scalar::Scalar;

pub const SEGMENTS: [&str; 3] = ["A", "B", "C"];

/// Every coefficient of the structural equations, drawn from the config seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpCoefficients {
    pub consumption_intercept: f64,
    pub consumption_loadings: Vec<f64>,
    /// Weight on `max(x2, 0)`.
    pub consumption_kink: f64,
    /// Weight on `x1 * x2`.
    pub consumption_interaction: f64,
    pub revenue_loadings: Vec<f64>,
    pub segment_revenue: [f64; 3],
    /// `K x dim_x`; row 0 is zero.
    pub design_gamma: Vec<Vec<f64>>,
    /// Per non-control action: the covariate whose sign drives the effect.
    pub effect_feature: Vec<usize>,
    /// Per non-control action: the covariate that scales the effect size.
    pub modifier_feature: Vec<usize>,
    pub effect_threshold: Vec<f64>,
    pub effect_sign: Vec<f64>,
}

impl DgpCoefficients {
    fn draw(cfg: &DgpConfig, rng: &mut Rng) -> Self {
        let d = cfg.dim_x;
        let k = cfg.k_actions;
        let mut normal = |sd: f64| sd * rng.sample::<f64, _>(StandardNormal);
        let consumption_loadings = (0..d).map(|_| normal(0.3)).collect();
        let revenue_loadings = (0..d).map(|_| normal(0.3)).collect();
        let segment_revenue = [normal(0.5), normal(0.5), normal(0.5)];
        let design_gamma = (0..k)
            .map(|a| (0..d).map(|_| if a == 0 { 0.0 } else { normal(1.0) }).collect())
            .collect();
        let mut effect_threshold = Vec::with_capacity(k - 1);
        let mut effect_sign = Vec::with_capacity(k - 1);
        for a in 1..k {
            // The first action keeps a clean threshold at zero and a positive
            // sign so binary designs have a simple, known oracle policy.
            if a == 1 {
                effect_threshold.push(0.0);
                effect_sign.push(1.0);
            } else {
                effect_threshold.push(rng.random_range(-0.5..0.5));
                effect_sign.push(if rng.random_bool(0.5) { 1.0 } else { -1.0 });
            }
        }
        Self {
            consumption_intercept: 1.0,
            consumption_loadings,
            consumption_kink: 0.3,
            consumption_interaction: 0.2,
            revenue_loadings,
            segment_revenue,
            design_gamma,
            effect_feature: (1..k).map(|a| (a - 1) % d).collect(),
            modifier_feature: (1..k).map(|a| a % d).collect(),
            effect_threshold,
            effect_sign,
        }
    }
}

/// Exogenous draws for one unit, shared by all of its potential outcomes.
#[derive(Debug, Clone)]
struct UnitDraw {
    x: Vec<f64>,
    segment: usize,
    u: f64,
    eps_consumption: f64,
    eps_revenue: Vec<f64>,
}

fn draw_unit(cfg: &DgpConfig, rng: &mut Rng) -> UnitDraw {
    let x = (0..cfg.dim_x).map(|_| rng.sample(StandardNormal)).collect();
    let segment = rng.random_range(0..3);
    let u = rng.sample(StandardNormal);
    let eps_consumption = rng.sample(StandardNormal);
    let eps_revenue = (0..cfg.n_periods).map(|_| rng.sample(StandardNormal)).collect();
    UnitDraw {
        x,
        segment,
        u,
        eps_consumption,
        eps_revenue,
    }
}

/// Potential surrogates and outcomes of one unit.
struct UnitPotentials {
    /// `K x dim_s`: consumption then each month's revenue.
    surrogates: Vec<Vec<f64>>,
    outcomes: Vec<f64>,
    /// `Y(a) - Y(0)` for every action, exact by construction.
    effects: Vec<f64>,
}

/// The simulator's structural equations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dgp {
    pub config: DgpConfig,
    pub coefficients: DgpCoefficients,
}

impl Dgp {
    pub fn new(config: DgpConfig) -> Result<Self> {
        config.validate()?;
        let base = config.coefficient_seed.unwrap_or(config.seed);
        let mut rng = rng_from_seed(derive_named_seed(base, "coefficients"));
        let coefficients = DgpCoefficients::draw(&config, &mut rng);
        Ok(Self { config, coefficients })
    }

    /// Effect of action `a` on the outcome before any direct violation term.
    pub fn effect(&self, a: usize, x: &[f64]) -> f64 {
        if a == 0 {
            return 0.0;
        }
        let c = &self.coefficients;
        let (j, k) = (c.effect_feature[a - 1], c.modifier_feature[a - 1]);
        let (theta, s) = (c.effect_threshold[a - 1], c.effect_sign[a - 1]);
        match self.config.effect_profile {
            EffectProfile::BimodalGap { min_gap } => {
                let side = if x[j] >= theta { 1.0 } else { -1.0 };
                s * side * (min_gap + 0.5 * x[k].abs())
            }
            EffectProfile::ContinuousNearZero => s * (0.8 * (x[j] - theta) + 0.3 * x[k].max(0.0) - 0.12),
            EffectProfile::Constant { effect } => effect * self.config.depth(a),
            EffectProfile::Null => 0.0,
        }
    }

    /// Full effect `Y(a) - Y(0)`, including the direct term.
    pub fn total_effect(&self, a: usize, x: &[f64]) -> f64 {
        self.effect(a, x) - self.config.surrogacy_violation * self.config.depth(a)
    }

    fn base_consumption(&self, x: &[f64]) -> f64 {
        let c = &self.coefficients;
        c.consumption_intercept
            + c.consumption_loadings.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
            + c.consumption_kink * x[1].max(0.0)
            + c.consumption_interaction * x[0] * x[1]
    }

    fn revenue_level(&self, x: &[f64], segment: usize) -> f64 {
        let c = &self.coefficients;
        c.revenue_loadings.iter().zip(x).map(|(b, v)| b * v).sum::<f64>() + c.segment_revenue[segment]
    }

    /// Consumption shift of action `a`, sized so the long-run effect is
    /// exactly `effect(a, x)` after the promotion's revenue cost.
    pub fn consumption_shift(&self, a: usize, x: &[f64]) -> f64 {
        let cfg = &self.config;
        let promo = cfg.promo_cost * cfg.depth(a) * cfg.promo_periods as f64;
        (self.effect(a, x) + promo) / cfg.n_periods as f64
    }

    /// Design probabilities for covariates `x`.
    pub fn design_probabilities(&self, x: &[f64]) -> Vec<f64> {
        let k = self.config.k_actions;
        let uniform = 1.0 / k as f64;
        match self.config.design {
            DesignKind::Uniform => vec![uniform; k],
            DesignKind::Covariate => {
                let scores: Vec<f64> = self
                    .coefficients
                    .design_gamma
                    .iter()
                    .map(|g| 0.5 * g.iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
                    .collect();
                let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
                let z: f64 = e.iter().sum();
                e.iter().map(|v| 0.5 * v / z + 0.5 * uniform).collect()
            }
        }
    }

    fn potentials(&self, d: &UnitDraw) -> UnitPotentials {
        let cfg = &self.config;
        let base_c = self.base_consumption(&d.x) + cfg.noise.consumption * d.eps_consumption;
        let level = self.revenue_level(&d.x, d.segment);
        let mut surrogates = Vec::with_capacity(cfg.k_actions);
        for a in 0..cfg.k_actions {
            let c = base_c + self.consumption_shift(a, &d.x);
            let mut row = Vec::with_capacity(cfg.dim_s());
            row.push(c);
            for t in 1..=cfg.n_periods {
                let mut r = c + level + cfg.noise.revenue * d.eps_revenue[t - 1];
                if t <= cfg.promo_periods {
                    r -= cfg.promo_cost * cfg.depth(a);
                } else {
                    r += cfg.confounder_strength * d.u;
                }
                row.push(r);
            }
            surrogates.push(row);
        }
        let y0: f64 = surrogates[0][1..].iter().sum();
        let effects: Vec<f64> = (0..cfg.k_actions).map(|a| self.total_effect(a, &d.x)).collect();
        let outcomes = effects.iter().map(|e| y0 + e).collect();
        UnitPotentials {
            surrogates,
            outcomes,
            effects,
        }
    }

    pub fn feature_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (1..=self.config.dim_x).map(|j| format!("x{j}")).collect();
        names.push("segment".into());
        names
    }

    pub fn surrogate_names(&self) -> Vec<String> {
        let mut names = vec!["consumption".to_string()];
        names.extend((1..=self.config.n_periods).map(|t| format!("rev_{t}")));
        names
    }

    pub fn schema(&self) -> DatasetSchema {
        let mut features: Vec<ColumnSpec> =
            (1..=self.config.dim_x).map(|j| ColumnSpec::float(format!("x{j}"))).collect();
        features.push(ColumnSpec::categorical("segment"));
        DatasetSchema {
            features,
            surrogates: self.surrogate_names().into_iter().map(ColumnSpec::float).collect(),
            action_column: "action".into(),
            outcome_column: "y".into(),
            n_actions: self.config.k_actions,
        }
    }

    fn feature_table(&self, draws: &[UnitDraw]) -> Result<Table> {
        let mut cols: Vec<(String, Column)> = (0..self.config.dim_x)
            .map(|j| (format!("x{}", j + 1), Column::Float(draws.iter().map(|d| d.x[j]).collect())))
            .collect();
        let segs: Vec<&str> = draws.iter().map(|d| SEGMENTS[d.segment]).collect();
        cols.push(("segment".into(), Column::categorical(&segs)));
        Table::new(cols)
    }

    fn surrogate_table(&self, rows: &[&[f64]]) -> Result<Table> {
        let cols = self
            .surrogate_names()
            .into_iter()
            .enumerate()
            .map(|(s, name)| (name, Column::Float(rows.iter().map(|r| r[s]).collect())))
            .collect();
        Table::new(cols)
    }
}

fn draw_action(p: &[f64], rng: &mut Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (a, &pa) in p.iter().enumerate() {
        acc += pa;
        if u < acc {
            return a;
        }
    }
    p.len() - 1
}

/// A simulated experiment with its complete potential-outcome schedule.
#[derive(Debug, Clone)]
pub struct SimData {
    pub dgp: Dgp,
    pub historical: HistoricalDataset,
    pub experiment: ExperimentalDataset,
    /// `N x K`.
    pub potential_outcomes: Vec<Vec<f64>>,
    /// `N x K x dim_s`.
    pub potential_surrogates: Vec<Vec<Vec<f64>>>,
    /// `N x (K - 1)`: `Y(a) - Y(0)` for `a >= 1`.
    pub oracle_cates: Vec<Vec<f64>>,
    pub oracle_policy: Vec<usize>,
    /// Realized long-term outcome `Y(A)` of each experimental unit. Not part
    /// of the experiment as the analyst sees it.
    pub outcomes: Vec<f64>,
    pub historical_actions: Vec<usize>,
}

/// Draw a simulated experiment and a historical sample from `cfg`.
pub fn generate(cfg: &DgpConfig) -> Result<SimData> {
    let dgp = Dgp::new(cfg.clone())?;
    let k = cfg.k_actions;

    let mut rng = rng_from_seed(derive_named_seed(cfg.seed, "experiment"));
    let mut draws = Vec::with_capacity(cfg.n_units);
    let mut actions = Vec::with_capacity(cfg.n_units);
    let mut props = Vec::with_capacity(cfg.n_units);
    for _ in 0..cfg.n_units {
        let d = draw_unit(cfg, &mut rng);
        let p = dgp.design_probabilities(&d.x);
        actions.push(draw_action(&p, &mut rng));
        props.push(p);
        draws.push(d);
    }
    let pots: Vec<UnitPotentials> = draws.iter().map(|d| dgp.potentials(d)).collect();
    let observed: Vec<&[f64]> = pots.iter().zip(&actions).map(|(p, &a)| p.surrogates[a].as_slice()).collect();
    let experiment = ExperimentalDataset::new(
        dgp.feature_table(&draws)?,
        actions.clone(),
        dgp.surrogate_table(&observed)?,
        props,
        k,
    )?;
    let outcomes = pots.iter().zip(&actions).map(|(p, &a)| p.outcomes[a]).collect();
    let oracle_policy = pots.iter().map(|p| argmax(&p.outcomes)).collect();
    let oracle_cates = pots.iter().map(|p| p.effects[1..].to_vec()).collect();

    let mut rng = rng_from_seed(derive_named_seed(cfg.seed, "historical"));
    let mut hdraws = Vec::with_capacity(cfg.n_historical);
    let mut hactions = Vec::with_capacity(cfg.n_historical);
    for _ in 0..cfg.n_historical {
        let d = draw_unit(cfg, &mut rng);
        let p = dgp.design_probabilities(&d.x);
        hactions.push(draw_action(&p, &mut rng));
        hdraws.push(d);
    }
    let hpots: Vec<UnitPotentials> = hdraws.iter().map(|d| dgp.potentials(d)).collect();
    let hobserved: Vec<&[f64]> = hpots.iter().zip(&hactions).map(|(p, &a)| p.surrogates[a].as_slice()).collect();
    let hy = hpots
        .iter()
        .zip(&hactions)
        .map(|(p, &a)| p.outcomes[a] + cfg.comparability_drift * p.surrogates[a][0])
        .collect();
    let historical = HistoricalDataset::new(dgp.feature_table(&hdraws)?, dgp.surrogate_table(&hobserved)?, hy)?;

    Ok(SimData {
        potential_outcomes: pots.iter().map(|p| p.outcomes.clone()).collect(),
        potential_surrogates: pots.into_iter().map(|p| p.surrogates).collect(),
        oracle_cates,
        oracle_policy,
        outcomes,
        historical_actions: hactions,
        historical,
        experiment,
        dgp,
    })
}

impl SimData {
    pub fn config(&self) -> &DgpConfig {
        &self.dgp.config
    }

    pub fn n_units(&self) -> usize {
        self.potential_outcomes.len()
    }

    /// Surrogate columns observed by horizon `h`: consumption and the first
    /// `h` months of revenue.
    pub fn horizon_columns(&self, h: usize) -> Result<Vec<String>> {
        let t = self.config().n_periods;
        if h == 0 || h > t {
            return Err(Error::arg(format!("horizon {h} outside the surrogate span 1..={t}")));
        }
        Ok(self.dgp.surrogate_names().into_iter().take(h + 1).collect())
    }

    /// Cumulative observed revenue over the first `h` months: the raw
    /// short-term proxy.
    pub fn proxy_outcome(&self, h: usize) -> Result<Vec<f64>> {
        let cols = self.horizon_columns(h)?;
        let s = self.experiment.surrogates();
        let mut total = vec![0.0; self.n_units()];
        for name in &cols[1..] {
            for (t, v) in total.iter_mut().zip(s.numeric(name)?) {
                *t += v;
            }
        }
        Ok(total)
    }

    /// Oracle per-unit effects `Y(a) - Y(0)` with a zero control column.
    pub fn effect_rows(&self) -> Vec<Vec<f64>> {
        self.oracle_cates
            .iter()
            .map(|r| std::iter::once(0.0).chain(r.iter().copied()).collect())
            .collect()
    }

    /// Write `experimental.csv`, `historical.csv`, `truth.csv` and
    /// `schema.json` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let schema = self.dgp.schema();
        write_experimental(&self.experiment, &schema, dir.join("experimental.csv"))?;
        write_historical(&self.historical, &schema, dir.join("historical.csv"))?;
        write_csv(&self.truth_table()?, dir.join("truth.csv"))?;
        let json = serde_json::to_string_pretty(&schema)?;
        let path = dir.join("schema.json");
        std::fs::write(&path, json).map_err(|e| Error::io(&path, e))
    }

    /// Ground-truth sidecar: `unit_id, y_a0.., oracle_action`.
    pub fn truth_table(&self) -> Result<Table> {
        let n = self.n_units();
        let mut cols = vec![("unit_id".to_string(), Column::Int((0..n as i64).collect()))];
        for a in 0..self.config().k_actions {
            cols.push((
                format!("y_a{a}"),
                Column::Float(self.potential_outcomes.iter().map(|r| r[a]).collect()),
            ));
        }
        cols.push((
            "oracle_action".into(),
            Column::Int(self.oracle_policy.iter().map(|&a| a as i64).collect()),
        ));
        Table::new(cols)
    }
}

/// Exact value `(1/N) sum_i sum_a pi(a | X_i) Y_i(a)` of a snapshot aligned
/// with the simulated units.
pub fn true_policy_value<T: Scalar>(sim: &SimData, target: &PolicySnapshot<T>) -> Result<f64> {
    let all: Vec<usize> = (0..sim.n_units()).collect();
    true_policy_value_on(sim, &all, target)
}

/// Exact value over the subset `units`; row `j` of `target` belongs to
/// `units[j]`.
pub fn true_policy_value_on<T: Scalar>(sim: &SimData, units: &[usize], target: &PolicySnapshot<T>) -> Result<f64> {
    let k = sim.config().k_actions;
    if target.n_units() != units.len() || target.n_actions() != k {
        return Err(Error::arg(format!(
            "snapshot is {}x{}, expected {}x{k}",
            target.n_units(),
            target.n_actions(),
            units.len()
        )));
    }
    if units.is_empty() {
        return Err(Error::arg("no units to evaluate"));
    }
    let mut total = 0.0;
    for (j, &i) in units.iter().enumerate() {
        let y = sim
            .potential_outcomes
            .get(i)
            .ok_or_else(|| Error::arg(format!("unit {i} outside the simulation")))?;
        total += (0..k).map(|a| target.prob(j, a).as_f64() * y[a]).sum::<f64>();
    }
    Ok(total / units.len() as f64)
}
