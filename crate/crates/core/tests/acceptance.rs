//! Acceptance criteria. Each test prints one PASS/FAIL line before asserting.

use std::io::Write as _;
use std::time::Instant;

use longhorizon::data::{ExperimentalDataset, Table};
use longhorizon::explore::{bts_policy, sample_actions, BtsConfig, DrPolicyPipeline, PolicyPipeline};
use longhorizon::learners::LearnerSpec;
use longhorizon::ope::{
    bootstrap_ci, fit_crossfit_outcome_model, value_dr, value_hajek, value_ht, EstimatorKind, OutcomeModelOptions,
    OutcomePredictions, PolicySnapshot,
};
use longhorizon::policy::{regret, regret_bound};
use longhorizon::rng::{derive_seed, rng_from_seed};
use longhorizon::sim::{
    churn_population, design_vs_uniform, generate, power_curve, true_policy_value, validation_on,
    Assignment, DgpConfig, EffectProfile, PowerConfig, SimData, ValidationOptions,
};
use longhorizon::surrogate::{ate_bias_bound, fit_surrogate_index, impute, SurrogateOptions};
use longhorizon::ope::{estimate_ate_att, Estimand};
use rand::Rng;
use rayon::prelude::*;

/// Writes straight to stderr so the line shows even when libtest captures
/// output of passing tests.
fn verdict(id: u32, pass: bool, detail: &str, started: Instant) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let line = format!("criterion {id}: {tag} ({detail}; {:.1}s)\n", started.elapsed().as_secs_f64());
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn column(sim: &SimData, name: &str) -> Vec<f64> {
    sim.experiment.features().numeric(name).unwrap()
}

/// Treat when `x1 > 0.3`.
fn threshold_policy(sim: &SimData) -> PolicySnapshot<f64> {
    let x1 = column(sim, "x1");
    let acts: Vec<usize> = x1.iter().map(|v| usize::from(*v > 0.3)).collect();
    PolicySnapshot::deterministic(&acts, 2).unwrap()
}

/// Treatment probability logistic in `x2`.
fn soft_policy(sim: &SimData) -> PolicySnapshot<f64> {
    let rows = column(sim, "x2")
        .iter()
        .map(|v| {
            let p = 1.0 / (1.0 + (-v).exp());
            vec![1.0 - p, p]
        })
        .collect();
    PolicySnapshot::stochastic(rows).unwrap()
}

fn index_at(sim: &SimData, horizon: usize) -> (ExperimentalDataset, Vec<f64>, longhorizon::data::HistoricalDataset) {
    let names = sim.horizon_columns(horizon).unwrap();
    let exp = sim.experiment.with_surrogates(sim.experiment.surrogates().select(&names).unwrap()).unwrap();
    let hist = sim.historical.with_surrogates(sim.historical.surrogates().select(&names).unwrap()).unwrap();
    let model = fit_surrogate_index(&hist, &LearnerSpec::ridge(0.0), &SurrogateOptions::default()).unwrap();
    let y = impute(&model, &exp).unwrap();
    (exp, y, hist)
}

// ---------------------------------------------------------------- 1

struct Instance {
    props: Vec<Vec<f64>>,
    actions: Vec<usize>,
    y: Vec<f64>,
    target: Vec<Vec<f64>>,
    mu: Vec<Vec<f64>>,
}

fn random_instance(rng: &mut impl Rng) -> Instance {
    let n = rng.random_range(1..=5);
    let k = rng.random_range(2..=3);
    let simplex = |rng: &mut dyn rand::RngCore, floor: f64| -> Vec<f64> {
        let w: Vec<f64> = (0..k).map(|_| floor + rng.random::<f64>()).collect();
        let z: f64 = w.iter().sum();
        w.iter().map(|v| v / z).collect()
    };
    let props: Vec<Vec<f64>> = (0..n).map(|_| simplex(rng, 0.05)).collect();
    let target = (0..n)
        .map(|_| {
            if rng.random_bool(0.5) {
                let mut one = vec![0.0; k];
                one[rng.random_range(0..k)] = 1.0;
                one
            } else {
                simplex(rng, 0.0)
            }
        })
        .collect();
    Instance {
        actions: (0..n).map(|_| rng.random_range(0..k)).collect(),
        y: (0..n).map(|_| rng.random_range(-20.0..20.0)).collect(),
        mu: (0..n).map(|_| (0..k).map(|_| rng.random_range(-20.0..20.0)).collect()).collect(),
        props,
        target,
    }
}

fn hand_instances() -> Vec<Instance> {
    vec![
        // Two units: DR value 15.5 by hand.
        Instance {
            props: vec![vec![0.75, 0.25], vec![0.5, 0.5]],
            actions: vec![1, 0],
            y: vec![10.0, 7.0],
            target: vec![vec![0.5, 0.5], vec![0.0, 1.0]],
            mu: vec![vec![10.0, 8.0], vec![6.0, 18.0]],
        },
        // Single unit, three actions, deterministic target on the observed action.
        Instance {
            props: vec![vec![0.2, 0.3, 0.5]],
            actions: vec![2],
            y: vec![4.0],
            target: vec![vec![0.0, 0.0, 1.0]],
            mu: vec![vec![1.0, 2.0, 3.0]],
        },
        // Target never matches the observed actions: HT and Hájek weights vanish.
        Instance {
            props: vec![vec![0.5, 0.5]; 3],
            actions: vec![0, 0, 0],
            y: vec![1.0, 2.0, 3.0],
            target: vec![vec![0.0, 1.0]; 3],
            mu: vec![vec![0.0, 5.0], vec![1.0, 6.0], vec![2.0, 7.0]],
        },
    ]
}

#[test]
fn criterion_01_estimators_match_brute_force() {
    let t0 = Instant::now();
    let mut rng = rng_from_seed(2024);
    let mut cases = hand_instances();
    cases.extend((0..500).map(|_| random_instance(&mut rng)));
    let mut worst: f64 = 0.0;
    let mut ok = true;
    let mut dr_hand = f64::NAN;
    for (c, inst) in cases.iter().enumerate() {
        let n = inst.y.len();
        let k = inst.props[0].len();
        let exp = ExperimentalDataset::new(Table::empty(n), inst.actions.clone(), Table::empty(n), inst.props.clone(), k)
            .unwrap();
        let target = PolicySnapshot::stochastic(inst.target.clone()).unwrap();
        let mu = OutcomePredictions::new(inst.mu.concat(), k).unwrap();

        // Brute force: importance weights and the score form of the DR value.
        let w: Vec<f64> = (0..n).map(|i| inst.target[i][inst.actions[i]] / inst.props[i][inst.actions[i]]).collect();
        let ht = (0..n).map(|i| w[i] * inst.y[i]).sum::<f64>() / n as f64;
        let sw: f64 = w.iter().sum();
        let hajek = (sw > 0.0).then(|| (0..n).map(|i| w[i] * inst.y[i]).sum::<f64>() / sw);
        let mut dr = 0.0;
        for i in 0..n {
            for a in 0..k {
                let hit = if inst.actions[i] == a { 1.0 } else { 0.0 };
                let gamma = inst.mu[i][a] + hit * (inst.y[i] - inst.mu[i][a]) / inst.props[i][a];
                dr += inst.target[i][a] * gamma;
            }
        }
        dr /= n as f64;
        if c == 0 {
            dr_hand = dr;
        }

        let got_ht = value_ht(&exp, &inst.y, &target).unwrap().point;
        let got_dr = value_dr(&exp, &inst.y, &target, &mu).unwrap().point;
        let got_hajek = value_hajek(&exp, &inst.y, &target);
        let mut err = (got_ht - ht).abs().max((got_dr - dr).abs());
        match (hajek, got_hajek) {
            (Some(h), Ok(g)) => err = err.max((g.point - h).abs()),
            (None, Err(_)) => {}
            _ => ok = false,
        }
        worst = worst.max(err);
    }
    ok &= worst <= 1e-12 && (dr_hand - 15.5).abs() <= 1e-12;
    verdict(1, ok, &format!("{} instances, max abs error {worst:.2e}", cases.len()), t0);
    assert!(ok);
}

// ---------------------------------------------------------------- 2

#[test]
fn criterion_02_index_and_outcome_values_agree() {
    let t0 = Instant::now();
    let reps = 200;
    let diffs: Vec<(f64, f64)> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let cfg = DgpConfig {
                seed: derive_seed(2, r),
                coefficient_seed: Some(2),
                ..DgpConfig::default()
            };
            let sim = generate(&cfg).unwrap();
            let (exp, y_index, _) = index_at(&sim, 3);
            let opts = OutcomeModelOptions::new(LearnerSpec::ridge(1.0), 3, derive_seed(3, r));
            let mu_i = fit_crossfit_outcome_model(&exp, &y_index, &opts).unwrap();
            let mu_y = fit_crossfit_outcome_model(&exp, &sim.outcomes, &opts).unwrap();
            let d = |p: &PolicySnapshot<f64>| {
                value_dr(&exp, &y_index, p, mu_i.predictions()).unwrap().point
                    - value_dr(&exp, &sim.outcomes, p, mu_y.predictions()).unwrap().point
            };
            (d(&threshold_policy(&sim)), d(&soft_policy(&sim)))
        })
        .collect();
    let (md, sd) = mean_se(&diffs.iter().map(|d| d.0).collect::<Vec<_>>());
    let (ms, ss) = mean_se(&diffs.iter().map(|d| d.1).collect::<Vec<_>>());
    let ok = md.abs() <= 3.0 * sd && ms.abs() <= 3.0 * ss;
    verdict(
        2,
        ok,
        &format!("deterministic {md:.4} (se {sd:.4}), stochastic {ms:.4} (se {ss:.4}) over {reps} reps"),
        t0,
    );
    assert!(ok);
}

// ---------------------------------------------------------------- 3

#[test]
fn criterion_03_index_policy_matches_outcome_policy() {
    let t0 = Instant::now();
    let sim = generate(&DgpConfig {
        seed: 303,
        ..DgpConfig::default()
    })
    .unwrap();
    let min_cate = sim.oracle_cates.iter().map(|r| r[0].abs()).fold(f64::INFINITY, f64::min);
    let opts = ValidationOptions {
        bootstrap_replicates: 100,
        seed: 31,
        ..ValidationOptions::default()
    };
    let rep = validation_on(&sim, &[3], &opts).unwrap();
    let h = &rep.horizons[0];
    let gain = rep.value_oracle_policy - h.value_status_quo;
    let regret = rep.value_oracle_policy - h.value_index_policy;
    let ok = min_cate >= 1.0 && h.agreement_rate >= 0.95 && regret <= 0.05 * gain;
    verdict(
        3,
        ok,
        &format!(
            "agreement {:.4}, regret {regret:.4} vs 5% of gain {:.4}, min |CATE| {min_cate:.3}",
            h.agreement_rate,
            0.05 * gain
        ),
        t0,
    );
    assert!(ok);
}

// ---------------------------------------------------------------- 4

#[test]
fn criterion_04_bias_and_regret_bounds() {
    let t0 = Instant::now();
    let deltas = [0.0, 0.25, 0.5, 1.0, 2.0];
    let mut ok = true;
    let mut lines = Vec::new();
    for (j, &delta) in deltas.iter().enumerate() {
        let cfg = DgpConfig {
            surrogacy_violation: delta,
            effect_profile: EffectProfile::ContinuousNearZero,
            seed: 400 + j as u64,
            ..DgpConfig::default()
        };
        let sim = generate(&cfg).unwrap();
        let (exp, y_index, hist) = index_at(&sim, 3);
        let true_ate = sim.oracle_cates.iter().map(|r| r[0]).sum::<f64>() / sim.n_units() as f64;
        let est = estimate_ate_att(&exp, &y_index, (1, 0), Estimand::Ate).unwrap().point;
        let bias = (est - true_ate).abs();
        let bound = ate_bias_bound(&hist, &exp).unwrap().bound;

        let xs: Vec<Vec<f64>> = (1..=cfg.dim_x).map(|c| column(&sim, &format!("x{c}"))).collect();
        let mut tilde = Vec::new();
        let mut bbar = Vec::new();
        for i in 0..sim.n_units() {
            let x: Vec<f64> = xs.iter().map(|c| c[i]).collect();
            let o = sim.dgp.index_oracle(&x, 3).unwrap();
            tilde.push(o.index_effect);
            bbar.push(o.bias_bound);
        }
        let policy: Vec<usize> = tilde.iter().map(|t| usize::from(*t > 0.0)).collect();
        let r = regret(&sim.effect_rows(), &policy, &sim.oracle_policy).unwrap().mean_regret;
        let rb = regret_bound(&bbar, &tilde).unwrap();
        let cell = bias <= bound && r <= rb;
        ok &= cell;
        lines.push(format!("d={delta}: bias {bias:.4}<=b {bound:.4}, regret {r:.4}<= {rb:.4}"));
    }
    verdict(4, ok, &lines.join("; "), t0);
    assert!(ok);
}

// ---------------------------------------------------------------- 5

#[test]
fn criterion_05_dr_is_more_efficient_than_hajek() {
    let t0 = Instant::now();
    let seeds = 20;
    let reps = 30;
    let mut ratios: Vec<f64> = (0..seeds)
        .into_par_iter()
        .map(|s| {
            let est: Vec<(f64, f64)> = (0..reps)
                .map(|r| {
                    let cfg = DgpConfig {
                        n_units: 2_000,
                        n_historical: 2,
                        seed: derive_seed(500 + s, r),
                        coefficient_seed: Some(500 + s),
                        ..DgpConfig::default()
                    };
                    let sim = generate(&cfg).unwrap();
                    let target = threshold_policy(&sim);
                    let opts = OutcomeModelOptions::new(LearnerSpec::ridge(1.0), 3, derive_seed(s, r));
                    let mu = fit_crossfit_outcome_model(&sim.experiment, &sim.outcomes, &opts).unwrap();
                    (
                        value_dr(&sim.experiment, &sim.outcomes, &target, mu.predictions()).unwrap().point,
                        value_hajek(&sim.experiment, &sim.outcomes, &target).unwrap().point,
                    )
                })
                .collect();
            let var = |f: fn(&(f64, f64)) -> f64| {
                let v: Vec<f64> = est.iter().map(f).collect();
                let (_, se) = mean_se(&v);
                se * se * v.len() as f64
            };
            var(|e| e.0) / var(|e| e.1)
        })
        .collect();
    ratios.sort_by(f64::total_cmp);
    let median = 0.5 * (ratios[9] + ratios[10]);
    let ok = median <= 1.0;
    verdict(5, ok, &format!("median var(DR)/var(Hajek) {median:.3} over {seeds} seeds"), t0);
    assert!(ok);
}

// ---------------------------------------------------------------- 6

#[test]
fn criterion_06_bootstrap_coverage() {
    let t0 = Instant::now();
    let reps = 200;
    let covered: Vec<bool> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let cfg = DgpConfig {
                n_units: 2_000,
                n_historical: 2,
                seed: derive_seed(600, r),
                coefficient_seed: Some(600),
                ..DgpConfig::default()
            };
            let sim = generate(&cfg).unwrap();
            let target = threshold_policy(&sim);
            let opts = OutcomeModelOptions::new(LearnerSpec::ridge(1.0), 3, derive_seed(601, r));
            let mu = fit_crossfit_outcome_model(&sim.experiment, &sim.outcomes, &opts).unwrap();
            let b = bootstrap_ci(
                EstimatorKind::Dr,
                &sim.experiment,
                &sim.outcomes,
                &target,
                Some(mu.predictions()),
                500,
                0.95,
                derive_seed(602, r),
            )
            .unwrap();
            let truth = true_policy_value(&sim, &target).unwrap();
            b.estimate.ci_low.unwrap() <= truth && truth <= b.estimate.ci_high.unwrap()
        })
        .collect();
    let rate = covered.iter().filter(|c| **c).count() as f64 / reps as f64;
    let ok = rate >= 0.90;
    verdict(6, ok, &format!("coverage {rate:.3} over {reps} replications"), t0);
    assert!(ok);
}

// ---------------------------------------------------------------- 7

#[test]
fn criterion_07_power_curve() {
    let t0 = Instant::now();
    let pop = churn_population(100_000, 700);
    let taus = [0.0, 0.05, 0.1, 0.15, 0.2, 0.3, 0.5, 0.75, 1.0];
    let base = PowerConfig::new(0.01, 0.0, Assignment::Design);
    let curve = power_curve(&pop.base_outcomes, &pop.risk, &base, &taus, 701).unwrap();
    let powers: Vec<f64> = curve.iter().map(|c| c.power).collect();
    let se = (0.05f64 * 0.95 / 100.0).sqrt();
    let calibrated = (powers[0] - 0.05).abs() <= 3.0 * se;
    let monotone = powers.windows(2).all(|w| w[1] >= w[0]);
    let threshold = taus.iter().zip(&powers).find(|(_, p)| **p >= 0.8).map(|(t, _)| *t);
    let ok = calibrated && monotone && matches!(threshold, Some(t) if t > 0.0);
    verdict(
        7,
        ok,
        &format!("power {powers:?} at tau {taus:?}; 80% reached at tau {threshold:?}"),
        t0,
    );
    assert!(ok);
}

// ---------------------------------------------------------------- 8

#[test]
fn criterion_08_design_beats_uniform() {
    let t0 = Instant::now();
    let risk = churn_population(50_000, 800).risk;
    let mut ok = true;
    let mut lines = Vec::new();
    for (j, q) in [0.0, 0.5, 1.0].into_iter().enumerate() {
        let c = design_vs_uniform(&risk, q, 1_000, 801 + j as u64).unwrap();
        let lower = c.median_churn_difference <= 0.0;
        let d_ok = c.design.mean_ate_error.abs() <= 3.0 * c.design.ate_error_se;
        let u_ok = c.uniform.mean_ate_error.abs() <= 3.0 * c.uniform.ate_error_se;
        ok &= lower && d_ok && u_ok;
        lines.push(format!(
            "q_neg={q}: median churn diff {:.3e}, ATE err design {:.2e} (se {:.2e}) uniform {:.2e} (se {:.2e})",
            c.median_churn_difference,
            c.design.mean_ate_error,
            c.design.ate_error_se,
            c.uniform.mean_ate_error,
            c.uniform.ate_error_se
        ));
    }
    verdict(8, ok, &lines.join("; "), t0);
    assert!(ok);
}

// ---------------------------------------------------------------- 9

fn bts_fixture(k: usize, seed: u64) -> (bool, String) {
    let cfg = DgpConfig {
        n_units: 300,
        n_historical: 2,
        k_actions: k,
        seed,
        ..DgpConfig::default()
    };
    let sim = generate(&cfg).unwrap();
    let pipeline = DrPolicyPipeline {
        outcome: OutcomeModelOptions::new(LearnerSpec::ridge(1.0), 3, 0),
        classifier: LearnerSpec::CartTree {
            max_depth: 2,
            min_samples_leaf: 10,
        },
    };
    let bts = BtsConfig {
        replicates: 40,
        floor: 0.05,
        ceiling: 0.9,
        seed: seed + 1,
    };
    let res = bts_policy(&sim.experiment, &sim.outcomes, &pipeline, &bts).unwrap();
    let n = sim.n_units();

    // Sequential recount of every replicate's votes.
    let mut tallies = vec![vec![0usize; k]; n];
    for r in 0..bts.replicates {
        let s = derive_seed(bts.seed, r as u64);
        let mut rng = rng_from_seed(s);
        let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let y: Vec<f64> = idx.iter().map(|&i| sim.outcomes[i]).collect();
        let policy = pipeline.learn(&sim.experiment.take_rows(&idx), &y, derive_seed(s, 1)).unwrap();
        for (i, a) in policy.actions(sim.experiment.features()).unwrap().into_iter().enumerate() {
            tallies[i][a] += 1;
        }
    }
    let mut ok = res.kept_replicates == bts.replicates;
    let mut max_sum_err: f64 = 0.0;
    for i in 0..n {
        let row = res.snapshot.row(i);
        max_sum_err = max_sum_err.max((row.iter().sum::<f64>() - 1.0).abs());
        ok &= row.iter().all(|p| *p >= bts.floor - 1e-12 && *p <= bts.ceiling + 1e-12);
        for a in 0..k {
            ok &= res.raw[i][a] == tallies[i][a] as f64 / bts.replicates as f64;
        }
    }
    ok &= max_sum_err <= 1e-9;
    let sampled = sample_actions(&res.snapshot, seed + 2);
    let fed_back = ExperimentalDataset::new(
        sim.experiment.features().clone(),
        sampled,
        sim.experiment.surrogates().clone(),
        res.snapshot.rows(),
        k,
    );
    ok &= fed_back.is_ok();
    (ok, format!("K={k}: max |row sum - 1| {max_sum_err:.1e}"))
}

#[test]
fn criterion_09_bts_contract() {
    let t0 = Instant::now();
    let (a, da) = bts_fixture(2, 900);
    let (b, db) = bts_fixture(3, 901);
    let ok = a && b;
    verdict(9, ok, &format!("{da}; {db}"), t0);
    assert!(ok);
}

// ---------------------------------------------------------------- 10

#[test]
fn criterion_10_validation_harness() {
    let t0 = Instant::now();
    let opts = ValidationOptions {
        bootstrap_replicates: 100,
        seed: 1_001,
        ..ValidationOptions::default()
    };
    let cfg = DgpConfig {
        seed: 1_000,
        ..DgpConfig::default()
    };
    let sim = generate(&cfg).unwrap();
    let full = validation_on(&sim, &[cfg.n_periods], &opts).unwrap();
    let f = &full.horizons[0];
    let degenerate = f.value_index_policy == f.value_outcome_policy;

    let adversarial = DgpConfig {
        promo_cost: 3.0,
        seed: 1_002,
        ..DgpConfig::default()
    };
    let sim = generate(&adversarial).unwrap();
    let rep = validation_on(&sim, &[adversarial.promo_periods], &opts).unwrap();
    let h = &rep.horizons[0];
    let contrast = h.value_index_policy > h.value_proxy_policy;
    let ok = degenerate && contrast;
    verdict(
        10,
        ok,
        &format!(
            "full horizon {:.6} vs {:.6}; adversarial index {:.4} > proxy {:.4} (status quo {:.4})",
            f.value_index_policy, f.value_outcome_policy, h.value_index_policy, h.value_proxy_policy, h.value_status_quo
        ),
        t0,
    );
    assert!(ok);
}
