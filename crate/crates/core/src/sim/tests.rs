use rand::Rng as _;

use super::*;
use crate::error::Error;
use crate::learners::LearnerSpec;
use crate::ope::PolicySnapshot;
use crate::rng::rng_from_seed;
use crate::surrogate::{fit_surrogate_index, impute_tables, SurrogateOptions};

fn small(n: usize) -> DgpConfig {
    DgpConfig {
        n_units: n,
        n_historical: n,
        seed: 11,
        ..DgpConfig::default()
    }
}

#[test]
fn realized_rows_match_the_schedule() {
    let cfg = DgpConfig {
        k_actions: 3,
        design: DesignKind::Covariate,
        ..small(300)
    };
    let sim = generate(&cfg).unwrap();
    let names = sim.dgp.surrogate_names();
    let s = sim.experiment.surrogates();
    for (i, &a) in sim.experiment.actions().iter().enumerate() {
        assert_eq!(sim.outcomes[i], sim.potential_outcomes[i][a]);
        for (j, name) in names.iter().enumerate() {
            assert_eq!(s.numeric(name).unwrap()[i], sim.potential_surrogates[i][a][j]);
        }
        let y = &sim.potential_outcomes[i];
        let best = sim.oracle_policy[i];
        assert!(y.iter().all(|v| *v <= y[best]));
        assert_eq!(sim.oracle_cates[i].len(), 2);
    }
}

#[test]
fn long_run_outcome_is_total_revenue_less_the_direct_term() {
    let cfg = DgpConfig {
        surrogacy_violation: 0.7,
        ..small(200)
    };
    let sim = generate(&cfg).unwrap();
    for i in 0..sim.n_units() {
        for a in 0..2 {
            let s = &sim.potential_surrogates[i][a];
            let total: f64 = s[1..].iter().sum();
            let want = total - 0.7 * a as f64;
            assert!((sim.potential_outcomes[i][a] - want).abs() < 1e-9);
        }
    }
}

#[test]
fn null_effects_make_every_policy_equal() {
    let cfg = DgpConfig {
        effect_profile: EffectProfile::Null,
        k_actions: 3,
        ..small(200)
    };
    let sim = generate(&cfg).unwrap();
    assert!(sim.oracle_cates.iter().flatten().all(|c| *c == 0.0));
    let v0 = true_policy_value(&sim, &PolicySnapshot::<f64>::constant(200, 3, 0).unwrap()).unwrap();
    let mut rng = rng_from_seed(4);
    for _ in 0..10 {
        let acts: Vec<usize> = (0..200).map(|_| rng.random_range(0..3)).collect();
        let v = true_policy_value(&sim, &PolicySnapshot::<f64>::deterministic(&acts, 3).unwrap()).unwrap();
        assert_eq!(v, v0);
    }
}

#[test]
fn constant_shift_gives_ate_of_exactly_two() {
    let cfg = DgpConfig {
        effect_profile: EffectProfile::Constant { effect: 2.0 },
        ..small(500)
    };
    let sim = generate(&cfg).unwrap();
    let ate = sim.oracle_cates.iter().map(|r| r[0]).sum::<f64>() / 500.0;
    assert_eq!(ate, 2.0);
}

#[test]
fn bimodal_effects_respect_the_gap() {
    let sim = generate(&small(1000)).unwrap();
    assert!(sim.oracle_cates.iter().all(|r| r[0].abs() >= 1.0));
    let treated = sim.oracle_policy.iter().filter(|a| **a == 1).count();
    assert!(treated > 350 && treated < 650);
}

#[test]
fn baseline_policy_values() {
    let cfg = DgpConfig {
        k_actions: 3,
        ..small(400)
    };
    let sim = generate(&cfg).unwrap();
    let n = 400.0;
    let none = true_policy_value(&sim, &PolicySnapshot::<f64>::constant(400, 3, 0).unwrap()).unwrap();
    let mean0 = sim.potential_outcomes.iter().map(|r| r[0]).sum::<f64>() / n;
    assert!((none - mean0).abs() < 1e-10);
    let uni = true_policy_value(&sim, &PolicySnapshot::<f64>::uniform(400, 3).unwrap()).unwrap();
    let row_means = sim.potential_outcomes.iter().map(|r| r.iter().sum::<f64>() / 3.0).sum::<f64>() / n;
    assert!((uni - row_means).abs() < 1e-10);

    let oracle = PolicySnapshot::<f64>::deterministic(&sim.oracle_policy, 3).unwrap();
    let best = true_policy_value(&sim, &oracle).unwrap();
    let mut rng = rng_from_seed(8);
    for _ in 0..100 {
        let rows: Vec<Vec<f64>> = (0..400)
            .map(|_| {
                let w: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
                let z: f64 = w.iter().sum();
                w.iter().map(|v| v / z).collect()
            })
            .collect();
        let v = true_policy_value(&sim, &PolicySnapshot::stochastic(rows).unwrap()).unwrap();
        assert!(v <= best);
    }
    assert!(true_policy_value(&sim, &PolicySnapshot::<f64>::constant(3, 3, 0).unwrap()).is_err());
}

#[test]
fn generation_is_reproducible() {
    let cfg = DgpConfig {
        design: DesignKind::Covariate,
        ..small(200)
    };
    let a = generate(&cfg).unwrap();
    let b = generate(&cfg).unwrap();
    assert_eq!(a.experiment, b.experiment);
    assert_eq!(a.historical, b.historical);
    assert_eq!(a.potential_outcomes, b.potential_outcomes);
    let c = generate(&DgpConfig { seed: 12, ..cfg }).unwrap();
    assert_ne!(a.potential_outcomes, c.potential_outcomes);
}

#[test]
fn infeasible_configs_are_rejected() {
    let bad = [
        DgpConfig { k_actions: 1, ..small(10) },
        DgpConfig { dim_x: 1, ..small(10) },
        DgpConfig { promo_periods: 9, ..small(10) },
        DgpConfig { surrogacy_violation: -1.0, ..small(10) },
        DgpConfig {
            noise: NoiseScales {
                consumption: 0.0,
                revenue: 1.0,
            },
            ..small(10)
        },
    ];
    for cfg in bad {
        assert!(matches!(generate(&cfg), Err(Error::Argument(_))), "{cfg:?}");
    }
}

#[test]
fn horizon_outside_span_is_an_error() {
    let sim = generate(&small(50)).unwrap();
    assert!(sim.horizon_columns(0).is_err());
    assert!(sim.horizon_columns(7).is_err());
    assert_eq!(sim.horizon_columns(2).unwrap(), vec!["consumption", "rev_1", "rev_2"]);
    assert!(validation_on(&sim, &[7], &ValidationOptions::default()).is_err());
}

#[test]
fn design_probabilities_are_positive_and_normalized() {
    let cfg = DgpConfig {
        k_actions: 4,
        design: DesignKind::Covariate,
        ..small(300)
    };
    let sim = generate(&cfg).unwrap();
    for i in 0..300 {
        let row = sim.experiment.propensity_row(i);
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(row.iter().all(|p| *p >= 0.5 / 4.0));
    }
}

#[test]
fn historical_index_transfers_to_the_experiment() {
    // Same S -> Y law in both samples: out-of-sample R2 on the experiment
    // matches the in-sample R2 on the historical data.
    let sim = generate(&small(20_000)).unwrap();
    let model = fit_surrogate_index(&sim.historical, &LearnerSpec::ridge(0.0), &SurrogateOptions::default()).unwrap();
    let pred = impute_tables(&model, sim.experiment.surrogates(), sim.experiment.features()).unwrap();
    let y = &sim.outcomes;
    let m = y.iter().sum::<f64>() / y.len() as f64;
    let sst: f64 = y.iter().map(|v| (v - m) * (v - m)).sum();
    let ssr: f64 = y.iter().zip(&pred).map(|(a, b)| (a - b) * (a - b)).sum();
    let r2_out = 1.0 - ssr / sst;
    assert!((r2_out - model.r2_in_sample).abs() < 0.01, "{r2_out} vs {}", model.r2_in_sample);

    // With drift the historical mapping differs and the gap opens up.
    let drifted = generate(&DgpConfig {
        comparability_drift: 1.0,
        ..small(20_000)
    })
    .unwrap();
    let model = fit_surrogate_index(&drifted.historical, &LearnerSpec::ridge(0.0), &SurrogateOptions::default()).unwrap();
    let pred = impute_tables(&model, drifted.experiment.surrogates(), drifted.experiment.features()).unwrap();
    let bias = pred.iter().zip(&drifted.outcomes).map(|(p, y)| p - y).sum::<f64>() / 20_000.0;
    assert!(bias > 0.5);
}

#[test]
fn index_oracle_recovers_effects_when_surrogacy_holds() {
    let sim = generate(&small(200)).unwrap();
    let x: Vec<Vec<f64>> = (1..=4).map(|j| sim.experiment.features().numeric(&format!("x{j}")).unwrap()).collect();
    for i in 0..200 {
        let xi: Vec<f64> = x.iter().map(|c| c[i]).collect();
        for h in 2..=6 {
            let o = sim.dgp.index_oracle(&xi, h).unwrap();
            assert!((o.index_effect - o.effect).abs() < 1e-9, "h={h}: {o:?}");
            assert!((o.effect - sim.oracle_cates[i][0]).abs() < 1e-12);
        }
        // Before the promotion ends the index misses part of the effect.
        let o = sim.dgp.index_oracle(&xi, 1).unwrap();
        assert!((o.index_effect - o.effect).abs() > 1e-6);
        assert!((o.index_effect - o.effect).abs() <= o.bias_bound + 1e-12);
    }
}

#[test]
fn violation_bias_grows_and_stays_bounded() {
    let deltas = [0.0, 0.25, 0.5, 1.0, 2.0];
    let mut last = -1.0;
    for d in deltas {
        let cfg = DgpConfig {
            surrogacy_violation: d,
            ..small(100)
        };
        let sim = generate(&cfg).unwrap();
        let x: Vec<Vec<f64>> = (1..=4).map(|j| sim.experiment.features().numeric(&format!("x{j}")).unwrap()).collect();
        let mut bias = 0.0;
        for i in 0..100 {
            let xi: Vec<f64> = x.iter().map(|c| c[i]).collect();
            let o = sim.dgp.index_oracle(&xi, 3).unwrap();
            let b = (o.index_effect - o.effect).abs();
            assert!(b <= o.bias_bound + 1e-12);
            bias += b;
        }
        assert!(bias > last);
        last = bias;
    }
}

#[test]
fn small_violation_preserves_effect_signs() {
    let cfg = DgpConfig {
        surrogacy_violation: 0.2,
        ..small(500)
    };
    let sim = generate(&cfg).unwrap();
    let x: Vec<Vec<f64>> = (1..=4).map(|j| sim.experiment.features().numeric(&format!("x{j}")).unwrap()).collect();
    for i in 0..500 {
        let xi: Vec<f64> = x.iter().map(|c| c[i]).collect();
        let o = sim.dgp.index_oracle(&xi, 3).unwrap();
        assert_eq!(o.index_effect > 0.0, o.effect > 0.0);
    }
}

#[test]
fn export_writes_sidecar() {
    let sim = generate(&small(30)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    sim.write(dir.path()).unwrap();
    let truth = std::fs::read_to_string(dir.path().join("truth.csv")).unwrap();
    assert_eq!(truth.lines().next().unwrap(), "unit_id,y_a0,y_a1,oracle_action");
    assert_eq!(truth.lines().count(), 31);
    let schema: crate::data::DatasetSchema =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("schema.json")).unwrap()).unwrap();
    let exp = crate::data::load_experimental(dir.path().join("experimental.csv"), &schema).unwrap();
    assert_eq!(exp, sim.experiment);
}

#[test]
fn degenerate_horizon_reproduces_the_outcome_policy() {
    let sim = generate(&small(3_000)).unwrap();
    let opts = ValidationOptions {
        bootstrap_replicates: 50,
        ..ValidationOptions::default()
    };
    let r = validation_on(&sim, &[6], &opts).unwrap();
    let h = &r.horizons[0];
    assert_eq!(h.value_index_policy, h.value_outcome_policy);
    assert_eq!(h.agreement_rate, 1.0);
    assert_eq!(h.surrogate_sets.len(), 3);
    assert!(h.value_index_policy > h.value_status_quo);
}
