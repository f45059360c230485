use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

fn sim_config(n: usize, seed: u64) -> Value {
    json!({
        "seed": seed,
        "data": {"simulate": {
            "n_units": n, "n_historical": n, "k_actions": 2, "dim_x": 4, "n_periods": 4,
            "promo_periods": 2, "promo_cost": 0.5,
            "effect_profile": {"type": "bimodal_gap", "min_gap": 1.0},
            "surrogacy_violation": 0.0, "confounder_strength": 0.3, "comparability_drift": 0.0,
            "noise": {"consumption": 0.3, "revenue": 0.5}, "design": "uniform", "seed": 0
        }},
        "evaluation": {"replicates": 120},
        "bts": {"replicates": 8}
    })
}

fn write_config(dir: &Path, cfg: &Value) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    p
}

fn run(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_longhorizon"));
    cmd.args(args).env("RUST_LOG", "warn");
    match threads {
        Some(t) => cmd.env("LONGHORIZON_THREADS", t),
        None => cmd.env_remove("LONGHORIZON_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args, None);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

/// Columns of a CSV keyed by header; every cell parsed as f64.
fn read_csv(p: &Path) -> HashMap<String, Vec<f64>> {
    let text = std::fs::read_to_string(p).unwrap();
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    let mut cols: HashMap<String, Vec<f64>> = header.iter().map(|h| (h.clone(), Vec::new())).collect();
    for line in lines {
        for (h, cell) in header.iter().zip(line.split(',')) {
            if let Ok(v) = cell.parse::<f64>() {
                cols.get_mut(h).unwrap().push(v);
            }
        }
    }
    cols
}

#[test]
fn pipeline_writes_manifest_with_hashed_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &sim_config(1500, 5));
    let out = dir.path().join("run");
    ok(&["--config", s(&cfg), "--out", s(&out), "run"]);

    let manifest = read_json(&out.join("manifest.json"));
    assert_eq!(manifest["command"], "run");
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    let names: Vec<&str> = manifest["artifacts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| a["name"].as_str().unwrap())
        .collect();
    for want in ["surrogate_model.json", "imputed.csv", "policy.json", "evaluation.json", "bts_assignment.csv"] {
        assert!(names.contains(&want), "manifest lacks {want}: {names:?}");
    }
    for a in manifest["artifacts"].as_array().unwrap() {
        let bytes = std::fs::read(out.join(a["path"].as_str().unwrap())).unwrap();
        let digest: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(a["sha256"], digest.as_str());
    }
    let stages: Vec<&str> = manifest["timings"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| t["stage"].as_str().unwrap())
        .collect();
    assert_eq!(stages, ["data", "surrogate", "impute", "policy", "evaluate", "bts"]);
    assert!(std::fs::read_dir(&out)
        .unwrap()
        .all(|e| !e.unwrap().file_name().to_string_lossy().ends_with(".partial")));

    let ev = read_json(&out.join("evaluation.json"));
    assert_eq!(ev["target"]["B"], 120);
    assert_eq!(ev["treat_none"]["B"], 120);
    assert_eq!(ev["n_units"], 300);
    for key in ["target", "treat_none"] {
        let r = &ev[key];
        let (lo, hi, pt) = (r["ci"][0].as_f64().unwrap(), r["ci"][1].as_f64().unwrap(), r["point"].as_f64().unwrap());
        assert!(lo <= pt && pt <= hi, "{key}: {lo} {pt} {hi}");
    }
    let diff = ev["target"]["point"].as_f64().unwrap() - ev["treat_none"]["point"].as_f64().unwrap();
    assert_eq!(ev["difference"].as_f64().unwrap(), diff);
    assert!(ev["truth"]["oracle"].as_f64().unwrap() >= ev["truth"]["target"].as_f64().unwrap());

    // Assignment rows are distributions inside the clip bounds.
    let bts = read_csv(&out.join("bts_assignment.csv"));
    assert_eq!(bts["p0"].len(), 1500);
    for (p0, p1) in bts["p0"].iter().zip(&bts["p1"]) {
        assert!((p0 + p1 - 1.0).abs() < 1e-9);
        assert!((0.05 - 1e-12..=0.95 + 1e-12).contains(p0));
    }
}

#[test]
fn same_config_gives_identical_outputs_at_any_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &sim_config(1200, 9));
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (out, threads) in [(&a, "1"), (&b, "4")] {
        let o = run(&["--config", s(&cfg), "--out", s(out), "run"], Some(threads));
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["evaluation.json", "policy.json", "imputed.csv", "bts_assignment.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn seed_flag_overrides_config_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &sim_config(600, 1));
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&["--config", s(&cfg), "--out", s(&a), "simulate"]);
    ok(&["--config", s(&cfg), "--out", s(&b), "--seed", "2", "simulate"]);
    assert_ne!(
        std::fs::read(a.join("experimental.csv")).unwrap(),
        std::fs::read(b.join("experimental.csv")).unwrap()
    );
    assert_eq!(read_json(&b.join("manifest.json"))["seed"], 2);
}

#[test]
fn stage_subcommands_reproduce_the_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &sim_config(1000, 3));
    let full = dir.path().join("full");
    let st = dir.path().join("stages");
    ok(&["--config", s(&cfg), "--out", s(&full), "run"]);
    let c = ["--config", s(&cfg), "--out", s(&st)];
    ok(&[&c[..], &["fit-surrogate"]].concat());
    let model = st.join("surrogate_model.json");
    ok(&[&c[..], &["impute", "--model", s(&model)]].concat());
    let imputed = st.join("imputed.csv");
    ok(&[&c[..], &["learn-policy", "--outcomes", s(&imputed)]].concat());
    let policy = st.join("policy.json");
    ok(&[&c[..], &["evaluate", "--policy", s(&policy), "--outcomes", s(&imputed)]].concat());
    ok(&[&c[..], &["bts-assign", "--outcomes", s(&imputed)]].concat());
    for f in ["surrogate_model.json", "imputed.csv", "policy.json", "evaluation.json", "bts_assignment.csv"] {
        assert_eq!(std::fs::read(full.join(f)).unwrap(), std::fs::read(st.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn simulated_files_feed_a_file_backed_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &sim_config(800, 4));
    let sim = dir.path().join("sim");
    ok(&["--config", s(&cfg), "--out", s(&sim), "simulate"]);
    let files = json!({
        "seed": 4,
        "data": {"files": {
            "experimental": sim.join("experimental.csv"),
            "historical": sim.join("historical.csv"),
            "schema": sim.join("schema.json")
        }},
        "evaluation": {"replicates": 100},
        "bts": {"replicates": 4}
    });
    let fcfg = dir.path().join("files.json");
    std::fs::write(&fcfg, files.to_string()).unwrap();
    let out = dir.path().join("out");
    ok(&["--config", s(&fcfg), "--out", s(&out), "run"]);
    let ev = read_json(&out.join("evaluation.json"));
    assert!(ev.get("truth").is_none());
    assert!(ev["target"]["point"].as_f64().unwrap().is_finite());
}

#[test]
fn missing_csv_is_a_config_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nowhere").join("experimental.csv");
    let cfg = json!({"data": {"files": {
        "experimental": missing, "historical": "h.csv", "schema": "s.json"}}});
    let p = dir.path().join("c.json");
    std::fs::write(&p, cfg.to_string()).unwrap();
    let out = dir.path().join("out");
    let o = run(&["--config", s(&p), "--out", s(&out), "run"], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains(s(&missing)));
    // Nothing was computed or written.
    assert!(!out.exists());
}

#[test]
fn exit_codes_follow_error_classes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &sim_config(400, 1));

    let o = run(&["--config", s(&cfg), "power"], Some("zero"));
    assert_eq!(o.status.code(), Some(2));

    let mut bad = sim_config(400, 1);
    bad["evaluation"]["test_fraction"] = json!(1.5);
    let b = dir.path().join("bad.json");
    std::fs::write(&b, bad.to_string()).unwrap();
    assert_eq!(run(&["--config", s(&b), "run"], None).status.code(), Some(2));

    // Outcome file with the wrong number of rows is a data error.
    let short = dir.path().join("short.csv");
    std::fs::write(&short, "unit_id,y_tilde\n0,1.0\n1,2.0\n").unwrap();
    let out = dir.path().join("o");
    let o = run(&["--config", s(&cfg), "--out", s(&out), "learn-policy", "--outcomes", s(&short)], None);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));

    // A non-numeric cell is a data error too.
    let broken = dir.path().join("broken.csv");
    let mut text = String::from("unit_id,y_tilde\n");
    for i in 0..400 {
        text.push_str(&format!("{i},{}\n", if i == 7 { "abc" } else { "1.0" }));
    }
    std::fs::write(&broken, text).unwrap();
    let o = run(&["--config", s(&cfg), "--out", s(&out), "learn-policy", "--outcomes", s(&broken)], None);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn power_with_no_effect_rejects_at_about_alpha() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p");
    ok(&["--out", s(&out), "power", "--taus", "0", "--reps", "400", "--q", "0.05"]);
    let t = read_csv(&out.join("power.csv"));
    let power = t["power"][0];
    let se = (0.05_f64 * 0.95 / 400.0).sqrt();
    assert!((power - 0.05).abs() <= 3.0 * se, "power {power} at tau 0");
    assert_eq!(t["n_reps"][0], 400.0);
}

#[test]
fn validate_writes_four_panels() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &sim_config(2000, 8));
    let out = dir.path().join("v");
    ok(&["--config", s(&cfg), "--out", s(&out), "validate", "--horizons", "1,4"]);
    let a = read_csv(&out.join("panel_a_att.csv"));
    assert_eq!(a["horizon"], [1.0, 4.0]);
    for i in 0..2 {
        assert!(a["att_index_low"][i] <= a["att_index"][i] && a["att_index"][i] <= a["att_index_high"][i]);
    }
    let b = read_csv(&out.join("panel_b_policy_values.csv"));
    for i in 0..2 {
        assert!(b["oracle_policy"][i] >= b["index_policy"][i]);
        assert!(b["oracle_policy"][i] >= b["status_quo"][i]);
    }
    let c = read_csv(&out.join("panel_c_value_difference.csv"));
    for (i, d) in c["true_difference"].iter().enumerate() {
        let want = b["index_policy"][i] - b["outcome_policy"][i];
        assert!((d - want).abs() < 1e-12);
    }
    let d = read_csv(&out.join("panel_d_surrogate_sets.csv"));
    assert_eq!(d["horizon"].len(), 6);
    let report = read_json(&out.join("validation.json"));
    assert_eq!(report["horizons"].as_array().unwrap().len(), 2);
}

#[test]
fn treat_none_evaluation_is_the_control_mean() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &sim_config(900, 6));
    let sim = dir.path().join("sim");
    ok(&["--config", s(&cfg), "--out", s(&sim), "simulate"]);
    let out = dir.path().join("e");
    let y_path = sim.join("outcomes.csv");
    ok(&[
        "--config", s(&cfg), "--out", s(&out), "evaluate", "--policy", "treat-none", "--outcomes", s(&y_path),
        "--column", "y", "--estimator", "hajek", "--all-units",
    ]);
    let ev = read_json(&out.join("evaluation.json"));

    // Hajek under treat-none: control outcomes weighted by 1/p0.
    let exp = read_csv(&sim.join("experimental.csv"));
    let y = read_csv(&y_path)["y"].clone();
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..y.len() {
        if exp["action"][i] == 0.0 {
            num += y[i] / exp["p0"][i];
            den += 1.0 / exp["p0"][i];
        }
    }
    let point = ev["target"]["point"].as_f64().unwrap();
    assert!((point - num / den).abs() < 1e-10, "{point} vs {}", num / den);
    assert_eq!(ev["target"]["point"], ev["treat_none"]["point"]);
    assert_eq!(ev["difference"].as_f64().unwrap(), 0.0);
}

#[test]
fn treat_none_dr_matches_the_pipeline_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &sim_config(900, 12));
    let run_dir = dir.path().join("run");
    ok(&["--config", s(&cfg), "--out", s(&run_dir), "run"]);
    let out = dir.path().join("e");
    let imputed = run_dir.join("imputed.csv");
    ok(&["--config", s(&cfg), "--out", s(&out), "evaluate", "--policy", "treat-none", "--outcomes", s(&imputed)]);
    let pipeline = read_json(&run_dir.join("evaluation.json"));
    let alone = read_json(&out.join("evaluation.json"));
    assert_eq!(alone["target"]["point"], pipeline["treat_none"]["point"]);
}

#[test]
fn diagnose_reports_bound_and_shift() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = sim_config(1000, 2);
    c["data"]["simulate"]["surrogacy_violation"] = json!(1.0);
    let cfg = write_config(dir.path(), &c);
    let out = dir.path().join("d");
    ok(&["--config", s(&cfg), "--out", s(&out), "diagnose"]);
    let d = read_json(&out.join("diagnose.json"));
    let b = &d["bias_bound"];
    let want = (b["var_y"].as_f64().unwrap() / b["var_a"].as_f64().unwrap()
        * (1.0 - b["r2_y_given_s"].as_f64().unwrap())
        * (1.0 - b["r2_a_given_s"].as_f64().unwrap()))
    .sqrt();
    assert!((b["bound"].as_f64().unwrap() - want).abs() < 1e-12);
    assert!(want > 0.0);
    let shift = read_csv(&out.join("shift.csv"));
    assert_eq!(shift["p2.5_d1"].len(), 4);
    assert!(d["non_overlapping_features"].as_array().unwrap().is_empty());
}
