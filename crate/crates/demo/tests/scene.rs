use std::collections::BTreeSet;

use review_funnel_demo::{demo_config, Scene};
use serde_json::Value;

fn scene() -> Scene {
    Scene::generate(60, 0.15, 3).unwrap()
}

#[test]
fn positions_fit_the_canvas() {
    let s = scene();
    let xy = s.positions();
    assert_eq!(xy.len(), 2 * s.corpus.len());
    assert!(xy.iter().all(|v| (0.0..=1.0).contains(v)));
    assert_eq!(s.truth_flags().len(), s.corpus.len());
    assert_eq!(s.active_flags().len(), s.corpus.len());
}

#[test]
fn coverage_respects_budget_and_owners() {
    let s = scene();
    let v: Value = serde_json::from_str(&s.coverage_json(0.02, 7).unwrap()).unwrap();
    let reps: Vec<u64> = v["representatives"].as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).collect();
    assert!(reps.len() <= 7);
    let owner = v["owner"].as_array().unwrap();
    assert_eq!(owner.len(), s.corpus.len());
    let covered = owner.iter().filter(|o| o.as_i64().unwrap() >= 0).count();
    assert_eq!(covered as u64, v["coverage"].as_u64().unwrap());
    for r in &reps {
        assert_eq!(owner[*r as usize].as_u64(), Some(*r));
    }
    assert!(s.coverage_json(-1.0, 3).is_err());
}

#[test]
fn run_reports_each_label_once() {
    let s = scene();
    let text = s.run_json("").unwrap();
    assert_eq!(text, s.run_json("").unwrap());
    let v: Value = serde_json::from_str(&text).unwrap();
    let rounds = v["rounds"].as_array().unwrap();
    assert_eq!(rounds.len() as u32, demo_config().rounds + 1);
    let mut seen = BTreeSet::new();
    for r in rounds {
        for l in r["labels"].as_array().unwrap() {
            assert!(seen.insert(l["index"].as_u64().unwrap()));
        }
    }
    let reviews = v["cumulative"]["oracle_reviews"].as_f64().unwrap();
    assert!(reviews <= (demo_config().rounds as usize * demo_config().budget_per_round) as f64);
    assert!(v["baseline_recall"].as_f64().unwrap() <= 1.0);
}

#[test]
fn partial_config_and_errors() {
    let s = scene();
    let mut cfg: Value = serde_json::to_value(demo_config()).unwrap();
    cfg["rounds"] = 1.into();
    let v: Value = serde_json::from_str(&s.run_json(&cfg.to_string()).unwrap()).unwrap();
    assert_eq!(v["rounds"].as_array().unwrap().len(), 2);
    let err = s.run_json(r#"{"bugdet_per_round": 3}"#).unwrap_err();
    assert!(err.contains("bugdet_per_round"), "{err}");
}
