use std::process::Command;

use limid_cli::commands::{EXIT_INVALID, EXIT_OK, EXIT_RESOURCE, EXIT_USAGE};
use limid_cli::{parse, run, serialize};
use limid_core::generate::{random_diagram, GenParams};
use limid_core::{expected_utility, Policy, Strategy};
use proptest::prelude::*;
use serde_json::Value;

fn limid(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(std::iter::once("limid").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn temp_file(name: &str, contents: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("limid-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

fn generated(name: &str, seed: &str) -> std::path::PathBuf {
    let (code, doc, _) = limid(&["gen", "--chance", "3", "--decisions", "2", "--card", "2", "--values", "2", "--seed", seed]);
    assert_eq!(code, EXIT_OK);
    temp_file(name, &doc)
}

fn json(text: &str) -> Value {
    serde_json::from_str(text).unwrap()
}

#[test]
fn exact_solve_matches_oracle() {
    let file = generated("exact.json", "3");
    let path = file.to_str().unwrap();
    let (c1, solved, _) = limid(&["solve", "--exact", path]);
    let (c2, oracle, _) = limid(&["oracle", path]);
    assert_eq!((c1, c2), (EXIT_OK, EXIT_OK));
    let (a, b) = (json(&solved)["value"].as_f64().unwrap(), json(&oracle)["value"].as_f64().unwrap());
    assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
}

#[test]
fn approximate_solve_is_within_factor() {
    let file = generated("approx.json", "11");
    let path = file.to_str().unwrap();
    let solved = json(&limid(&["solve", "--epsilon", "0.5", path]).1);
    let oracle = json(&limid(&["oracle", path]).1)["value"].as_f64().unwrap();
    assert!(solved["value"].as_f64().unwrap() >= oracle / 1.5 - 1e-9);
    assert!(solved["alpha"].as_f64().unwrap() > 1.0);
}

#[test]
fn strategy_tables_are_pure_and_realize_the_value() {
    let file = generated("pure.json", "5");
    let text = std::fs::read_to_string(&file).unwrap();
    let (d, _) = parse(&text).unwrap();
    let out = json(&limid(&["solve", "--epsilon", "0.1", file.to_str().unwrap()]).1);
    let policies = out["strategy"].as_object().unwrap().iter().map(|(name, p)| {
        let dec = d.find(name).unwrap();
        let table: Vec<f64> = p["table"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
        assert!(table.iter().all(|&x| x == 0.0 || x == 1.0));
        let parents = p["parents"].as_array().unwrap().iter().map(|x| d.find(x.as_str().unwrap()).unwrap()).collect();
        Policy { decision: dec, parents, cardinality: d.cardinality(dec), table }
    });
    let s = Strategy::new(policies);
    let e = expected_utility(&d, &s).unwrap();
    assert!((e - out["value"].as_f64().unwrap()).abs() <= 1e-9);
}

#[test]
fn stats_are_reported_on_request() {
    let file = generated("stats.json", "8");
    let path = file.to_str().unwrap();
    let plain = json(&limid(&["solve", "--epsilon", "0.5", path]).1);
    assert!(plain.get("stats").is_none() && plain.get("elapsed_ms").is_none());
    let out = json(&limid(&["solve", "--epsilon", "0.5", "--stats", "--timing", path]).1);
    let stats = out["stats"].as_array().unwrap();
    assert_eq!(stats.len() as u64, out["m"].as_u64().unwrap());
    let total: u64 = stats.iter().map(|s| s["message"].as_u64().unwrap()).sum();
    assert_eq!(total, out["total_message_size"].as_u64().unwrap());
    assert!(out["elapsed_ms"].as_f64().unwrap() >= 0.0);
}

#[test]
fn gen_is_deterministic_and_valid() {
    let a = limid(&["gen", "--seed", "7"]);
    let b = limid(&["gen", "--seed", "7"]);
    assert_eq!(a, b);
    assert_ne!(a.1, limid(&["gen", "--seed", "8"]).1);
    let file = temp_file("gen7.json", &a.1);
    let (code, out, _) = limid(&["validate", file.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(json(&out)["valid"], Value::Bool(true));
}

#[test]
fn reduce_emits_a_solvable_single_value_document() {
    let file = generated("reduce.json", "4");
    let path = file.to_str().unwrap();
    let (code, reduced, _) = limid(&["reduce", path]);
    assert_eq!(code, EXIT_OK);
    let doc = json(&reduced);
    assert_eq!(doc["reduction"]["q"], 2);
    assert!(doc["reduction"]["lower"].as_f64().unwrap() <= doc["reduction"]["upper"].as_f64().unwrap());
    let (d, t) = parse(&reduced).unwrap();
    assert_eq!(d.value_vars().len(), 1);
    assert!(t.is_some());

    let rfile = temp_file("reduced.json", &reduced);
    let a = json(&limid(&["solve", "--exact", path]).1)["value"].as_f64().unwrap();
    let b = json(&limid(&["solve", "--exact", rfile.to_str().unwrap()]).1)["value"].as_f64().unwrap();
    assert!((a - b).abs() <= 1e-9);
}

#[test]
fn invalid_documents_exit_one() {
    let file = generated("bad.json", "2");
    let mut doc = json(&std::fs::read_to_string(&file).unwrap());
    doc["cpts"]["C00"]["table"].as_array_mut().unwrap().pop();
    let bad = temp_file("bad2.json", &doc.to_string());
    let (code, out, _) = limid(&["validate", bad.to_str().unwrap()]);
    assert_eq!(code, EXIT_INVALID);
    let report = json(&out);
    assert_eq!(report["valid"], Value::Bool(false));
    assert!(report["violations"][0].as_str().unwrap().contains("C00"));

    let (code, _, err) = limid(&["solve", "--exact", bad.to_str().unwrap()]);
    assert_eq!(code, EXIT_INVALID);
    assert!(err.contains("C00"));

    let garbled = temp_file("garbled.json", "{\"variables\": [");
    assert_eq!(limid(&["oracle", garbled.to_str().unwrap()]).0, EXIT_INVALID);
    assert_eq!(limid(&["solve", "--exact", "/nonexistent/limid.json"]).0, EXIT_INVALID);
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(limid(&[]).0, EXIT_USAGE);
    assert_eq!(limid(&["frobnicate"]).0, EXIT_USAGE);
    assert_eq!(limid(&["solve", "x.json"]).0, EXIT_USAGE);
    assert_eq!(limid(&["gen", "--seed", "minus-one"]).0, EXIT_USAGE);
    assert_eq!(limid(&["gen", "--card", "0"]).0, EXIT_USAGE);
    let (code, out, _) = limid(&["--help"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("solve") && out.contains("oracle"));
    assert_eq!(limid(&["--version"]).0, EXIT_OK);
}

#[test]
fn resource_cap_exits_two() {
    let file = generated("cap.json", "6");
    let path = file.to_str().unwrap();
    assert_eq!(limid(&["--max-set-size", "1", "solve", "--exact", path]).0, EXIT_RESOURCE);
    let out = Command::new(env!("CARGO_BIN_EXE_limid"))
        .args(["solve", "--exact", path])
        .env("LIMID_MAX_SET_SIZE", "1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_RESOURCE));
    let out = Command::new(env!("CARGO_BIN_EXE_limid"))
        .args(["solve", "--exact", path])
        .env("LIMID_MAX_SET_SIZE", "1000000")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_OK));
}

#[test]
fn diagram_without_values_is_worth_zero() {
    let file = temp_file("novalue.json", r#"{"variables": [{"id": "D", "kind": "decision", "cardinality": 2}]}"#);
    let out = json(&limid(&["solve", "--epsilon", "0.2", file.to_str().unwrap()]).1);
    assert_eq!(out["value"], 0.0);
    assert_eq!(out["strategy"]["D"]["table"], serde_json::json!([1.0, 0.0]));
    assert_eq!(limid(&["reduce", file.to_str().unwrap()]).0, EXIT_INVALID);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn serialize_parse_round_trip(chance in 0usize..5, decisions in 0usize..3, card in 1usize..4, values in 0usize..3, seed: u64) {
        let d = random_diagram(&GenParams { chance, decisions, card, max_parents: 2, values, seed });
        let text = serialize(&d, None);
        let (again, t) = parse(&text).unwrap();
        prop_assert!(t.is_none());
        prop_assert_eq!(&again, &d);
        prop_assert_eq!(serialize(&again, None), text);
    }
}
