use liverkg::sparql::RECORD_QUERY;
use liverkg_wasm_demo::{diagnose_json, plan_json, query_json};
use serde_json::{json, Value};

fn record(ast: f64, alp: f64, bil: f64, alt: f64) -> String {
    json!({
        "uid": "demo-1", "age": 47, "sex": 1,
        "labs": {"ALB": 40.0, "ALP": alp, "ALT": alt, "AST": ast, "BIL": bil,
                 "CHE": 8.0, "CHOL": 5.0, "CREA": 80.0, "GGT": 25.0, "PROT": 72.0}
    })
    .to_string()
}

#[test]
fn hepatitis_c_labs_give_tests_and_explanation() {
    let out: Value = serde_json::from_str(&diagnose_json(&record(40.0, 50.0, 10.0, 9.0)).unwrap()).unwrap();
    assert_eq!(out["diagnosis"], "HepatitisC");
    assert_eq!(out["session"]["state"], "TESTS_RECOMMENDED");
    assert_eq!(out["session"]["tests"].as_array().unwrap().len(), 3);
    assert!(out["explanation"].as_str().unwrap().contains("Rule hepc_1"));
}

#[test]
fn bad_record_is_an_error_message() {
    assert!(diagnose_json("{}").unwrap_err().starts_with("record:"));
    assert!(diagnose_json(&record(f64::MAX, 1.0, 1.0, 1.0).replace("demo-1", "a b")).is_err());
}

#[test]
fn plan_follows_the_treatment_grid() {
    let out: Value = serde_json::from_str(&plan_json("HCV RNA: POSITIVE\nCHILD-PUGH: A").unwrap()).unwrap();
    let drugs: Vec<&str> = out["plan"]["regimen"]
        .as_array()
        .unwrap()
        .iter()
        .map(|d| d["drug"].as_str().unwrap())
        .collect();
    assert_eq!(drugs, ["Sofosbuvir", "Velpatasvir"]);
    assert_eq!(out["plan"]["duration_weeks"], 12);
    assert!(plan_json("FIBROSIS STAGE: F2").unwrap_err().contains("HCV RNA"));
}

#[test]
fn record_query_over_sample_graph() {
    let out: Value = serde_json::from_str(&query_json(RECORD_QUERY).unwrap()).unwrap();
    let rows = out["results"]["bindings"].as_array().unwrap();
    let ids: Vec<&str> = rows.iter().map(|r| r["SNo"]["value"].as_str().unwrap()).collect();
    assert!(ids.contains(&"576"), "{ids:?}");
    assert!(query_json("SELECT").is_err());
}
