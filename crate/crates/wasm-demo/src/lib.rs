//! Browser demo. Every export takes and returns JSON text so the page
//! needs no generated type glue beyond strings.

use liverkg::dss::{explain_session, parse_report, plan_treatment, DiagnosisSession, PatientRecord};
use liverkg::ingest::{encode_csv, records_to_graph};
use liverkg::rules::builtin::diagnostic_rules;
use liverkg::sparql::run;
use liverkg::vocab::{RECORD_BASE, SCHEMA};
use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Eleven rows in the UCI layout, one or more per category.
pub const SAMPLE_CSV: &str = include_str!("sample.csv");

#[derive(Serialize)]
struct DiagnosisView<'a> {
    diagnosis: liverkg::dss::Diagnosis,
    label: &'static str,
    derived: Vec<&'static str>,
    session: &'a DiagnosisSession,
    explanation: String,
}

/// `record_json` is a patient record: `{"uid", "age", "sex", "labs": {...}}`.
pub fn diagnose_json(record_json: &str) -> Result<String, String> {
    let record: PatientRecord =
        serde_json::from_str(record_json).map_err(|e| format!("record: {e}"))?;
    let mut session = DiagnosisSession::new("demo");
    session.enter_labs(record).map_err(|e| e.to_string())?;
    let diagnosis = session
        .diagnose(&diagnostic_rules())
        .map_err(|e| e.to_string())?;
    // healthy sessions have no tests to recommend
    let _ = session.recommend_tests();
    let explanation = explain_session(&session).map_err(|e| e.to_string())?;
    let view = DiagnosisView {
        diagnosis,
        label: diagnosis.label(),
        derived: session.derived.iter().map(|d| d.label()).collect(),
        session: &session,
        explanation,
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

pub fn plan_json(report_text: &str) -> Result<String, String> {
    let parsed = parse_report(report_text).map_err(|e| e.to_string())?;
    let plan = plan_treatment(&parsed.facts).map_err(|e| e.to_string())?;
    serde_json::to_string(&json!({
        "facts": parsed.facts,
        "recognized": parsed.recognized,
        "ignored": parsed.ignored,
        "plan": plan,
    }))
    .map_err(|e| e.to_string())
}

/// Runs `query` over the graph built from [`SAMPLE_CSV`].
pub fn query_json(query: &str) -> Result<String, String> {
    let records = encode_csv(SAMPLE_CSV, RECORD_BASE).map_err(|e| e.to_string())?;
    let graph = records_to_graph(&records, SCHEMA).map_err(|e| e.to_string())?;
    let solutions = run(query, &graph).map_err(|e| e.to_string())?;
    Ok(solutions.to_json().to_string())
}

#[wasm_bindgen]
pub fn diagnose(record_json: &str) -> Result<String, JsValue> {
    diagnose_json(record_json).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn plan(report_text: &str) -> Result<String, JsValue> {
    plan_json(report_text).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn query(sparql: &str) -> Result<String, JsValue> {
    query_json(sparql).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn sample_csv() -> String {
    SAMPLE_CSV.to_string()
}
