use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::{HeaderMap, StatusCode};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use liverkg::dss::{
    explain_session, parse_report, Diagnosis, DiagnosisSession, PatientRecord, RecommendedTest,
    SessionState,
};
use liverkg::ingest::{encode_csv, records_to_graph};
use liverkg::ontology::{check_consistency, compute_metrics, Schema};
use liverkg::rules::builtin::event_rules;
use liverkg::rules::{infer, parse_rules, serialize_rule, ProofStep, Rule};
use liverkg::sparql::run;
use liverkg::store::{parse_ntriples, serialize_ntriples, Graph};
use liverkg::stream::{
    batch_size_cells, rule_count_cells, split_records, sweep, timing_csv, timing_report,
};
use liverkg::vocab::{RECORD_BASE, SCHEMA};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::ApiError;
use crate::persist::{valid_id, SessionSlot};
use crate::{next_session_id, AppState};

type Shared = Arc<AppState>;
type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/datasets", post(upload_dataset).get(list_datasets))
        .route("/rules", post(deploy_rules).get(list_rules))
        .route("/rules/{name}", delete(undeploy_rule))
        .route("/query", post(query))
        .route("/infer", post(run_infer))
        .route("/metrics/{graph_id}", get(metrics))
        .route("/stream/bench", post(bench))
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/labs", post(post_labs))
        .route("/sessions/{id}/diagnosis", get(get_diagnosis))
        .route("/sessions/{id}/report", post(post_report))
        .route("/sessions/{id}/plan", get(get_plan))
        .route("/sessions/{id}/followup", post(post_followup))
        .route("/sessions/{id}/explanation", get(get_explanation))
        .fallback(|| async { ApiError::not_found("no such endpoint") })
        .method_not_allowed_fallback(|| async {
            ApiError::bad_request("method not allowed on this endpoint")
        })
        .layer(DefaultBodyLimit::max(64 << 20))
        .with_state(state)
}

fn json_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body)
        .map_err(|e| ApiError::bad_request(format!("invalid JSON body: {e}")))
}

fn text_body(body: Bytes) -> ApiResult<String> {
    String::from_utf8(body.to_vec()).map_err(|_| ApiError::bad_request("body is not UTF-8"))
}

fn graph_or_404(state: &AppState, id: &str) -> ApiResult<Arc<Graph>> {
    state
        .graph(id)
        .ok_or_else(|| ApiError::not_found(format!("unknown graph {id}")))
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> ApiResult<T> + Send + 'static,
) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(ApiError::internal)?
}

// ---- datasets ----

#[derive(Serialize)]
struct DatasetCreated {
    graph_id: String,
    triples: usize,
    subjects: usize,
    created: bool,
}

async fn upload_dataset(
    State(state): State<Shared>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<DatasetCreated>)> {
    let text = text_body(body)?;
    let ntriples = headers
        .get("content-type")
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.contains("n-triples"));
    let graph = blocking(move || {
        if ntriples {
            parse_ntriples(&text).map_err(|e| ApiError::bad_request(e.to_string()))
        } else {
            let records = encode_csv(&text, RECORD_BASE)
                .map_err(|e| ApiError::bad_request(e.to_string()))?;
            records_to_graph(&records, SCHEMA).map_err(|e| ApiError::bad_request(e.to_string()))
        }
    })
    .await?;
    let (triples, subjects) = (graph.len(), graph.subjects().len());
    let (graph_id, created) = state.add_graph(graph).map_err(ApiError::internal)?;
    let status = if created {
        StatusCode::CREATED
    } else {
        StatusCode::OK
    };
    Ok((
        status,
        Json(DatasetCreated {
            graph_id,
            triples,
            subjects,
            created,
        }),
    ))
}

async fn list_datasets(State(state): State<Shared>) -> Json<Value> {
    Json(json!({ "graphs": state.graph_ids() }))
}

// ---- rules ----

#[derive(Serialize)]
struct RuleView {
    name: String,
    text: String,
}

fn rule_views(rules: &[Rule]) -> Vec<RuleView> {
    rules
        .iter()
        .map(|r| RuleView {
            name: r.name.clone(),
            text: serialize_rule(r),
        })
        .collect()
}

fn persist_rules(state: &AppState) -> ApiResult<()> {
    if let Some(data) = &state.data {
        data.save_rules(&state.engine.active_rules())
            .map_err(ApiError::internal)?;
    }
    Ok(())
}

async fn deploy_rules(State(state): State<Shared>, body: Bytes) -> ApiResult<Json<Value>> {
    let rules = parse_rules(&text_body(body)?).map_err(|e| ApiError::bad_request(e.to_string()))?;
    if rules.is_empty() {
        return Err(ApiError::bad_request("no rules in body"));
    }
    let _guard = state.rules_write.lock().unwrap_or_else(|e| e.into_inner());
    let mut latency_us = Vec::new();
    let mut names = Vec::new();
    for rule in rules {
        names.push(rule.name.clone());
        let took = state
            .engine
            .deploy_rule(rule)
            .map_err(|e| ApiError::bad_request(e.to_string()))?;
        latency_us.push(took.as_secs_f64() * 1e6);
    }
    persist_rules(&state)?;
    Ok(Json(json!({
        "deployed": names,
        "latency_us": latency_us,
        "active": state.engine.active_names(),
    })))
}

async fn list_rules(State(state): State<Shared>) -> Json<Value> {
    Json(json!({ "rules": rule_views(&state.engine.active_rules()) }))
}

async fn undeploy_rule(
    State(state): State<Shared>,
    Path(name): Path<String>,
) -> ApiResult<Json<Value>> {
    let _guard = state.rules_write.lock().unwrap_or_else(|e| e.into_inner());
    if !state.engine.undeploy_rule(&name) {
        return Err(ApiError::not_found(format!("no deployed rule named {name}")));
    }
    persist_rules(&state)?;
    Ok(Json(json!({
        "removed": name,
        "active": state.engine.active_names(),
    })))
}

// ---- query, inference, metrics ----

#[derive(Deserialize)]
struct QueryRequest {
    graph: String,
    query: String,
}

async fn query(State(state): State<Shared>, body: Bytes) -> ApiResult<Json<Value>> {
    let req: QueryRequest = json_body(&body)?;
    let graph = graph_or_404(&state, &req.graph)?;
    let solutions = blocking(move || {
        run(&req.query, &graph).map_err(|e| ApiError::bad_request(e.to_string()))
    })
    .await?;
    Ok(Json(solutions.to_json()))
}

#[derive(Deserialize)]
struct InferRequest {
    graph: String,
    /// Rule text; the deployed stream rules when absent.
    #[serde(default)]
    rules: Option<String>,
}

async fn run_infer(State(state): State<Shared>, body: Bytes) -> ApiResult<Json<Value>> {
    let req: InferRequest = json_body(&body)?;
    let graph = graph_or_404(&state, &req.graph)?;
    let rules = match &req.rules {
        Some(text) => parse_rules(text).map_err(|e| ApiError::bad_request(e.to_string()))?,
        None => state.engine.active_rules(),
    };
    if rules.is_empty() {
        return Err(ApiError::bad_request(
            "no rules given and none deployed",
        ));
    }
    blocking(move || {
        let inference =
            infer(&graph, &rules).map_err(|e| ApiError::bad_request(e.to_string()))?;
        Ok(Json(json!({
            "derived_count": inference.derived.len(),
            "derived": serialize_ntriples(&inference.derived),
            "proofs": inference.proofs,
        })))
    })
    .await
}

async fn metrics(
    State(state): State<Shared>,
    Path(graph_id): Path<String>,
) -> ApiResult<Json<Value>> {
    let graph = graph_or_404(&state, &graph_id)?;
    let schema = Schema::liver();
    let m = compute_metrics(&schema, &graph).map_err(ApiError::internal)?;
    let mut body = serde_json::to_value(m).map_err(ApiError::internal)?;
    body["violations"] = json!(check_consistency(&schema, &graph));
    Ok(Json(body))
}

// ---- stream benchmark ----

#[derive(Deserialize)]
#[serde(rename_all = "lowercase")]
enum Sweep {
    Batch,
    Rules,
    Custom,
}

#[derive(Deserialize)]
struct BenchRequest {
    graph: String,
    sweep: Sweep,
    /// `[batch_size, rule_count]` pairs for a custom sweep.
    #[serde(default)]
    cells: Vec<(usize, usize)>,
    #[serde(default = "default_runs")]
    runs: usize,
}

fn default_runs() -> usize {
    3
}

const MAX_RUNS: usize = 50;

async fn bench(State(state): State<Shared>, body: Bytes) -> ApiResult<Json<Value>> {
    let req: BenchRequest = json_body(&body)?;
    let graph = graph_or_404(&state, &req.graph)?;
    if req.runs == 0 || req.runs > MAX_RUNS {
        return Err(ApiError::bad_request(format!(
            "runs must be between 1 and {MAX_RUNS}"
        )));
    }
    let cells = match req.sweep {
        Sweep::Batch => batch_size_cells(),
        Sweep::Rules => rule_count_cells(),
        Sweep::Custom if req.cells.is_empty() => {
            return Err(ApiError::bad_request("custom sweep needs cells"))
        }
        Sweep::Custom => req.cells,
    };
    if cells.iter().any(|&(b, n)| b == 0 || n == 0) {
        return Err(ApiError::bad_request(
            "batch size and rule count must be at least 1",
        ));
    }
    blocking(move || {
        let records = split_records(&graph);
        let runs = sweep(&records, &event_rules(), &cells, req.runs)
            .map_err(|e| ApiError::bad_request(e.to_string()))?;
        let rows = timing_report(&runs);
        Ok(Json(json!({
            "records": records.len(),
            "csv": timing_csv(&rows),
            "rows": rows,
        })))
    })
    .await
}

// ---- sessions ----

#[derive(Serialize)]
struct SessionView<'a> {
    #[serde(flatten)]
    session: &'a DiagnosisSession,
    #[serde(skip_serializing_if = "Option::is_none")]
    report_text: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    explanation: Option<String>,
}

fn session_view(slot: &SessionSlot) -> Value {
    let view = SessionView {
        session: &slot.session,
        report_text: slot.report_text.as_deref(),
        explanation: explain_session(&slot.session).ok(),
    };
    serde_json::to_value(view).expect("session serializes")
}

fn session_handle(state: &AppState, id: &str) -> ApiResult<crate::SessionHandle> {
    state
        .session(id)
        .ok_or_else(|| ApiError::not_found(format!("unknown session {id}")))
}

/// Runs `f` on a copy of the session under its lock; the copy replaces the
/// session (and is saved) only if `f` succeeds.
async fn mutate<T>(
    state: &AppState,
    id: &str,
    f: impl FnOnce(&mut SessionSlot) -> ApiResult<T>,
) -> ApiResult<(T, SessionSlot)> {
    let handle = session_handle(state, id)?;
    let mut slot = handle.lock().await;
    let mut next = slot.clone();
    let out = f(&mut next)?;
    if next != *slot {
        if let Some(data) = &state.data {
            data.save_session(&next).map_err(ApiError::internal)?;
        }
        *slot = next;
    }
    Ok((out, slot.clone()))
}

#[derive(Deserialize, Default)]
struct CreateSession {
    #[serde(default)]
    id: Option<String>,
}

async fn create_session(
    State(state): State<Shared>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let req: CreateSession = if body.iter().all(u8::is_ascii_whitespace) {
        CreateSession::default()
    } else {
        json_body(&body)?
    };
    let slot = {
        let mut sessions = state.sessions.lock().unwrap_or_else(|e| e.into_inner());
        let id = match req.id {
            Some(id) if !valid_id(&id) => {
                return Err(ApiError::bad_request(
                    "session id must use only letters, digits, '-' or '_'",
                ))
            }
            Some(id) if sessions.contains_key(&id) => {
                return Err(ApiError::new(
                    crate::ErrorCode::Conflict,
                    format!("session {id} already exists"),
                ))
            }
            Some(id) => id,
            None => loop {
                let id = next_session_id(&state);
                if !sessions.contains_key(&id) {
                    break id;
                }
            },
        };
        let slot = SessionSlot::new(&id);
        if let Some(data) = &state.data {
            data.save_session(&slot).map_err(ApiError::internal)?;
        }
        sessions.insert(id, Arc::new(tokio::sync::Mutex::new(slot.clone())));
        slot
    };
    Ok((StatusCode::CREATED, Json(session_view(&slot))))
}

async fn list_sessions(State(state): State<Shared>) -> Json<Value> {
    Json(json!({ "sessions": state.session_ids() }))
}

async fn get_session(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let handle = session_handle(&state, &id)?;
    let slot = handle.lock().await;
    Ok(Json(session_view(&slot)))
}

async fn post_labs(
    State(state): State<Shared>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    let record: PatientRecord = json_body(&body)?;
    let rules = state.diagnostic_rules.clone();
    let ((), slot) = mutate(&state, &id, |slot| {
        slot.session.enter_labs(record)?;
        slot.session.diagnose(&rules)?;
        Ok(())
    })
    .await?;
    Ok(Json(session_view(&slot)))
}

#[derive(Serialize)]
struct DiagnosisView<'a> {
    state: SessionState,
    diagnosis: Diagnosis,
    label: &'static str,
    derived: &'a [Diagnosis],
    traces: &'a [ProofStep],
    tests: &'a [RecommendedTest],
}

/// Reading the diagnosis of a non-healthy patient moves the session on to
/// its recommended tests.
async fn get_diagnosis(
    State(state): State<Shared>,
    Path(id): Path<String>,
) -> ApiResult<Json<Value>> {
    let ((), slot) = mutate(&state, &id, |slot| {
        let s = &mut slot.session;
        if s.state < SessionState::Diagnosed {
            return Err(ApiError::precondition(format!(
                "session {} has no diagnosis yet (state {:?})",
                s.id, s.state
            )));
        }
        if s.state == SessionState::Diagnosed && s.diagnosis != Some(Diagnosis::Healthy) {
            s.recommend_tests()?;
        }
        Ok(())
    })
    .await?;
    let s = &slot.session;
    let diagnosis = s.diagnosis.expect("diagnosed session");
    let view = DiagnosisView {
        state: s.state,
        diagnosis,
        label: diagnosis.label(),
        derived: &s.derived,
        traces: &s.fired_rules,
        tests: &s.tests,
    };
    Ok(Json(serde_json::to_value(view).expect("view serializes")))
}

async fn post_report(
    State(state): State<Shared>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    let text = text_body(body)?;
    let (parsed, slot) = mutate(&state, &id, |slot| {
        let parsed = slot.session.ingest_report(&text)?;
        slot.report_text = Some(text);
        Ok(parsed)
    })
    .await?;
    Ok(Json(json!({
        "state": slot.session.state,
        "facts": parsed.facts,
        "recognized": parsed.recognized,
        "ignored": parsed.ignored,
    })))
}

/// Plans on first read after a report, then returns the stored plan.
async fn get_plan(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let ((), slot) = mutate(&state, &id, |slot| {
        if slot.session.state != SessionState::TreatmentPlanned {
            slot.session.plan_treatment()?;
        }
        Ok(())
    })
    .await?;
    Ok(Json(json!({
        "state": slot.session.state,
        "plan": slot.session.plan,
    })))
}

async fn post_followup(
    State(state): State<Shared>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    let text = text_body(body)?;
    let (followup, _) = mutate(&state, &id, |slot| {
        let facts = parse_report(&text)
            .map_err(liverkg::dss::SessionError::from)?
            .facts;
        let outcome = slot.session.record_followup(&facts)?.clone();
        slot.followup_facts = Some(facts);
        Ok(outcome)
    })
    .await?;
    Ok(Json(json!({ "followup": followup })))
}

async fn get_explanation(
    State(state): State<Shared>,
    Path(id): Path<String>,
) -> ApiResult<Json<Value>> {
    let handle = session_handle(&state, &id)?;
    let text = {
        let slot = handle.lock().await;
        explain_session(&slot.session)?
    };
    let refined = match state.refiner.clone() {
        Some(refiner) => {
            let template = text.clone();
            tokio::task::spawn_blocking(move || refiner.refine(&template).ok())
                .await
                .ok()
                .flatten()
        }
        None => None,
    };
    Ok(Json(json!({ "text": text, "refined": refined })))
}
