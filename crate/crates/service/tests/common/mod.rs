#![allow(dead_code)]

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use liverkg_service::{router, AppState};
use serde_json::Value;
use tower::ServiceExt;

/// A few rows in the UCI layout; row 576 sits in the record-query region.
pub const CSV: &str = "\"\",\"Category\",\"Age\",\"Sex\",\"ALB\",\"ALP\",\"ALT\",\"AST\",\"BIL\",\"CHE\",\"CHOL\",\"CREA\",\"GGT\",\"PROT\"
\"1\",\"0=Blood Donor\",32,\"m\",38.5,52.5,7.7,22.1,7.5,6.93,3.23,106,12.1,69
\"2\",\"0=Blood Donor\",32,\"m\",38.5,70.3,18,24.7,3.9,11.17,4.8,74,15.6,76.5
\"576\",\"2=Fibrosis\",54,\"m\",38,35.7,7.1,41.3,17.8,5.28,4.29,88,53,72.5
\"577\",\"3=Cirrhosis\",38,\"m\",44,NA,94,60,12,4.37,3.2,61,99,77
";

pub fn app(state: AppState) -> (Router, Arc<AppState>) {
    let state = Arc::new(state);
    (router(state.clone()), state)
}

pub async fn call(
    app: &Router,
    method: Method,
    uri: &str,
    content_type: &str,
    body: impl Into<String>,
) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", content_type)
        .body(Body::from(body.into()))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| {
            panic!("non-JSON body for {uri}: {}", String::from_utf8_lossy(&bytes))
        })
    };
    (status, value)
}

pub async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    call(app, Method::GET, uri, "text/plain", "").await
}

pub async fn post_json(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    call(app, Method::POST, uri, "application/json", body.to_string()).await
}

pub async fn post_text(app: &Router, uri: &str, body: &str) -> (StatusCode, Value) {
    call(app, Method::POST, uri, "text/plain", body).await
}

pub fn labs(uid: &str, ast: f64, alp: f64, bil: f64, alt: f64) -> Value {
    serde_json::json!({
        "uid": uid,
        "age": 47,
        "sex": 1,
        "labs": {
            "ALB": 40.0, "ALP": alp, "ALT": alt, "AST": ast, "BIL": bil,
            "CHE": 8.0, "CHOL": 5.0, "CREA": 80.0, "GGT": 25.0, "PROT": 72.0
        }
    })
}
