use std::collections::HashMap;
use std::str::FromStr;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::value::RawValue;
use serde_json::Value;
use switchlens_core::cues::CueType;
use switchlens_core::graph::communication_graph;
use switchlens_core::store::IngestReport;
use switchlens_core::{Discretization, Initiator, MiningParams, PersonId, TaskId, TaskType, Threshold, Timestamp};
use tower_http::trace::TraceLayer;

use crate::advisor::{self, Patterns, SwitchQuery};
use crate::error::ApiError;
use crate::state::AppState;

type Params = Query<HashMap<String, String>>;
type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/healthz", get(|| async { "ok" }))
        .route("/events", post(post_events).get(get_events))
        .route("/patterns", get(patterns))
        .route("/advice/switch", get(switch_advice))
        .route("/suspension/{task}", get(suspension))
        .route("/resumption/{task}/cues", get(resumption_cues))
        .route("/resumption/{task}/cue-visit", post(cue_visit))
        .route("/graph/communication", get(graph))
        .layer(TraceLayer::new_for_http())
        .with_state(state)
}

fn param<T>(q: &HashMap<String, String>, name: &str) -> ApiResult<Option<T>>
where
    T: FromStr,
    T::Err: std::fmt::Display,
{
    q.get(name)
        .map(|v| v.parse().map_err(|e| ApiError::bad_request(format!("{name}: {e}"))))
        .transpose()
}

fn required<T>(q: &HashMap<String, String>, name: &str) -> ApiResult<T>
where
    T: FromStr,
    T::Err: std::fmt::Display,
{
    param(q, name)?.ok_or_else(|| ApiError::bad_request(format!("missing query parameter `{name}`")))
}

fn flag(q: &HashMap<String, String>, name: &str) -> ApiResult<Option<bool>> {
    match q.get(name).map(String::as_str) {
        None => Ok(None),
        Some("true" | "yes" | "1") => Ok(Some(true)),
        Some("false" | "no" | "0") => Ok(Some(false)),
        Some(other) => Err(ApiError::bad_request(format!("{name}: `{other}` is not a boolean"))),
    }
}

fn now() -> Timestamp {
    Timestamp::from_millis(chrono::Utc::now().timestamp_millis()).expect("clock within range")
}

/// Splits a request body into numbered log lines: either a JSON array of
/// records or newline-delimited records.
pub fn body_lines(body: &str) -> ApiResult<Vec<(usize, String)>> {
    if body.trim_start().starts_with('[') {
        let items: Vec<Box<RawValue>> =
            serde_json::from_str(body).map_err(|e| ApiError::bad_request(format!("malformed JSON array: {e}")))?;
        items
            .iter()
            .enumerate()
            .map(|(i, raw)| {
                let text = raw.get();
                let line = if text.contains(['\n', '\r']) {
                    let v: Value = serde_json::from_str(text).map_err(|e| ApiError::bad_request(e.to_string()))?;
                    v.to_string()
                } else {
                    text.to_string()
                };
                Ok((i + 1, line))
            })
            .collect()
    } else {
        Ok(body
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| (i + 1, l.to_string()))
            .collect())
    }
}

async fn post_events(State(state): State<Arc<AppState>>, body: String) -> ApiResult<Json<IngestReport>> {
    let lines = body_lines(&body)?;
    let report = state
        .write()
        .ingest_lines(lines.iter().map(|(n, l)| (*n, l.as_str())))
        .map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(Json(report))
}

async fn get_events(State(state): State<Arc<AppState>>) -> ApiResult<Response> {
    let mut out = Vec::new();
    state.read().export(&mut out).map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], out).into_response())
}

fn mining_params(state: &AppState, q: &HashMap<String, String>, task_type: TaskType) -> ApiResult<MiningParams> {
    let min_support: Threshold = param(q, "min_support")?.unwrap_or(state.config.min_support);
    let min_confidence: Threshold = param(q, "min_confidence")?.unwrap_or(state.config.min_confidence);
    let disc: Discretization = param(q, "discretization")?.unwrap_or(state.config.discretization);
    Ok(MiningParams::new(task_type, min_support, min_confidence).with_discretization(disc))
}

async fn patterns(State(state): State<Arc<AppState>>, Query(q): Params) -> ApiResult<Json<Patterns>> {
    let task_type: TaskType = required(&q, "task_type")?;
    let params = mining_params(&state, &q, task_type)?;
    let store = state.read();
    let rules = state.rules(&store, &params)?;
    Ok(Json(Patterns {
        task_type,
        min_support: params.min_support,
        min_confidence: params.min_confidence,
        discretization: params.discretization,
        watermark: store.watermark(),
        rules: advisor::narratives(rules.iter(), &state.lexicon)?,
    }))
}

async fn switch_advice(State(state): State<Arc<AppState>>, Query(q): Params) -> ApiResult<Json<advisor::SwitchAdvice>> {
    let query = SwitchQuery {
        task: TaskId::new(required::<String>(&q, "task")?),
        initiator: required::<Initiator>(&q, "initiator")?,
        time: q.get("time").cloned(),
        requester: param::<String>(&q, "requester")?.map(PersonId::new),
        interrupting: param::<String>(&q, "interrupting")?.map(TaskId::new),
        blockage: flag(&q, "blockage")?,
        boredom: flag(&q, "boredom")?,
    };
    let store = state.read();
    let task_type = store
        .trace(&query.task)
        .map(|t| t.descriptor.task_type)
        .ok_or_else(|| ApiError::not_found(format!("unknown task `{}`", query.task)))?;
    let rules = state.rules(&store, &mining_params(&state, &q, task_type)?)?;
    Ok(Json(advisor::switch_advice(&store, &state.lexicon, &rules, &query)?))
}

async fn suspension(
    State(state): State<Arc<AppState>>,
    Path(task): Path<String>,
    Query(q): Params,
) -> ApiResult<Json<advisor::SuspensionStatus>> {
    let task = TaskId::new(task);
    let at = param::<Timestamp>(&q, "now")?.unwrap_or_else(now);
    let store = state.read();
    let task_type = store
        .trace(&task)
        .map(|t| t.descriptor.task_type)
        .ok_or_else(|| ApiError::not_found(format!("unknown task `{task}`")))?;
    let rules = state.default_rules(&store, task_type)?;
    Ok(Json(advisor::suspension_status(
        &store,
        &state.lexicon,
        &rules,
        &task,
        at,
        state.config.trap_horizon,
        state.config.default_resumption_lag_secs,
    )?))
}

async fn resumption_cues(
    State(state): State<Arc<AppState>>,
    Path(task): Path<String>,
) -> ApiResult<Json<advisor::ResumptionPlan>> {
    let task = TaskId::new(task);
    let store = state.read();
    let task_type = store
        .trace(&task)
        .map(|t| t.descriptor.task_type)
        .ok_or_else(|| ApiError::not_found(format!("unknown task `{task}`")))?;
    let rules = state.cue_rules(&store, task_type)?;
    Ok(Json(advisor::resumption_plan(&store, &state.lexicon, &rules, &task)?))
}

/// Body: `{"cue": "<cue>", "at": "<timestamp>"}`; `at` defaults to now.
async fn cue_visit(
    State(state): State<Arc<AppState>>,
    Path(task): Path<String>,
    body: String,
) -> ApiResult<StatusCode> {
    let v: Value = serde_json::from_str(&body).map_err(|e| ApiError::bad_request(format!("malformed JSON: {e}")))?;
    let cue: CueType = v
        .get("cue")
        .and_then(Value::as_str)
        .ok_or_else(|| ApiError::bad_request("missing string field `cue`"))?
        .parse()
        .map_err(|e| ApiError::bad_request(format!("{e}")))?;
    let at = match v.get("at") {
        None | Some(Value::Null) => now(),
        Some(Value::String(s)) => s.parse().map_err(|e| ApiError::bad_request(format!("{e}")))?,
        Some(_) => return Err(ApiError::bad_request("`at` must be a timestamp string")),
    };
    advisor::record_cue_visit(&mut state.write(), &TaskId::new(task), cue, at)?;
    Ok(StatusCode::NO_CONTENT)
}

async fn graph(State(state): State<Arc<AppState>>, Query(q): Params) -> ApiResult<Response> {
    let from: Option<Timestamp> = param(&q, "from")?;
    let to: Option<Timestamp> = param(&q, "to")?;
    if let (Some(f), Some(t)) = (from, to) {
        if f >= t {
            return Err(ApiError::bad_request("`from` must be before `to`"));
        }
    }
    let g = communication_graph(&state.read(), from, to);
    match q.get("format").map(String::as_str) {
        None | Some("json") => Ok(Json(g).into_response()),
        Some("dot") => Ok(([(header::CONTENT_TYPE, "text/vnd.graphviz")], g.to_dot()).into_response()),
        Some(other) => Err(ApiError::bad_request(format!("format `{other}` is not json or dot"))),
    }
}
