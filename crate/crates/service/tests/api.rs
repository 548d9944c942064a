use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use proptest::prelude::*;
use serde_json::{json, Value};
use switchlens_core::graph::communication_graph;
use switchlens_core::narrative::{NarrativeRule, RuleSource};
use switchlens_core::{Lexicon, Store};
use switchlens_service::advisor::RECALL_SECS;
use switchlens_service::{router, AppState, Config};
use switchlens_testkit::fixtures::{case_study_discretization, case_study_log, synthetic_log};
use tower::ServiceExt;

const CASE_SENTENCE: &str =
    "Self-switching a requirements modeling task in the morning contributes to a greater interruption lag";

fn config() -> Config {
    Config {
        discretization: case_study_discretization(),
        ..Config::default()
    }
}

fn app_with(log: &str) -> (Router, Arc<AppState>) {
    let mut store = Store::in_memory();
    let r = store.ingest(log.as_bytes()).unwrap();
    assert_eq!(r.rejected, 0, "{:?}", r.rejections.first());
    let state = Arc::new(AppState::new(config(), store, Lexicon::default()));
    (router(state.clone()), state)
}

fn app() -> (Router, Arc<AppState>) {
    app_with(&case_study_log())
}

async fn send(app: &Router, method: &str, uri: &str, body: &str) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri).body(Body::from(body.to_string())).unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    (status, res.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    let (s, b) = send(app, "GET", uri, "").await;
    (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
}

async fn post(app: &Router, uri: &str, body: &str) -> (StatusCode, Value) {
    let (s, b) = send(app, "POST", uri, body).await;
    (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
}

fn event(task: &str, at: &str, kind: &str, extra: &str) -> String {
    format!(r#"{{"record":"event","task_id":"{task}","at":"{at}","kind":"{kind}","performer_id":"alice"{extra}}}"#)
}

/// Suspends `M6` at 09:00 and 09:01 on 2024-05-13.
async fn suspend_m6(app: &Router) {
    let body = [
        event("M6", "2024-05-13T09:00:00.000Z", "switch_requested", r#","initiator":"self","interrupting_task_id":"I1""#),
        event("M6", "2024-05-13T09:01:00.000Z", "suspended", ""),
    ]
    .join("\n");
    let (s, r) = post(app, "/events", &body).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(r["accepted"], 2, "{r}");
}

fn assert_consistent(rules: &Value) {
    let lex = Lexicon::default();
    for r in rules.as_array().unwrap() {
        let n: NarrativeRule = serde_json::from_value(r.clone()).unwrap();
        assert!(n.is_consistent(&lex), "{}", n.text);
    }
}

#[tokio::test]
async fn health() {
    let (app, _) = app();
    let (s, b) = send(&app, "GET", "/healthz", "").await;
    assert_eq!((s, b.as_slice()), (StatusCode::OK, b"ok".as_slice()));
}

#[tokio::test]
async fn patterns_lead_with_the_case_rule() {
    let (app, _) = app();
    let (s, v) = get(&app, "/patterns?task_type=modeling&min_support=0.5&min_confidence=0.5").await;
    assert_eq!(s, StatusCode::OK);
    let rules = v["rules"].as_array().unwrap();
    assert!(!rules.is_empty());
    let texts: Vec<&str> = rules.iter().map(|r| r["text"].as_str().unwrap()).collect();
    assert!(texts.contains(&format!("{CASE_SENTENCE} (confidence 100%, support 60%)").as_str()), "{texts:?}");
    assert_eq!(v["discretization"], "fixed:2,300,600");
    assert_consistent(&v["rules"]);

    let (s, v) = get(&app, "/patterns?task_type=evolution").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["rules"], json!([]));
    assert_eq!(get(&app, "/patterns").await.0, StatusCode::BAD_REQUEST);
    assert_eq!(get(&app, "/patterns?task_type=knitting").await.0, StatusCode::BAD_REQUEST);
    assert_eq!(get(&app, "/patterns?task_type=modeling&min_support=2").await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn switch_advice_in_the_morning() {
    let (app, _) = app();
    let (s, v) = get(&app, "/advice/switch?task=M6&initiator=self&time=morning").await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["predicted"]["D3"]["level"], "high");
    assert_eq!(v["predicted"]["D3"]["confidence"], 1.0);
    let idx = v["predicted"]["D3"]["rule"].as_u64().unwrap() as usize;
    assert_eq!(v["rules"][idx]["text"], format!("{CASE_SENTENCE} (confidence 100%, support 60%)"));
    // Stated context: self and morning only, so no rule needs anything else.
    for r in v["rules"].as_array().unwrap() {
        let n: NarrativeRule = serde_json::from_value(r.clone()).unwrap();
        let RuleSource::Disruptiveness(rule) = n.rule else { panic!("not a disruptiveness rule") };
        assert!(rule.antecedent().iter().all(|c| ["initiator=self", "time_of_day=morning"].contains(&c.to_string().as_str())));
    }
    assert!(!v["related"].as_array().unwrap().is_empty());
    assert_consistent(&v["rules"]);
    assert_consistent(&v["related"]);
    assert!(v["graph"]["nodes"].as_array().unwrap().iter().any(|n| n["id"] == "alice"));

    // A timestamp is bucketed like a time-of-day name.
    let (_, by_ts) = get(&app, "/advice/switch?task=M6&initiator=self&time=2024-05-13T09:30:00.000Z").await;
    assert_eq!(by_ts["context"], v["context"]);
}

#[tokio::test]
async fn switch_advice_excludes_contradicting_rules() {
    let (app, _) = app();
    let (s, v) = get(&app, "/advice/switch?task=M6&initiator=external&requester=bob&time=afternoon&blockage=no").await;
    assert_eq!(s, StatusCode::OK);
    for r in v["rules"].as_array().unwrap().iter().chain(v["related"].as_array().unwrap()) {
        let text = r["text"].as_str().unwrap();
        assert!(!text.contains("Self-switching"), "{text}");
        assert!(!text.contains("in the morning"), "{text}");
    }
    assert_eq!(v["flags"]["blockage"], false);
    let graph = &v["graph"];
    assert!(graph["edges"].as_array().unwrap().iter().any(|e| e["from"] == "bob" && e["to"] == "alice"));
}

#[tokio::test]
async fn switch_advice_errors() {
    let (app, _) = app();
    assert_eq!(get(&app, "/advice/switch?task=nope&initiator=self").await.0, StatusCode::NOT_FOUND);
    let (s, v) = get(&app, "/advice/switch?task=M1&initiator=self").await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert!(v["error"].as_str().unwrap().contains("completed"));
    assert_eq!(get(&app, "/advice/switch?task=M6").await.0, StatusCode::BAD_REQUEST);
    assert_eq!(get(&app, "/advice/switch?task=M6&initiator=boss").await.0, StatusCode::BAD_REQUEST);
    assert_eq!(get(&app, "/advice/switch?task=M6&initiator=self&time=noon").await.0, StatusCode::BAD_REQUEST);
    assert_eq!(get(&app, "/advice/switch?task=M6&initiator=self&boredom=maybe").await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn suspension_status_and_trap_boundary() {
    let (app, _) = app();
    assert_eq!(get(&app, "/suspension/M6").await.0, StatusCode::CONFLICT);
    suspend_m6(&app).await;

    let (s, v) = get(&app, "/suspension/M6?now=2024-05-13T09:31:00.000Z").await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["phase"], "suspended");
    assert_eq!(v["fragments"], 1);
    assert_eq!(v["depth"], 1);
    assert_eq!(v["elapsed_secs"], 1800.0);
    assert_eq!(v["trap_risk"], false);
    assert!(v["reminder_text"].as_str().unwrap().contains("30 min"));
    assert_consistent(&v["rules"]);
    // The self/morning episode still matches the case rule.
    assert!(v["rules"].as_array().unwrap().iter().any(|r| r["text"].as_str().unwrap().starts_with(CASE_SENTENCE)));

    // First reminder after the median historical resumption lag (30, 60, 90, 420, 600 s).
    let reminders = v["reminders"].as_array().unwrap();
    assert_eq!(reminders[0]["at"], "2024-05-13T09:02:30.000Z");
    assert_eq!(reminders[0]["due"], true);
    assert_eq!(reminders[1]["at"], "2024-05-13T09:05:30.000Z");
    assert_eq!(reminders.last().unwrap()["at"], "2024-05-20T09:01:00.000Z");
    assert_eq!(reminders.last().unwrap()["modalities"], json!(["popup", "email"]));

    let (_, at) = get(&app, "/suspension/M6?now=2024-05-20T09:01:00.000Z").await;
    assert_eq!(at["trap_risk"], false);
    let (_, past) = get(&app, "/suspension/M6?now=2024-05-20T09:01:00.001Z").await;
    assert_eq!(past["trap_risk"], true);
    assert!(past["reminder_text"].as_str().unwrap().contains("trap horizon"));

    assert_eq!(get(&app, "/suspension/ghost").await.0, StatusCode::NOT_FOUND);
    assert_eq!(get(&app, "/suspension/M6?now=yesterday").await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn resumption_cues_and_visits() {
    let (app, state) = app();
    assert_eq!(get(&app, "/resumption/M6/cues").await.0, StatusCode::CONFLICT);
    suspend_m6(&app).await;
    assert_eq!(get(&app, "/resumption/M6/cues").await.0, StatusCode::CONFLICT);
    let (s, _) = post(
        &app,
        "/events",
        &event("M6", "2024-05-13T10:00:00.000Z", "interruption_ended", r#","annotations":"check the state chart""#),
    )
    .await;
    assert_eq!(s, StatusCode::OK);

    let (s, v) = get(&app, "/resumption/M6/cues").await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["phase"], "resumption_pending");
    assert_eq!(v["session_id"], "M6#1");
    assert_eq!(v["recall_secs"], RECALL_SECS);
    assert_eq!(v["recall_range_secs"], json!([12, 912]));
    // No cue history yet: the default ranking.
    assert_eq!(v["cues"], json!(["annotation", "thumbnail", "verbal", "eye", "behavior_graph"]));
    assert_eq!(v["payloads"][0]["refs"], json!(["check the state chart"]));

    let visit = |cue: &str, at: &str| json!({ "cue": cue, "at": at }).to_string();
    let (s, _) = send(&app, "POST", "/resumption/M6/cue-visit", &visit("eye", "2024-05-13T10:00:05.000Z")).await;
    assert_eq!(s, StatusCode::NO_CONTENT);
    let (s, _) = send(&app, "POST", "/resumption/M6/cue-visit", &visit("verbal", "2024-05-13T10:00:09.000Z")).await;
    assert_eq!(s, StatusCode::NO_CONTENT);
    // Same visit again is a duplicate, not an error.
    let (s, _) = send(&app, "POST", "/resumption/M6/cue-visit", &visit("verbal", "2024-05-13T10:00:09.000Z")).await;
    assert_eq!(s, StatusCode::NO_CONTENT);
    assert_eq!(state.read().session_visits("M6#1").unwrap().len(), 2);

    // The single session now supports eye -> verbal with confidence 1.
    let (_, v) = get(&app, "/resumption/M6/cues").await;
    assert_eq!(v["visited"], json!(["eye", "verbal"]));
    assert_eq!(v["cues"], json!(["eye", "verbal", "annotation", "thumbnail", "behavior_graph"]));
    assert!(v["navigation"].as_array().unwrap().iter().any(|h| h["from"] == "eye" && h["to"] == "verbal"));
    assert_consistent(&v["rules"]);

    let (s, _) = post(&app, "/events", &event("M6", "2024-05-13T10:01:00.000Z", "resumed", "")).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(get(&app, "/resumption/M6/cues").await.0, StatusCode::OK);
}

#[tokio::test]
async fn cue_visit_errors() {
    let (app, _) = app();
    let ok = r#"{"cue":"eye","at":"2024-05-13T10:00:00.000Z"}"#;
    assert_eq!(send(&app, "POST", "/resumption/M1/cue-visit", r#"{"cue":"smell"}"#).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(send(&app, "POST", "/resumption/M1/cue-visit", "not json").await.0, StatusCode::BAD_REQUEST);
    assert_eq!(send(&app, "POST", "/resumption/M1/cue-visit", r#"{"at":"2024-05-13T10:00:00.000Z"}"#).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(send(&app, "POST", "/resumption/M1/cue-visit", r#"{"cue":"eye","at":7}"#).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(send(&app, "POST", "/resumption/ghost/cue-visit", ok).await.0, StatusCode::NOT_FOUND);
    assert_eq!(send(&app, "POST", "/resumption/M1/cue-visit", ok).await.0, StatusCode::CONFLICT);
}

#[tokio::test]
async fn communication_graph_json_and_dot() {
    let (app, state) = app();
    let (s, v) = get(&app, "/graph/communication").await;
    assert_eq!(s, StatusCode::OK);
    let weight = |from: &str, to: &str| {
        v["edges"]
            .as_array()
            .unwrap()
            .iter()
            .find(|e| e["from"] == from && e["to"] == to)
            .map(|e| e["weight"].as_u64().unwrap())
    };
    assert_eq!(weight("alice", "alice"), Some(3));
    assert_eq!(weight("bob", "alice"), Some(2));
    assert_eq!(v, serde_json::to_value(communication_graph(&state.read(), None, None)).unwrap());

    // Half-open range: 2024-05-09T14:00Z is M4's switch and is excluded as `to`.
    let (_, w) = get(&app, "/graph/communication?from=2024-05-06T00:00:00.000Z&to=2024-05-09T14:00:00.000Z").await;
    assert_eq!(w["edges"], json!([{ "from": "alice", "to": "alice", "weight": 3 }]));

    let (s, dot) = send(&app, "GET", "/graph/communication?format=dot", "").await;
    assert_eq!(s, StatusCode::OK);
    let dot = String::from_utf8(dot).unwrap();
    assert!(dot.starts_with("digraph"));
    assert!(dot.contains("\"bob\" -> \"alice\" [weight=2"));

    assert_eq!(get(&app, "/graph/communication?format=png").await.0, StatusCode::BAD_REQUEST);
    assert_eq!(
        get(&app, "/graph/communication?from=2024-05-09T00:00:00.000Z&to=2024-05-09T00:00:00.000Z").await.0,
        StatusCode::BAD_REQUEST
    );
}

#[tokio::test]
async fn ingest_reports_and_rejects() {
    let (app, _) = app_with("");
    assert_eq!(post(&app, "/events", "[{\"record\":").await.0, StatusCode::BAD_REQUEST);
    let (s, v) = post(&app, "/events", &case_study_log()).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["rejected"], 0);
    let (_, again) = post(&app, "/events", &case_study_log()).await;
    assert_eq!(again["accepted"], 0);
    assert_eq!(again["duplicates"], v["accepted"]);
    let ghost = event("ghost", "2024-05-13T10:00:00.000Z", "started", "");
    let (_, r) = post(&app, "/events", &format!("[{ghost}]")).await;
    assert_eq!(r["rejected"], 1);
    assert_eq!(r["rejections"][0]["line"], 1);
    assert!(r["rejections"][0]["reason"].as_str().unwrap().starts_with("UnknownTask"));
}

#[tokio::test]
async fn pretty_array_elements_are_compacted() {
    let (app, state) = app_with("");
    let body = "[\n  {\n    \"record\": \"person\",\n    \"person_id\": \"carol\"\n  }\n]";
    let (s, v) = post(&app, "/events", body).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["accepted"], 1);
    assert_eq!(state.read().lines(), [r#"{"person_id":"carol","record":"person"}"#]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn array_and_jsonl_ingest_export_the_same_log(seed in any::<u64>()) {
        let log = synthetic_log(seed, 200);
        let array = format!("[\n{}\n]", log.lines().collect::<Vec<_>>().join(",\n"));
        let rt = tokio::runtime::Builder::new_current_thread().build().unwrap();
        let (jsonl, arr) = rt.block_on(async {
            let (a, _) = app_with("");
            let (b, _) = app_with("");
            post(&a, "/events", &log).await;
            post(&b, "/events", &array).await;
            (send(&a, "GET", "/events", "").await.1, send(&b, "GET", "/events", "").await.1)
        });
        prop_assert_eq!(String::from_utf8(jsonl).unwrap(), log.clone());
        prop_assert_eq!(String::from_utf8(arr).unwrap(), log);
    }
}

#[tokio::test]
async fn twice_interrupted_task_counts_two_fragments() {
    let (app, _) = app();
    suspend_m6(&app).await;
    let body = [
        event("M6", "2024-05-13T09:30:00.000Z", "interruption_ended", ""),
        event("M6", "2024-05-13T09:32:00.000Z", "resumed", ""),
        event("M6", "2024-05-13T10:00:00.000Z", "switch_requested", r#","initiator":"external","requester_id":"bob","interrupting_task_id":"I2""#),
        event("M6", "2024-05-13T10:02:00.000Z", "suspended", ""),
        event("M6", "2024-05-13T10:05:00.000Z", "switch_requested", r#","initiator":"self","interrupting_task_id":"I1""#),
        event("M6", "2024-05-13T10:06:00.000Z", "suspended", ""),
    ]
    .join("\n");
    let (_, r) = post(&app, "/events", &body).await;
    assert_eq!(r["accepted"], 6, "{r}");
    let (s, v) = get(&app, "/suspension/M6?now=2024-05-13T11:00:00.000Z").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["fragments"], 2);
    assert_eq!(v["depth"], 2);
    assert_eq!(v["suspended_at"], "2024-05-13T10:02:00.000Z");
    assert!(v["reminder_text"].as_str().unwrap().contains("2 fragments"), "{}", v["reminder_text"]);
}

#[tokio::test]
async fn advice_without_rules_still_has_a_graph() {
    let log = case_study_log()
        + r#"{"record":"task","task_id":"E1","project":"atlas","task_type":"evolution","granularity":"fine","priority":1,"progress_status":"early","performer_id":"alice","performer_experience":1}"#
        + "\n"
        + &event("E1", "2024-05-13T08:00:00.000Z", "started", "")
        + "\n";
    let (app, _) = app_with(&log);
    let (s, v) = get(&app, "/advice/switch?task=E1&initiator=self&time=morning").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["rules"], json!([]));
    assert_eq!(v["related"], json!([]));
    assert_eq!(v["predicted"], json!({}));
    assert!(!v["graph"]["nodes"].as_array().unwrap().is_empty());
}

#[tokio::test]
async fn empty_store_has_an_empty_graph() {
    let (app, _) = app_with("");
    let (s, v) = get(&app, "/graph/communication").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v, json!({ "nodes": [], "edges": [] }));
    let (s, v) = post(&app, "/events", "[]").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["accepted"], 0);
}

#[tokio::test]
async fn repeated_gets_between_writes_are_identical() {
    let (app, _) = app();
    let uris = [
        "/patterns?task_type=modeling",
        "/advice/switch?task=M6&initiator=self&time=morning",
        "/graph/communication?format=dot",
    ];
    for uri in uris {
        let a = send(&app, "GET", uri, "").await;
        let b = send(&app, "GET", uri, "").await;
        assert_eq!(a, b, "{uri}");
    }
    // A write that changes the mined records invalidates cached rules.
    let (_, before) = get(&app, "/patterns?task_type=modeling&min_support=0.1").await;
    suspend_m6(&app).await;
    let (_, after) = get(&app, "/patterns?task_type=modeling&min_support=0.1").await;
    assert_ne!(before["watermark"], after["watermark"]);
    assert_ne!(before["rules"], after["rules"]);
}
