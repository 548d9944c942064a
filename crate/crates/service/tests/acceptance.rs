//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use num_rational::Ratio;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::Value;
use switchlens_core::cues::{mine_sequences, recommend_order, CueSequenceRule, CueType, DEFAULT_CUE_RANKING};
use switchlens_core::graph::communication_graph;
use switchlens_core::items::{CharacteristicItem, Item};
use switchlens_core::machine::{apply_event, derive_measures, detect_trap, replay, LagPolicy, PhaseKind, TransitionError};
use switchlens_core::narrative::{render_disruptiveness, NarrativeRule, RuleSource};
use switchlens_core::pattern::{derive_rules, discretize, maximal_rules, mine, mine_frequent, MiningParams};
use switchlens_core::{EventKind, Lexicon, Store, TaskId, TaskType, Threshold, Timestamp, TrapHorizon};
use switchlens_service::{router, AppState, Config};
use switchlens_testkit::fixtures::{case_study_discretization, case_study_log, case_study_records, synthetic_log};
use switchlens_testkit::logs::{descriptor, walk, WalkConfig, WalkPhase};
use switchlens_testkit::table::{event, expected, prefixes, state_after};
use switchlens_testkit::{apriori, sam};

const CASE_SENTENCE: &str =
    "Self-switching a requirements modeling task in the morning contributes to a greater interruption lag";

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn half() -> Threshold {
    Threshold::ratio(1, 2).unwrap()
}

fn within(elapsed: Duration, limit: Duration) -> Check {
    if elapsed < limit {
        Ok(String::new())
    } else {
        Err(format!("took {elapsed:?}, limit {limit:?}"))
    }
}

fn case_study() -> Check {
    let start = Instant::now();
    let params = MiningParams::new(TaskType::Modeling, half(), half()).with_discretization(case_study_discretization());
    let rules = mine(&case_study_records(), &params).map_err(|e| e.to_string())?;
    let maximal = maximal_rules(&rules);
    let elapsed = start.elapsed();
    ensure!(maximal.len() == 1, "{} maximal rules", maximal.len());
    let r = maximal[0];
    let antecedent: Vec<String> = r.antecedent().iter().map(ToString::to_string).collect();
    let consequent: Vec<String> = r.consequent().iter().map(ToString::to_string).collect();
    ensure!(antecedent == ["initiator=self", "time_of_day=morning"], "antecedent {antecedent:?}");
    ensure!(consequent == ["D3=high"], "consequent {consequent:?}");
    ensure!(r.confidence() == Ratio::from_integer(1), "confidence {}", r.confidence());

    let discrete = discretize(&case_study_records(), &case_study_discretization()).map_err(|e| e.to_string())?;
    let items: BTreeSet<Item> = r.items().into_iter().collect();
    let oracle = apriori::frequent_sets(&discrete, params.min_support.get());
    let (_, want) = oracle.get(&items).ok_or("rule's item set missing from the oracle")?;
    ensure!(r.support() == *want, "support {} vs oracle {want}", r.support());
    within(elapsed, Duration::from_secs(1))?;
    Ok(format!("support {} confidence 1, {elapsed:?}", r.support()))
}

fn random_case(seed: u64) -> (Vec<switchlens_core::MiningRecord>, MiningParams) {
    let mut rng = StdRng::seed_from_u64(seed);
    let records = apriori::random_records(&mut rng, 20, 8);
    let s = Threshold::new(apriori::random_threshold(&mut rng)).unwrap();
    let c = Threshold::new(apriori::random_threshold(&mut rng)).unwrap();
    (records, MiningParams::new(TaskType::Modeling, s, c))
}

fn apriori_oracle() -> Check {
    let start = Instant::now();
    let (mut sets, mut rules) = (0, 0);
    for seed in 0..200 {
        let (records, params) = random_case(seed);
        let frequent = mine_frequent(&records, &params);
        let got: BTreeMap<BTreeSet<Item>, (u64, Ratio<u64>)> =
            frequent.iter().map(|f| (f.items.iter().copied().collect(), (f.count, f.support))).collect();
        let want = apriori::frequent_sets(&records, params.min_support.get());
        ensure!(got == want, "seed {seed}: frequent sets differ");
        let got: BTreeSet<apriori::OracleRule> = derive_rules(&frequent, &records, &params)
            .iter()
            .map(|r| {
                (
                    r.antecedent().iter().copied().collect(),
                    r.consequent().iter().copied().collect(),
                    r.support(),
                    r.confidence(),
                )
            })
            .collect();
        let want_rules = apriori::rules(&records, params.min_support.get(), params.min_confidence.get());
        ensure!(got == want_rules, "seed {seed}: rules differ");
        sets += want.len();
        rules += want_rules.len();
    }
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(30))?;
    Ok(format!("200 sets, {sets} frequent sets, {rules} rules, {elapsed:?}"))
}

fn pruning() -> Check {
    let mut checked = 0;
    let single_sided = |items: &[Item]| items.len() < 2 || items.iter().all(Item::is_characteristic) || items.iter().all(|i| !i.is_characteristic());
    for seed in 0..200 {
        let (records, params) = random_case(seed);
        for f in mine_frequent(&records, &params) {
            ensure!(!single_sided(&f.items), "seed {seed}: single-sided set {:?}", f.items);
            checked += 1;
        }
    }
    // Also on mining records derived from synthetic logs.
    for seed in 0..4 {
        let mut store = Store::in_memory();
        store.ingest(synthetic_log(seed, 2_000).as_bytes()).map_err(|e| e.to_string())?;
        for &t in TaskType::ALL {
            let Ok(records) = store.mining_records(t, &Default::default()) else { continue };
            let params = MiningParams::new(t, Threshold::ratio(1, 4).unwrap(), half());
            for f in mine_frequent(&records, &params) {
                ensure!(!single_sided(&f.items), "log {seed} {t}: single-sided set {:?}", f.items);
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} frequent sets, all mixed"))
}

fn state_machine() -> Check {
    // Exhaustive sweep of every (situation, event kind) pair.
    let mut illegal = 0;
    for (name, prefix) in prefixes() {
        let s = state_after(&prefix);
        let phase = s.phase.kind();
        for &kind in EventKind::ALL {
            let got = apply_event(&s, &event(kind, 1_000_000));
            if phase == PhaseKind::Completed || phase == PhaseKind::Trapped {
                ensure!(got == Err(TransitionError::TerminalState(phase)), "{name} + {kind}: {got:?}");
                illegal += 1;
                continue;
            }
            match expected(phase, s.depth, kind) {
                Some((next, depth)) => {
                    let n = got.map_err(|e| format!("{name} + {kind}: {e}"))?;
                    ensure!(n.phase.kind() == next && n.depth == depth, "{name} + {kind}: {:?}", n.phase);
                }
                None => {
                    ensure!(
                        got == Err(TransitionError::IllegalTransition { phase, kind }),
                        "{name} + {kind}: {got:?}"
                    );
                    illegal += 1;
                }
            }
        }
    }

    // Determinism and the fragment law on completed random walks.
    let others = [TaskId::new("X1"), TaskId::new("X2")];
    let cfg = WalkConfig {
        start_ms: 1_700_000_000_000,
        max_steps: 40,
        complete: true,
        persons: &["bob", "carol"],
        others: &others,
    };
    let (mut completed, mut seed) = (0, 0u64);
    while completed < 100 {
        seed += 1;
        ensure!(seed < 10_000, "too few completed walks");
        let w = walk(&mut StdRng::seed_from_u64(seed), descriptor("T", TaskType::Analysis, "atlas", 3, "alice"), &cfg);
        let a = replay(w.descriptor.clone(), &w.events).map_err(|e| format!("seed {seed}: {e}"))?;
        let b = replay(w.descriptor.clone(), &w.events).map_err(|e| format!("seed {seed}: {e}"))?;
        ensure!(a == b, "seed {seed}: replay differs");
        if w.end != WalkPhase::Completed {
            continue;
        }
        completed += 1;
        let m = derive_measures(&a, LagPolicy::RequireClosed).map_err(|e| format!("seed {seed}: {e}"))?;
        let resumes = w.events.iter().filter(|e| e.kind == EventKind::Resumed).count();
        ensure!(m.d1_fragments as usize == 1 + resumes, "seed {seed}: d1 {} resumes {resumes}", m.d1_fragments);
    }

    // Trap horizon boundaries.
    let s = state_after(&[EventKind::Started, EventKind::SwitchRequested, EventKind::Suspended]);
    let at = |ms: i64| Timestamp::from_millis(ms).unwrap();
    let t0 = s.suspension_started_at().ok_or("no suspension")?.millis();
    let h = TrapHorizon::default();
    ensure!(!detect_trap(&s, at(t0 + h.millis()), h), "trap at the horizon");
    ensure!(detect_trap(&s, at(t0 + h.millis() + 1), h), "no trap beyond the horizon");
    Ok(format!("{illegal} rejected pairs, 100 completed walks, horizon boundary"))
}

fn sam_oracle() -> Check {
    let mut emitted = 0;
    for seed in 0..100u64 {
        let mut rng = StdRng::seed_from_u64(seed);
        let n = rng.gen_range(1..=10);
        let raw: Vec<Vec<CueType>> = (0..n).map(|_| sam::random_cues(&mut rng, 6)).collect();
        let sessions: Vec<_> = raw.iter().enumerate().map(|(i, c)| sam::session(i, TaskType::Analysis, c)).collect();
        let t = Threshold::new(apriori::random_threshold(&mut rng)).unwrap();
        let max_len = 2 + (seed as usize % 5);
        let rules = mine_sequences(&sessions, t, max_len).map_err(|e| e.to_string())?;
        let got: BTreeMap<Vec<CueType>, (Ratio<u64>, Ratio<u64>)> =
            rules.iter().map(|r| (r.sequence.clone(), (r.support, r.confidence))).collect();
        let want = sam::mine(&raw, t.get(), max_len);
        ensure!(got == want, "seed {seed}: sequences differ");
        for r in &rules {
            let prefix = &r.sequence[..r.sequence.len() - 1];
            if prefix.len() >= 2 {
                let p = got.get(prefix).ok_or_else(|| format!("seed {seed}: prefix of {:?} missing", r.sequence))?;
                ensure!(p.0 >= r.support, "seed {seed}: prefix support below {:?}", r.sequence);
            }
        }
        emitted += rules.len();
    }
    Ok(format!("100 session sets, {emitted} sequences"))
}

fn recommend() -> Check {
    ensure!(
        recommend_order(TaskType::Modeling, &[]) == DEFAULT_CUE_RANKING.to_vec(),
        "empty history order {:?}",
        recommend_order(TaskType::Modeling, &[])
    );
    ensure!(
        DEFAULT_CUE_RANKING
            == [CueType::Annotation, CueType::Thumbnail, CueType::Verbal, CueType::Eye, CueType::BehaviorGraph],
        "default ranking {DEFAULT_CUE_RANKING:?}"
    );
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let types = [None, Some(TaskType::Modeling), Some(TaskType::Analysis)];
    let all: BTreeSet<CueType> = CueType::ALL.iter().copied().collect();
    for i in 0..1_000 {
        let rules: Vec<CueSequenceRule> = (0..rng.gen_range(0..8))
            .map(|_| {
                let den = rng.gen_range(1..=10u64);
                CueSequenceRule {
                    task_type: types[rng.gen_range(0..types.len())],
                    sequence: sam::random_cues(&mut rng, 6),
                    support: Ratio::new(rng.gen_range(0..=den), den),
                    confidence: Ratio::new(rng.gen_range(0..=den), den),
                }
            })
            .collect();
        let t = *TaskType::ALL.get(rng.gen_range(0..TaskType::ALL.len())).unwrap();
        let order = recommend_order(t, &rules);
        let set: BTreeSet<CueType> = order.iter().copied().collect();
        ensure!(order.len() == 5 && set == all, "input {i}: {order:?}");
    }
    Ok("1000 inputs, default order on empty history".into())
}

async fn call(app: &Router, method: &str, uri: &str, body: String) -> Result<(StatusCode, Vec<u8>), String> {
    let req = Request::builder().method(method).uri(uri).body(Body::from(body)).map_err(|e| e.to_string())?;
    let res = app.clone().oneshot(req).await.map_err(|e| e.to_string())?;
    let status = res.status();
    let bytes = res.into_body().collect().await.map_err(|e| e.to_string())?.to_bytes();
    Ok((status, bytes.to_vec()))
}

async fn get_json(app: &Router, uri: &str) -> Result<Value, String> {
    let (status, body) = call(app, "GET", uri, String::new()).await?;
    ensure!(status == StatusCode::OK, "GET {uri}: {status} {}", String::from_utf8_lossy(&body));
    serde_json::from_slice(&body).map_err(|e| format!("GET {uri}: {e}"))
}

/// Every structured rule in a payload, found wherever it is nested.
fn narratives_in(v: &Value, out: &mut Vec<NarrativeRule>) {
    match v {
        Value::Object(m) => {
            if m.contains_key("text") && m.contains_key("rule") {
                if let Ok(n) = serde_json::from_value(v.clone()) {
                    out.push(n);
                    return;
                }
            }
            m.values().for_each(|x| narratives_in(x, out));
        }
        Value::Array(a) => a.iter().for_each(|x| narratives_in(x, out)),
        _ => {}
    }
}

fn app(config: Config, log: &str) -> Result<Router, String> {
    let mut store = Store::in_memory();
    let r = store.ingest(log.as_bytes()).map_err(|e| e.to_string())?;
    ensure!(r.rejected == 0, "fixture rejected: {:?}", r.rejections.first());
    Ok(router(Arc::new(AppState::new(config, store, Lexicon::default()))))
}

use tower::ServiceExt;

async fn narrative() -> Check {
    let params = MiningParams::new(TaskType::Modeling, half(), half()).with_discretization(case_study_discretization());
    let rules = mine(&case_study_records(), &params).map_err(|e| e.to_string())?;
    let rule = *maximal_rules(&rules).first().ok_or("no maximal rule")?;
    let lex = Lexicon::default();
    let n = render_disruptiveness(rule, &lex).map_err(|e| e.to_string())?;
    let stem = n.text.split(" (").next().unwrap_or_default();
    ensure!(stem == CASE_SENTENCE, "rendered `{}`", n.text);

    // Every payload kind that carries rules.
    let config = Config {
        discretization: case_study_discretization(),
        cue_min_support: Threshold::ratio(1, 5).unwrap(),
        ..Config::default()
    };
    let app_wide = app(config.clone(), &(case_study_log() + &synthetic_log(11, 1_500)))?;
    let mut payloads = vec![
        get_json(&app_wide, "/patterns?task_type=modeling").await?,
        get_json(&app_wide, "/advice/switch?task=M6&initiator=self&time=morning").await?,
        get_json(&app_wide, "/advice/switch?task=M6&initiator=external&requester=bob&time=afternoon").await?,
    ];
    for &t in TaskType::ALL {
        payloads.push(get_json(&app_wide, &format!("/patterns?task_type={t}&min_support=0.2")).await?);
    }
    // Suspension and resumption payloads on the case study alone, so the
    // visits below are the only cue history for modeling tasks.
    let app = app(config, &case_study_log())?;
    let suspend = [
        r#"{"record":"event","task_id":"M6","at":"2024-05-13T09:00:00.000Z","kind":"switch_requested","initiator":"self","interrupting_task_id":"I1","performer_id":"alice"}"#,
        r#"{"record":"event","task_id":"M6","at":"2024-05-13T09:01:00.000Z","kind":"suspended","performer_id":"alice"}"#,
    ]
    .join("\n");
    call(&app, "POST", "/events", suspend).await?;
    payloads.push(get_json(&app, "/suspension/M6?now=2024-05-13T10:00:00.000Z").await?);
    let end = r#"{"record":"event","task_id":"M6","at":"2024-05-13T10:00:00.000Z","kind":"interruption_ended","performer_id":"alice"}"#;
    call(&app, "POST", "/events", end.to_string()).await?;
    for (cue, at) in [("eye", "10:00:05"), ("verbal", "10:00:09")] {
        let body = format!(r#"{{"cue":"{cue}","at":"2024-05-13T{at}.000Z"}}"#);
        let (status, _) = call(&app, "POST", "/resumption/M6/cue-visit", body).await?;
        ensure!(status == StatusCode::NO_CONTENT, "cue visit {status}");
    }
    payloads.push(get_json(&app, "/resumption/M6/cues").await?);

    let mut found = Vec::new();
    payloads.iter().for_each(|p| narratives_in(p, &mut found));
    let cue_rules = found.iter().filter(|n| matches!(n.rule, RuleSource::CueSequence(_))).count();
    ensure!(cue_rules > 0, "no cue-sequence narratives in the payloads");
    for n in &found {
        let again = n.regenerate(&lex).map_err(|e| e.to_string())?;
        ensure!(again == n.text, "`{}` regenerates as `{again}`", n.text);
    }
    Ok(format!("sentence matches, {} payload rules regenerate ({cue_rules} cue)", found.len()))
}

fn context_items(v: &Value) -> Result<BTreeSet<CharacteristicItem>, String> {
    v["context"]
        .as_array()
        .ok_or("no context")?
        .iter()
        .map(|c| serde_json::from_value(c.clone()).map_err(|e| e.to_string()))
        .collect()
}

async fn end_to_end() -> Check {
    let start = Instant::now();
    let log = synthetic_log(2024, 10_000);
    let events = log.lines().filter(|l| l.contains(r#""record":"event""#)).count();
    ensure!(events == 10_000, "{events} events in the log");
    let store = Store::in_memory();
    let state = Arc::new(AppState::new(Config::default(), store, Lexicon::default()));
    let app = router(state.clone());
    let (status, body) = call(&app, "POST", "/events", log.clone()).await?;
    ensure!(status == StatusCode::OK, "ingest {status}");
    let report: Value = serde_json::from_slice(&body).map_err(|e| e.to_string())?;
    ensure!(report["rejected"] == 0, "ingest rejected {}", report["rejections"][0]);

    // Library view of the same snapshot.
    let mut lib = Store::in_memory();
    lib.ingest(log.as_bytes()).map_err(|e| e.to_string())?;
    let lex = Lexicon::default();
    let mut rules_total = 0;
    let fifth = Threshold::ratio(1, 5).unwrap();
    for (&t, (q, min)) in TaskType::ALL.iter().flat_map(|t| [(t, ("", half())), (t, ("&min_support=0.2", fifth))]) {
        let v = get_json(&app, &format!("/patterns?task_type={t}{q}")).await?;
        let params = MiningParams::new(t, min, half());
        let want: Vec<String> = mine(&lib.raw_records(), &params)
            .unwrap_or_default()
            .iter()
            .map(|r| render_disruptiveness(r, &lex).map(|n| n.text).map_err(|e| e.to_string()))
            .collect::<Result<_, _>>()?;
        let got: Vec<String> = v["rules"]
            .as_array()
            .ok_or("no rules")?
            .iter()
            .map(|r| r["text"].as_str().unwrap_or_default().to_string())
            .collect();
        ensure!(got == want, "/patterns {t}: {} rules vs {} from the library", got.len(), want.len());
        rules_total += got.len();
    }

    let v = get_json(&app, "/graph/communication").await?;
    let want = serde_json::to_value(communication_graph(&lib, None, None)).map_err(|e| e.to_string())?;
    ensure!(v == want, "/graph/communication differs from the library graph");
    let from = "2024-01-15T00:00:00.000Z";
    let to = "2024-02-15T00:00:00.000Z";
    let v = get_json(&app, &format!("/graph/communication?from={from}&to={to}")).await?;
    let want = communication_graph(&lib, from.parse().ok(), to.parse().ok());
    ensure!(v == serde_json::to_value(&want).map_err(|e| e.to_string())?, "ranged graph differs");

    let active: Vec<_> = lib.traces().filter(|t| t.state().phase.kind() == PhaseKind::Active).collect();
    ensure!(!active.is_empty(), "no active task in the synthetic log");
    let (mut advised, mut advice_rules) = (0, 0);
    for trace in active.iter().take(10) {
        let id = &trace.descriptor.task_id;
        for q in ["initiator=self&time=morning", "initiator=external&requester=p1&time=afternoon&blockage=yes"] {
            let v = get_json(&app, &format!("/advice/switch?task={id}&{q}&min_support=0.2")).await?;
            let context = context_items(&v)?;
            let params = MiningParams::new(trace.descriptor.task_type, fifth, half());
            let want: Vec<String> = mine(&lib.raw_records(), &params)
                .unwrap_or_default()
                .iter()
                .filter(|r| r.antecedent().iter().all(|c| context.contains(c)))
                .map(|r| render_disruptiveness(r, &lex).map(|n| n.text).map_err(|e| e.to_string()))
                .collect::<Result<_, _>>()?;
            let got: Vec<String> = v["rules"]
                .as_array()
                .ok_or("no rules")?
                .iter()
                .map(|r| r["text"].as_str().unwrap_or_default().to_string())
                .collect();
            ensure!(got == want, "/advice/switch {id} {q}: rules differ");
            advised += 1;
            advice_rules += got.len();
        }
    }
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(10))?;
    ensure!(advice_rules > 0, "every advice query came back empty");
    Ok(format!("10000 events, {rules_total} rules, {advised} advice queries with {advice_rules} rules, {elapsed:?}"))
}

fn report(name: &str, outcome: std::thread::Result<Check>) -> bool {
    let (ok, detail) = match outcome {
        Ok(Ok(d)) => (true, d),
        Ok(Err(e)) => (false, e),
        Err(p) => (
            false,
            p.downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()),
        ),
    };
    println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    ok
}

fn main() {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().expect("runtime");
    let sync_checks: [(&str, fn() -> Check); 6] = [
        ("case-study reproduction", case_study),
        ("apriori oracle equivalence", apriori_oracle),
        ("pruning rule", pruning),
        ("state-machine suite", state_machine),
        ("cue sequence oracle equivalence", sam_oracle),
        ("recommend_order", recommend),
    ];
    let mut all = true;
    for (name, f) in sync_checks {
        all &= report(name, catch_unwind(f));
    }
    all &= report("narrative determinism", catch_unwind(AssertUnwindSafe(|| rt.block_on(narrative()))));
    all &= report("end-to-end", catch_unwind(AssertUnwindSafe(|| rt.block_on(end_to_end()))));
    if !all {
        std::process::exit(1);
    }
}
