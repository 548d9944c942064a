//! Fixed data sets used across suites.

use std::collections::BTreeSet;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use switchlens_core::cues::CueType;
use switchlens_core::log::{to_line, CueVisitRecord, LogRecord, PersonProfile};
use switchlens_core::pattern::{Discretization, RawRecord};
use switchlens_core::{CharacteristicItem, PersonId, TaskId, TaskType, Timestamp};

use crate::logs::{descriptor, walk, WalkConfig};

/// Discretization used with the case-study fixtures: D1 > 2 fragments,
/// D2 > 300 s and D3 > 600 s count as high.
pub fn case_study_discretization() -> Discretization {
    Discretization::fixed(2.0, 300.0, 600.0)
}

fn chars(items: &[&str]) -> BTreeSet<CharacteristicItem> {
    items.iter().map(|s| s.parse().unwrap()).collect()
}

/// Five interrupted requirements-modeling tasks over three characteristics.
///
/// Three morning self-interruptions all show a long interruption lag; the two
/// external afternoon ones do not. Fragments and resumption lags vary so that
/// no other association reaches half of the records.
pub fn case_study_records() -> Vec<RawRecord> {
    let rows: [(&[&str], u32, f64, f64); 5] = [
        (&["initiator=self", "time_of_day=morning", "context_switch=same_project"], 1, 420.0, 900.0),
        (&["initiator=self", "time_of_day=morning", "context_switch=different_project"], 3, 60.0, 780.0),
        (&["initiator=self", "time_of_day=morning", "context_switch=different_project"], 1, 90.0, 1200.0),
        (&["initiator=external", "time_of_day=afternoon", "context_switch=same_project"], 1, 600.0, 45.0),
        (&["initiator=external", "time_of_day=afternoon", "context_switch=same_project"], 3, 30.0, 120.0),
    ];
    rows.iter()
        .map(|&(c, d1, d2, d3)| RawRecord {
            task_type: TaskType::Modeling,
            characteristics: chars(c),
            fragments: Some(d1),
            resumption_lag: Some(d2),
            interruption_lag: Some(d3),
        })
        .collect()
}

fn ev(task: &str, at: &str, kind: &str, extra: &str) -> String {
    format!(r#"{{"record":"event","task_id":"{task}","at":"{at}","kind":"{kind}","performer_id":"alice"{extra}}}"#)
}

fn task_line(id: &str, task_type: &str, project: &str, priority: u8) -> String {
    format!(
        r#"{{"record":"task","task_id":"{id}","project":"{project}","task_type":"{task_type}","granularity":"coarse","priority":{priority},"progress_status":"mid","performer_id":"alice","performer_experience":4}}"#
    )
}

/// The case study as a task log: five interrupted modeling tasks (one
/// interruption each, resumed and completed) plus an uninterrupted active
/// modeling task `M6` and the interrupting tasks.
pub fn case_study_log() -> String {
    let mut lines = vec![
        r#"{"record":"person","person_id":"alice","name":"Alice","role":"modeler","projects":["atlas"]}"#.to_string(),
        r#"{"record":"person","person_id":"bob","name":"Bob","role":"analyst","projects":["atlas"]}"#.to_string(),
        task_line("I1", "analysis", "atlas", 3),
        task_line("I2", "elicitation", "borealis", 3),
    ];
    // (task, day, hour, initiator extra, interrupting, d3 secs, d2 secs)
    let rows = [
        ("M1", 6, 9, "self", "I1", 900, 420),
        ("M2", 7, 9, "self", "I2", 780, 60),
        ("M3", 8, 10, "self", "I2", 1200, 90),
        ("M4", 9, 14, "external", "I1", 45, 600),
        ("M5", 10, 15, "external", "I1", 120, 30),
    ];
    for (task, day, hour, initiator, other, d3, d2) in rows {
        lines.push(task_line(task, "modeling", "atlas", 2));
        let t = |min: i64| {
            Timestamp::from_millis(
                utc_millis(2024, 5, day, hour) + min * 1000,
            )
            .unwrap()
            .to_string()
        };
        let extra = match initiator {
            "self" => format!(r#","initiator":"self","interrupting_task_id":"{other}""#),
            _ => format!(r#","initiator":"external","requester_id":"bob","interrupting_task_id":"{other}""#),
        };
        lines.push(ev(task, &t(-1800), "started", ""));
        lines.push(ev(task, &t(0), "switch_requested", &extra));
        lines.push(ev(task, &t(d3), "suspended", ""));
        lines.push(ev(task, &t(d3 + 1200), "interruption_ended", ""));
        lines.push(ev(task, &t(d3 + 1200 + d2), "resumed", ""));
        lines.push(ev(task, &t(d3 + 1200 + d2 + 600), "completed", ""));
    }
    lines.push(task_line("M6", "modeling", "atlas", 2));
    lines.push(ev("M6", "2024-05-13T08:30:00.000Z", "started", ""));
    lines.join("\n") + "\n"
}

/// Milliseconds since the epoch for `year-month-day hour:00:00Z`.
fn utc_millis(year: i64, month: i64, day: i64, hour: i64) -> i64 {
    // Days from civil, proleptic Gregorian.
    let y = if month <= 2 { year - 1 } else { year };
    let era = y.div_euclid(400);
    let yoe = y - era * 400;
    let mp = (month + 9) % 12;
    let doy = (153 * mp + 2) / 5 + day - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    let days = era * 146_097 + doe - 719_468;
    (days * 24 + hour) * 3_600_000
}

/// A synthetic multi-task log with exactly `events` event records, plus
/// person and task records and cue visits for resumed tasks.
pub fn synthetic_log(seed: u64, events: usize) -> String {
    let mut rng = StdRng::seed_from_u64(seed);
    let persons = ["p0", "p1", "p2", "p3", "p4", "p5", "p6", "p7"];
    let types = [
        TaskType::Elicitation,
        TaskType::Analysis,
        TaskType::Modeling,
        TaskType::Specification,
        TaskType::Validation,
        TaskType::Evolution,
    ];
    let projects = ["atlas", "borealis", "cygnus"];
    let mut out: Vec<String> = persons
        .iter()
        .map(|p| {
            to_line(&LogRecord::Person(PersonProfile {
                person_id: PersonId::new(*p),
                name: Some(p.to_uppercase()),
                role: None,
                projects: vec![projects[rng.gen_range(0..projects.len())].to_string()],
            }))
        })
        .collect();
    // Interrupting tasks are drawn from a fixed pool; ids past the generated
    // tasks are fine, they resolve to an unknown context.
    let others: Vec<TaskId> = (0..events / 12 + 1).map(|i| TaskId::new(format!("S{i}"))).collect();
    let base = utc_millis(2024, 1, 1, 0);
    let mut walks = Vec::new();
    let mut planned = 0;
    while planned < events {
        let d = descriptor(
            &format!("S{}", walks.len()),
            types[rng.gen_range(0..types.len())],
            projects[rng.gen_range(0..projects.len())],
            rng.gen_range(1..=5),
            persons[rng.gen_range(0..persons.len())],
        );
        let cfg = WalkConfig {
            start_ms: base + rng.gen_range(0..90i64) * 86_400_000,
            max_steps: rng.gen_range(4..24),
            complete: rng.gen_bool(0.8),
            persons: &persons,
            others: &others,
        };
        let w = walk(&mut rng, d, &cfg);
        assert!(!w.events.is_empty(), "walks start with an event");
        planned += w.events.len();
        walks.push(w);
    }
    for w in &walks {
        out.push(to_line(&LogRecord::Task(w.descriptor.clone())));
    }
    let mut emitted = 0;
    for w in walks {
        let take = w.events.len().min(events - emitted);
        let mut resumes = 0;
        for (i, e) in w.events[..take].iter().enumerate() {
            out.push(to_line(&LogRecord::Event(e.clone())));
            if e.kind == switchlens_core::EventKind::Resumed {
                resumes += 1;
                let next = w.events[..take].get(i + 1).map(|n| n.at.millis());
                let mut at = e.at.millis();
                for _ in 0..rng.gen_range(1..5) {
                    at += rng.gen_range(1..5_000);
                    if next.is_some_and(|n| at >= n) {
                        break;
                    }
                    out.push(to_line(&LogRecord::CueVisit(CueVisitRecord {
                        session_id: format!("{}#{resumes}", e.task_id),
                        task_id: e.task_id.clone(),
                        cue: CueType::ALL[rng.gen_range(0..CueType::ALL.len())],
                        at: Timestamp::from_millis(at).unwrap(),
                    })));
                }
            }
        }
        emitted += take;
    }
    assert_eq!(emitted, events, "not enough tasks for the requested event count");
    out.join("\n") + "\n"
}
