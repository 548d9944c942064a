//! Payloads for the three interruption stages, computed from a store snapshot.
//!
//! Every function here is a pure function of its arguments; the HTTP layer
//! only locks the store, fetches cached rules and serializes the result.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use switchlens_core::cues::{build_graph, recommend_order, CueSequenceRule, CueType};
use switchlens_core::graph::communication_graph;
use switchlens_core::items::{CharacteristicItem, CharacteristicKey, Level, Measure};
use switchlens_core::log::{to_line, CueVisitRecord, LogRecord};
use switchlens_core::machine::{detect_trap, Phase, PhaseKind, TaskTrace};
use switchlens_core::narrative::{render, render_disruptiveness, RuleSource};
use switchlens_core::pattern::{maximal_rules, median};
use switchlens_core::ratio::{self, format_exact};
use switchlens_core::store::{time_of_day, Store};
use switchlens_core::{
    AssociationRule, CommunicationGraph, Discretization, EventKind, Initiator, Lexicon, NarrativeRule, PersonId,
    TaskId, TaskType, Threshold, Timestamp, TrapHorizon,
};

use crate::error::ApiError;

/// Recall time constant for resuming work, in seconds, with its observed range.
pub const RECALL_SECS: u64 = 192;
pub const RECALL_RANGE_SECS: [u64; 2] = [12, 912];

const MAX_REMINDERS: usize = 32;

fn trace<'a>(store: &'a Store, task: &TaskId) -> Result<&'a TaskTrace, ApiError> {
    store
        .trace(task)
        .ok_or_else(|| ApiError::not_found(format!("unknown task `{task}`")))
}

pub fn narratives<'a>(
    rules: impl IntoIterator<Item = &'a AssociationRule>,
    lexicon: &Lexicon,
) -> Result<Vec<NarrativeRule>, ApiError> {
    rules
        .into_iter()
        .map(|r| render_disruptiveness(r, lexicon).map_err(|e| ApiError::internal(e.to_string())))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Patterns {
    pub task_type: TaskType,
    pub min_support: Threshold,
    pub min_confidence: Threshold,
    pub discretization: Discretization,
    pub watermark: u64,
    pub rules: Vec<NarrativeRule>,
}

/// Switch context under evaluation; absent keys are unconstrained.
pub type Context = BTreeMap<CharacteristicKey, CharacteristicItem>;

/// Whether no antecedent item contradicts `context`.
pub fn consistent(rule: &AssociationRule, context: &Context) -> bool {
    rule.antecedent()
        .iter()
        .all(|item| context.get(&item.key()).is_none_or(|c| c == item))
}

/// Whether every antecedent item is stated in `context`.
pub fn covered(rule: &AssociationRule, context: &Context) -> bool {
    rule.antecedent().iter().all(|item| context.get(&item.key()) == Some(item))
}

/// Hypothetical switch described by an advice query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwitchQuery {
    pub task: TaskId,
    pub initiator: Initiator,
    /// A `morning`/`afternoon`/`evening` bucket or a timestamp.
    pub time: Option<String>,
    pub requester: Option<PersonId>,
    pub interrupting: Option<TaskId>,
    pub blockage: Option<bool>,
    pub boredom: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub level: Level,
    pub confidence: f64,
    pub confidence_exact: String,
    /// Index into the advice's `rules`.
    pub rule: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextFlags {
    pub blockage: Option<bool>,
    pub boredom: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchAdvice {
    pub task_id: TaskId,
    pub task_type: TaskType,
    pub context: Vec<CharacteristicItem>,
    /// Rules whose antecedent is fully stated by `context`.
    pub rules: Vec<NarrativeRule>,
    /// Maximal rules that also need characteristics the context leaves open.
    pub related: Vec<NarrativeRule>,
    pub predicted: BTreeMap<Measure, Prediction>,
    pub flags: ContextFlags,
    pub graph: CommunicationGraph,
}

fn item(key: CharacteristicKey, value: &str) -> Result<CharacteristicItem, ApiError> {
    CharacteristicItem::new(key, value).map_err(|e| ApiError::bad_request(e.to_string()))
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

/// Characteristics implied by a query, against the task it would interrupt.
pub fn switch_context(store: &Store, primary: &TaskTrace, q: &SwitchQuery) -> Result<Context, ApiError> {
    let mut items = vec![item(CharacteristicKey::Initiator, q.initiator.as_str())?];
    if let Some(t) = &q.time {
        let bucket = match t.parse::<Timestamp>() {
            Ok(ts) => time_of_day(ts, store.offset()),
            Err(_) => t.as_str(),
        };
        items.push(item(CharacteristicKey::TimeOfDay, bucket).map_err(|_| {
            ApiError::bad_request(format!("time `{t}` is neither a timestamp nor morning/afternoon/evening"))
        })?);
    }
    if let Some(id) = &q.interrupting {
        let other = store.trace(id).map(|t| &t.descriptor);
        let d = &primary.descriptor;
        let context = match other {
            Some(o) if o.project == d.project => "same_project",
            Some(_) => "different_project",
            None => "unknown",
        };
        let priority = match other.map(|o| o.priority.get().cmp(&d.priority.get())) {
            Some(std::cmp::Ordering::Less) => "higher",
            Some(std::cmp::Ordering::Greater) => "lower",
            Some(std::cmp::Ordering::Equal) => "equal",
            None => "unknown",
        };
        items.push(item(CharacteristicKey::ContextSwitch, context)?);
        items.push(item(
            CharacteristicKey::InterruptingType,
            other.map_or("unknown", |o| o.task_type.as_str()),
        )?);
        items.push(item(CharacteristicKey::PriorityRelation, priority)?);
    }
    if let Some(b) = q.blockage {
        items.push(item(CharacteristicKey::Blockage, yes_no(b))?);
    }
    if let Some(b) = q.boredom {
        items.push(item(CharacteristicKey::Boredom, yes_no(b))?);
    }
    Ok(items.into_iter().map(|i| (i.key(), i)).collect())
}

/// Confidence, then the more specific antecedent, then the narrower consequent.
fn specificity(r: &AssociationRule) -> (ratio::Fraction, usize, std::cmp::Reverse<usize>) {
    (r.confidence(), r.antecedent().len(), std::cmp::Reverse(r.consequent().len()))
}

/// Advice before a switch. `rules` are the mined rules for the task's type, best first.
pub fn switch_advice(
    store: &Store,
    lexicon: &Lexicon,
    rules: &[AssociationRule],
    q: &SwitchQuery,
) -> Result<SwitchAdvice, ApiError> {
    let trace = trace(store, &q.task)?;
    let phase = trace.state().phase.kind();
    if phase != PhaseKind::Active {
        return Err(ApiError::conflict(format!("task `{}` is {phase}, not active", q.task)));
    }
    let task_type = trace.descriptor.task_type;
    let context = switch_context(store, trace, q)?;
    let (matching, open): (Vec<&AssociationRule>, Vec<&AssociationRule>) = rules
        .iter()
        .filter(|r| r.task_type() == task_type && consistent(r, &context))
        .partition(|r| covered(r, &context));
    let open: Vec<AssociationRule> = open.into_iter().cloned().collect();
    let mut predicted = BTreeMap::new();
    for (i, r) in matching.iter().enumerate() {
        for d in r.consequent() {
            let better = predicted
                .get(&d.measure)
                .is_none_or(|p: &(usize, &AssociationRule)| specificity(r) > specificity(p.1));
            if better {
                predicted.insert(d.measure, (i, *r));
            }
        }
    }
    let predicted = predicted
        .into_iter()
        .map(|(m, (i, r))| {
            let level = r
                .consequent()
                .iter()
                .find(|d| d.measure == m)
                .expect("indexed by its own consequent")
                .level;
            let p = Prediction {
                level,
                confidence: ratio::to_f64(r.confidence()),
                confidence_exact: format_exact(r.confidence()),
                rule: i,
            };
            (m, p)
        })
        .collect();
    let focus = match (q.initiator, &q.requester) {
        (Initiator::External, Some(r)) => r.clone(),
        _ => trace.descriptor.performer_id.clone(),
    };
    Ok(SwitchAdvice {
        task_id: q.task.clone(),
        task_type,
        context: context.into_values().collect(),
        rules: narratives(matching, lexicon)?,
        related: narratives(maximal_rules(&open), lexicon)?,
        predicted,
        flags: ContextFlags {
            blockage: q.blockage,
            boredom: q.boredom,
        },
        graph: communication_graph(store, None, None).slice_around(&focus),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Popup,
    VisualPin,
    Sound,
    Email,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reminder {
    pub at: Timestamp,
    pub modalities: Vec<Modality>,
    pub due: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuspensionStatus {
    pub task_id: TaskId,
    pub phase: PhaseKind,
    /// Fragments so far, counting the one before this suspension.
    pub fragments: u32,
    pub depth: u32,
    pub suspended_at: Timestamp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interruption_ended_at: Option<Timestamp>,
    pub now: Timestamp,
    pub elapsed_secs: f64,
    pub trap_risk: bool,
    pub trap_horizon_secs: u64,
    pub reminders: Vec<Reminder>,
    pub reminder_text: String,
    pub rules: Vec<NarrativeRule>,
}

/// Reminder times: the first `first_secs` after `anchor`, then each gap
/// doubles, with a final reminder when the trap horizon is reached.
pub fn reminder_schedule(
    anchor: Timestamp,
    suspended_at: Timestamp,
    first_secs: u64,
    horizon: TrapHorizon,
    now: Timestamp,
) -> Vec<Reminder> {
    let cap = suspended_at.millis().saturating_add(horizon.millis());
    let mut out = Vec::new();
    let mut gap = first_secs.max(1) as i64 * 1000;
    let mut at = anchor.millis().saturating_add(gap);
    while at < cap && out.len() + 1 < MAX_REMINDERS {
        let modalities = if out.is_empty() {
            vec![Modality::Popup, Modality::VisualPin]
        } else {
            vec![Modality::Popup, Modality::Sound]
        };
        out.push((at, modalities));
        gap = gap.saturating_mul(2);
        at = at.saturating_add(gap);
    }
    out.push((cap, vec![Modality::Popup, Modality::Email]));
    out.into_iter()
        .filter_map(|(ms, modalities)| {
            let at = Timestamp::from_millis(ms)?;
            Some(Reminder {
                at,
                modalities,
                due: at <= now,
            })
        })
        .collect()
}

fn human_duration(secs: f64) -> String {
    let s = secs.max(0.0) as u64;
    let (d, h, m) = (s / 86_400, (s % 86_400) / 3600, (s % 3600) / 60);
    match (d, h) {
        (0, 0) => format!("{m} min"),
        (0, _) => format!("{h} h {m:02} min"),
        _ => format!("{d} d {h} h"),
    }
}

/// Status of a suspended task. `rules` are the mined rules for its type.
pub fn suspension_status(
    store: &Store,
    lexicon: &Lexicon,
    rules: &[AssociationRule],
    task: &TaskId,
    now: Timestamp,
    horizon: TrapHorizon,
    default_lag_secs: u64,
) -> Result<SuspensionStatus, ApiError> {
    let trace = trace(store, task)?;
    let state = trace.state();
    let (suspended_at, ended_at) = match state.phase {
        Phase::Suspended { suspended_at } => (suspended_at, None),
        Phase::ResumptionPending {
            suspended_at,
            interruption_ended_at,
        } => (suspended_at, Some(interruption_ended_at)),
        other => {
            return Err(ApiError::conflict(format!(
                "task `{task}` is {}, not suspended",
                other.kind()
            )))
        }
    };
    let task_type = trace.descriptor.task_type;
    let lags = store.resumption_lags(task_type);
    let first = median(&lags).map_or(default_lag_secs, |m| m.ceil().max(1.0) as u64);
    let elapsed_secs = now.secs_since(suspended_at).max(0.0);
    let trap_risk = detect_trap(&state, now, horizon);

    // Rules whose antecedent fits the interruption that caused this suspension.
    let episode: Context = store
        .task_records(task)
        .pop()
        .map(|r| r.characteristics.into_iter().map(|c| (c.key(), c)).collect())
        .unwrap_or_default();
    let matching = rules
        .iter()
        .filter(|r| r.task_type() == task_type && consistent(r, &episode));

    let mut reminder_text = format!(
        "`{task}` has been suspended for {}; it is in {} fragment{} so far.",
        human_duration(elapsed_secs),
        state.fragment_index,
        if state.fragment_index == 1 { "" } else { "s" }
    );
    if trap_risk {
        reminder_text.push_str(" It is past the trap horizon; resume it or abandon it explicitly.");
    }
    Ok(SuspensionStatus {
        task_id: task.clone(),
        phase: state.phase.kind(),
        fragments: state.fragment_index,
        depth: state.depth,
        suspended_at,
        interruption_ended_at: ended_at,
        now,
        elapsed_secs,
        trap_risk,
        trap_horizon_secs: horizon.into(),
        reminders: reminder_schedule(ended_at.unwrap_or(suspended_at), suspended_at, first, horizon, now),
        reminder_text,
        rules: narratives(matching, lexicon)?,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CuePayload {
    pub cue: CueType,
    /// Annotation texts for `annotation`, artifact ids for `thumbnail`.
    pub refs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NavigationHint {
    pub from: CueType,
    pub to: CueType,
    pub weight: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResumptionPlan {
    pub task_id: TaskId,
    pub session_id: String,
    pub phase: PhaseKind,
    pub cues: Vec<CueType>,
    pub payloads: Vec<CuePayload>,
    pub recall_secs: u64,
    pub recall_range_secs: [u64; 2],
    pub navigation: Vec<NavigationHint>,
    pub visited: Vec<CueType>,
    pub rules: Vec<NarrativeRule>,
}

/// Open cue session of a task that is waiting to resume or has just resumed.
fn open_session(store: &Store, task: &TaskId) -> Result<(String, PhaseKind), ApiError> {
    let trace = trace(store, task)?;
    let phase = trace.state().phase.kind();
    let just_resumed =
        phase == PhaseKind::Active && trace.events().last().is_some_and(|e| e.kind == EventKind::Resumed);
    if phase != PhaseKind::ResumptionPending && !just_resumed {
        return Err(ApiError::conflict(format!(
            "task `{task}` is {phase}; cues apply while resuming"
        )));
    }
    let id = store
        .resumption_session_id(task)
        .ok_or_else(|| ApiError::conflict(format!("task `{task}` has no resumption")))?;
    Ok((id, phase))
}

/// Resumption plan. `cue_rules` are the sequence rules mined for the task's type.
pub fn resumption_plan(
    store: &Store,
    lexicon: &Lexicon,
    cue_rules: &[CueSequenceRule],
    task: &TaskId,
) -> Result<ResumptionPlan, ApiError> {
    let (session_id, phase) = open_session(store, task)?;
    let trace = trace(store, task)?;
    let task_type = trace.descriptor.task_type;
    let cues = recommend_order(task_type, cue_rules);

    let annotations: Vec<String> = trace.events().filter_map(|e| e.annotations.clone()).collect();
    let artifacts: Vec<String> = trace.events().flat_map(|e| e.artifact_ids.iter().cloned()).collect();
    let payloads = cues
        .iter()
        .map(|&cue| CuePayload {
            cue,
            refs: match cue {
                CueType::Annotation => annotations.clone(),
                CueType::Thumbnail => artifacts.clone(),
                _ => Vec::new(),
            },
        })
        .collect();

    let sessions: Vec<_> = store.sessions().into_iter().filter(|s| s.task_type == task_type).collect();
    let graph = build_graph(&sessions);
    let navigation = cues
        .iter()
        .filter_map(|&from| {
            let to = graph.next_cue(from)?;
            Some(NavigationHint {
                from,
                to,
                weight: graph.weight(from, to),
            })
        })
        .collect();
    let visited = store
        .session_visits(&session_id)
        .map(|v| v.iter().map(|r| r.cue).collect())
        .unwrap_or_default();
    let rules = cue_rules
        .iter()
        .filter(|r| r.task_type.is_none_or(|t| t == task_type))
        .map(|r| render(&RuleSource::CueSequence(r.clone()), lexicon).map_err(|e| ApiError::internal(e.to_string())))
        .collect::<Result<_, _>>()?;
    Ok(ResumptionPlan {
        task_id: task.clone(),
        session_id,
        phase,
        cues,
        payloads,
        recall_secs: RECALL_SECS,
        recall_range_secs: RECALL_RANGE_SECS,
        navigation,
        visited,
        rules,
    })
}

/// Appends a cue visit to the task's open session.
pub fn record_cue_visit(store: &mut Store, task: &TaskId, cue: CueType, at: Timestamp) -> Result<(), ApiError> {
    let (session_id, _) = open_session(store, task)?;
    let line = to_line(&LogRecord::CueVisit(CueVisitRecord {
        session_id,
        task_id: task.clone(),
        cue,
        at,
    }));
    let report = store
        .ingest_lines([(1, line.as_str())])
        .map_err(|e| ApiError::internal(e.to_string()))?;
    match report.rejections.first() {
        Some(r) => Err(ApiError::conflict(r.reason.clone())),
        None => Ok(()),
    }
}
