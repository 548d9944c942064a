//! Event-sourced task execution: a task starts, is interrupted (possibly with
//! nested interruptions), resumes, and eventually completes or is abandoned in
//! the trap state.
//!
//! | phase               | event               | next phase                          |
//! |---------------------|---------------------|-------------------------------------|
//! | Created             | Started             | Active (f = 1)                      |
//! | Active              | SwitchRequested     | InterruptionPending                 |
//! | Active              | Completed           | Completed                           |
//! | InterruptionPending | Suspended           | Suspended (d = 1)                   |
//! | Suspended           | SwitchRequested     | Suspended (alert recorded)          |
//! | Suspended           | Suspended           | Suspended (d + 1)                   |
//! | Suspended           | InterruptionEnded   | Suspended (d - 1) or ResumptionPending when d = 1 |
//! | Suspended           | Abandoned           | Trapped                             |
//! | ResumptionPending   | Resumed             | Active (f + 1)                      |
//! | ResumptionPending   | Abandoned           | Trapped                             |
//!
//! Every other pair is an [`TransitionError::IllegalTransition`].

use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::task::{EventKind, TaskDescriptor, TaskEvent, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "phase", rename_all = "snake_case")]
pub enum Phase {
    Created,
    Active,
    InterruptionPending {
        alert_at: Timestamp,
    },
    /// `suspended_at` is the start of the outermost suspension.
    Suspended {
        suspended_at: Timestamp,
    },
    ResumptionPending {
        suspended_at: Timestamp,
        interruption_ended_at: Timestamp,
    },
    Completed,
    Trapped,
}

/// Data-free discriminant of [`Phase`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseKind {
    Created,
    Active,
    InterruptionPending,
    Suspended,
    ResumptionPending,
    Completed,
    Trapped,
}

impl PhaseKind {
    pub const ALL: [PhaseKind; 7] = [
        PhaseKind::Created,
        PhaseKind::Active,
        PhaseKind::InterruptionPending,
        PhaseKind::Suspended,
        PhaseKind::ResumptionPending,
        PhaseKind::Completed,
        PhaseKind::Trapped,
    ];
}

impl fmt::Display for PhaseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PhaseKind::Created => "created",
            PhaseKind::Active => "active",
            PhaseKind::InterruptionPending => "interruption_pending",
            PhaseKind::Suspended => "suspended",
            PhaseKind::ResumptionPending => "resumption_pending",
            PhaseKind::Completed => "completed",
            PhaseKind::Trapped => "trapped",
        };
        f.write_str(s)
    }
}

impl Phase {
    pub fn kind(&self) -> PhaseKind {
        match self {
            Phase::Created => PhaseKind::Created,
            Phase::Active => PhaseKind::Active,
            Phase::InterruptionPending { .. } => PhaseKind::InterruptionPending,
            Phase::Suspended { .. } => PhaseKind::Suspended,
            Phase::ResumptionPending { .. } => PhaseKind::ResumptionPending,
            Phase::Completed => PhaseKind::Completed,
            Phase::Trapped => PhaseKind::Trapped,
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, Phase::Completed | Phase::Trapped)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TaskState {
    #[serde(flatten)]
    pub phase: Phase,
    pub fragment_index: u32,
    pub depth: u32,
    /// Timestamp of the event that produced this state.
    pub last_at: Option<Timestamp>,
}

impl Default for TaskState {
    fn default() -> Self {
        TaskState::created()
    }
}

impl TaskState {
    pub fn created() -> Self {
        TaskState {
            phase: Phase::Created,
            fragment_index: 0,
            depth: 0,
            last_at: None,
        }
    }

    /// Start of the outermost suspension, while suspended or awaiting resumption.
    pub fn suspension_started_at(&self) -> Option<Timestamp> {
        match self.phase {
            Phase::Suspended { suspended_at } | Phase::ResumptionPending { suspended_at, .. } => {
                Some(suspended_at)
            }
            _ => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TransitionError {
    #[error("illegal transition: {kind} while {phase}")]
    IllegalTransition { phase: PhaseKind, kind: EventKind },
    #[error("event at {at} is not after the previous event at {previous}")]
    NonMonotonicTimestamp { previous: Timestamp, at: Timestamp },
    #[error("task is in terminal state {0}")]
    TerminalState(PhaseKind),
}

/// Applies one event to a state.
pub fn apply_event(state: &TaskState, event: &TaskEvent) -> Result<TaskState, TransitionError> {
    if state.phase.is_terminal() {
        return Err(TransitionError::TerminalState(state.phase.kind()));
    }
    if let Some(previous) = state.last_at {
        if event.at <= previous {
            return Err(TransitionError::NonMonotonicTimestamp {
                previous,
                at: event.at,
            });
        }
    }
    let at = event.at;
    let illegal = || TransitionError::IllegalTransition {
        phase: state.phase.kind(),
        kind: event.kind,
    };
    let mut next = TaskState {
        last_at: Some(at),
        ..*state
    };
    match (state.phase, event.kind) {
        (Phase::Created, EventKind::Started) => {
            next.phase = Phase::Active;
            next.fragment_index = 1;
        }
        (Phase::Active, EventKind::SwitchRequested) => {
            next.phase = Phase::InterruptionPending { alert_at: at };
        }
        (Phase::Active, EventKind::Completed) => {
            next.phase = Phase::Completed;
        }
        (Phase::InterruptionPending { .. }, EventKind::Suspended) => {
            next.phase = Phase::Suspended { suspended_at: at };
            next.depth = 1;
        }
        (Phase::Suspended { .. }, EventKind::SwitchRequested) => {}
        (Phase::Suspended { .. }, EventKind::Suspended) => {
            next.depth = state.depth + 1;
        }
        (Phase::Suspended { suspended_at }, EventKind::InterruptionEnded) => {
            if state.depth > 1 {
                next.depth = state.depth - 1;
            } else {
                next.depth = 0;
                next.phase = Phase::ResumptionPending {
                    suspended_at,
                    interruption_ended_at: at,
                };
            }
        }
        (Phase::ResumptionPending { .. }, EventKind::Resumed) => {
            next.phase = Phase::Active;
            next.fragment_index = state.fragment_index + 1;
        }
        (Phase::Suspended { .. } | Phase::ResumptionPending { .. }, EventKind::Abandoned) => {
            next.phase = Phase::Trapped;
            next.depth = 0;
        }
        _ => return Err(illegal()),
    }
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub event: TaskEvent,
    pub state: TaskState,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReplayError {
    #[error("event {index}: {source}")]
    Transition {
        index: usize,
        #[source]
        source: TransitionError,
    },
    #[error("event {index} belongs to task `{found}`, not `{expected}`")]
    ForeignEvent {
        index: usize,
        expected: String,
        found: String,
    },
}

impl ReplayError {
    pub fn index(&self) -> usize {
        match self {
            ReplayError::Transition { index, .. } | ReplayError::ForeignEvent { index, .. } => *index,
        }
    }
}

/// The full history of one task: its descriptor and every state it passed through.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskTrace {
    pub descriptor: TaskDescriptor,
    transitions: Vec<Transition>,
}

impl TaskTrace {
    pub fn new(descriptor: TaskDescriptor) -> Self {
        TaskTrace {
            descriptor,
            transitions: Vec::new(),
        }
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn events(&self) -> impl Iterator<Item = &TaskEvent> {
        self.transitions.iter().map(|t| &t.event)
    }

    pub fn state(&self) -> TaskState {
        self.transitions
            .last()
            .map(|t| t.state)
            .unwrap_or_else(TaskState::created)
    }

    /// Checks an event against the current state without recording it.
    pub fn check(&self, event: &TaskEvent) -> Result<TaskState, ReplayError> {
        let index = self.transitions.len();
        if event.task_id != self.descriptor.task_id {
            return Err(ReplayError::ForeignEvent {
                index,
                expected: self.descriptor.task_id.0.clone(),
                found: event.task_id.0.clone(),
            });
        }
        apply_event(&self.state(), event).map_err(|source| ReplayError::Transition { index, source })
    }

    /// Appends an event, leaving the trace untouched on error.
    pub fn push(&mut self, event: TaskEvent) -> Result<&TaskState, ReplayError> {
        let state = self.check(&event)?;
        self.transitions.push(Transition { event, state });
        Ok(&self.transitions.last().expect("just pushed").state)
    }

    /// Top-level interruption episodes in order of occurrence.
    pub fn episodes(&self) -> Vec<Episode<'_>> {
        let mut episodes: Vec<Episode<'_>> = Vec::new();
        let mut prev = TaskState::created();
        let mut alert: Option<&TaskEvent> = None;
        for t in &self.transitions {
            match (prev.phase, t.state.phase) {
                (Phase::Active, Phase::InterruptionPending { .. }) => alert = Some(&t.event),
                (Phase::InterruptionPending { alert_at }, Phase::Suspended { .. }) => {
                    episodes.push(Episode {
                        switch: alert.take().expect("pending phase follows a switch request"),
                        suspended: &t.event,
                        interruption_lag: t.event.at.secs_since(alert_at),
                        max_depth: 1,
                        ended_at: None,
                        resumed_at: None,
                    });
                }
                (Phase::Suspended { .. }, Phase::Suspended { .. }) => {
                    if let Some(ep) = episodes.last_mut() {
                        ep.max_depth = ep.max_depth.max(t.state.depth);
                    }
                }
                (Phase::Suspended { .. }, Phase::ResumptionPending { .. }) => {
                    if let Some(ep) = episodes.last_mut() {
                        ep.ended_at = Some(t.event.at);
                    }
                }
                (Phase::ResumptionPending { .. }, Phase::Active) => {
                    if let Some(ep) = episodes.last_mut() {
                        ep.resumed_at = Some(t.event.at);
                    }
                }
                _ => {}
            }
            prev = t.state;
        }
        episodes
    }
}

/// One top-level interruption: switch request, suspension, and (if reached)
/// the end of the interruption and resumption of the primary task.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode<'a> {
    pub switch: &'a TaskEvent,
    pub suspended: &'a TaskEvent,
    /// Seconds from the switch request to the suspension.
    pub interruption_lag: f64,
    pub max_depth: u32,
    pub ended_at: Option<Timestamp>,
    pub resumed_at: Option<Timestamp>,
}

impl Episode<'_> {
    /// Seconds from the end of the interruption to resumption.
    pub fn resumption_lag(&self) -> Option<f64> {
        Some(self.resumed_at?.secs_since(self.ended_at?))
    }

    /// The interrupting task, taken from the switch request or the suspension.
    pub fn interrupting_task(&self) -> Option<&crate::task::TaskId> {
        self.switch
            .interrupting_task_id
            .as_ref()
            .or(self.suspended.interrupting_task_id.as_ref())
    }
}

/// Folds `events` over a fresh trace for `descriptor`.
pub fn replay(descriptor: TaskDescriptor, events: &[TaskEvent]) -> Result<TaskTrace, ReplayError> {
    let mut trace = TaskTrace::new(descriptor);
    for event in events {
        trace.push(event.clone())?;
    }
    Ok(trace)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisruptivenessMeasures {
    /// D1: number of task fragments.
    pub d1_fragments: u32,
    /// D2: end of interruption to resumption, seconds.
    pub d2_resumption_lags: Vec<f64>,
    /// D3: switch request to suspension, seconds.
    pub d3_interruption_lags: Vec<f64>,
    pub nested_depth_max: u32,
    /// Suspension to end of interruption, seconds, one per closed suspension.
    pub suspension_durations: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LagPolicy {
    /// Open lags are left out of the measures.
    AllowOpen,
    /// A trace waiting on a suspension or a resumption is an error.
    RequireClosed,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MeasureError {
    #[error("trace is still {0}; lags are open")]
    IncompleteTrace(PhaseKind),
}

pub fn derive_measures(
    trace: &TaskTrace,
    policy: LagPolicy,
) -> Result<DisruptivenessMeasures, MeasureError> {
    let phase = trace.state().phase.kind();
    if policy == LagPolicy::RequireClosed
        && matches!(phase, PhaseKind::InterruptionPending | PhaseKind::ResumptionPending)
    {
        return Err(MeasureError::IncompleteTrace(phase));
    }
    let mut m = DisruptivenessMeasures {
        d1_fragments: 0,
        d2_resumption_lags: Vec::new(),
        d3_interruption_lags: Vec::new(),
        nested_depth_max: 0,
        suspension_durations: Vec::new(),
    };
    let mut prev = TaskState::created();
    for t in trace.transitions() {
        let at = t.event.at;
        match (prev.phase, t.state.phase) {
            (Phase::Created | Phase::ResumptionPending { .. }, Phase::Active) => {
                m.d1_fragments += 1;
                if let Phase::ResumptionPending {
                    interruption_ended_at,
                    ..
                } = prev.phase
                {
                    m.d2_resumption_lags.push(at.secs_since(interruption_ended_at));
                }
            }
            (Phase::InterruptionPending { alert_at }, Phase::Suspended { .. }) => {
                m.d3_interruption_lags.push(at.secs_since(alert_at));
            }
            (Phase::Suspended { suspended_at }, Phase::ResumptionPending { .. }) => {
                m.suspension_durations.push(at.secs_since(suspended_at));
            }
            _ => {}
        }
        m.nested_depth_max = m.nested_depth_max.max(t.state.depth);
        prev = t.state;
    }
    Ok(m)
}

/// How long a suspended task may wait before it counts as trapped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u64", into = "u64")]
pub struct TrapHorizon(Duration);

impl TrapHorizon {
    pub const DEFAULT_SECS: u64 = 7 * 24 * 3600;

    /// `None` for a zero horizon.
    pub fn new(d: Duration) -> Option<Self> {
        (!d.is_zero()).then_some(TrapHorizon(d))
    }

    pub fn from_secs(secs: u64) -> Option<Self> {
        Self::new(Duration::from_secs(secs))
    }

    pub fn duration(self) -> Duration {
        self.0
    }

    pub fn millis(self) -> i64 {
        i64::try_from(self.0.as_millis()).unwrap_or(i64::MAX)
    }
}

impl Default for TrapHorizon {
    fn default() -> Self {
        TrapHorizon(Duration::from_secs(Self::DEFAULT_SECS))
    }
}

impl TryFrom<u64> for TrapHorizon {
    type Error = String;

    fn try_from(secs: u64) -> Result<Self, Self::Error> {
        TrapHorizon::from_secs(secs).ok_or_else(|| "trap horizon must be positive".to_string())
    }
}

impl From<TrapHorizon> for u64 {
    fn from(h: TrapHorizon) -> u64 {
        h.0.as_secs()
    }
}

/// True if the task was abandoned, or has been suspended for longer than `horizon`.
pub fn detect_trap(state: &TaskState, now: Timestamp, horizon: TrapHorizon) -> bool {
    match state.phase {
        Phase::Trapped => true,
        _ => match state.suspension_started_at() {
            Some(start) => now.millis().saturating_sub(start.millis()) > horizon.millis(),
            None => false,
        },
    }
}
