//! The interruption state machine's transition table, written out
//! independently of the implementation.

use switchlens_core::machine::{apply_event, PhaseKind, TaskState};
use switchlens_core::{EventKind, Initiator, PersonId, TaskEvent, TaskId, Timestamp};

/// An event of `kind` on task `T` at `ms`; switch requests are self-initiated.
pub fn event(kind: EventKind, ms: i64) -> TaskEvent {
    let mut e = TaskEvent::new(TaskId::new("T"), Timestamp::from_millis(ms).unwrap(), kind, PersonId::new("alice"));
    if kind == EventKind::SwitchRequested {
        e.initiator = Some(Initiator::SelfInitiated);
    }
    e
}

/// Event kinds leading from Created into each reachable situation.
pub fn prefixes() -> Vec<(&'static str, Vec<EventKind>)> {
    use EventKind::*;
    vec![
        ("created", vec![]),
        ("active", vec![Started]),
        ("active f=2", vec![Started, SwitchRequested, Suspended, InterruptionEnded, Resumed]),
        ("interruption_pending", vec![Started, SwitchRequested]),
        ("suspended d=1", vec![Started, SwitchRequested, Suspended]),
        ("suspended d=2", vec![Started, SwitchRequested, Suspended, Suspended]),
        ("resumption_pending", vec![Started, SwitchRequested, Suspended, InterruptionEnded]),
        ("completed", vec![Started, Completed]),
        ("trapped", vec![Started, SwitchRequested, Suspended, Abandoned]),
    ]
}

/// Next phase and depth, or `None` for a pair outside the table.
pub fn expected(phase: PhaseKind, depth: u32, kind: EventKind) -> Option<(PhaseKind, u32)> {
    use EventKind as E;
    use PhaseKind as P;
    match (phase, kind) {
        (P::Created, E::Started) => Some((P::Active, 0)),
        (P::Active, E::SwitchRequested) => Some((P::InterruptionPending, 0)),
        (P::Active, E::Completed) => Some((P::Completed, 0)),
        (P::InterruptionPending, E::Suspended) => Some((P::Suspended, 1)),
        (P::Suspended, E::SwitchRequested) => Some((P::Suspended, depth)),
        (P::Suspended, E::Suspended) => Some((P::Suspended, depth + 1)),
        (P::Suspended, E::InterruptionEnded) if depth > 1 => Some((P::Suspended, depth - 1)),
        (P::Suspended, E::InterruptionEnded) => Some((P::ResumptionPending, 0)),
        (P::ResumptionPending, E::Resumed) => Some((P::Active, 0)),
        (P::Suspended | P::ResumptionPending, E::Abandoned) => Some((P::Trapped, 0)),
        _ => None,
    }
}

/// State after applying `kinds` one second apart.
pub fn state_after(kinds: &[EventKind]) -> TaskState {
    let mut s = TaskState::created();
    for (i, &k) in kinds.iter().enumerate() {
        s = apply_event(&s, &event(k, (i as i64 + 1) * 1000)).unwrap();
    }
    s
}
