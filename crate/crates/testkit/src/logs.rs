//! Random walks through the task state machine.
//!
//! The walker tracks phase and depth itself and picks only moves allowed by
//! the transition table, so every generated log replays without error.

use rand::Rng;
use switchlens_core::task::{Flag, Granularity, Priority, ProgressStatus};
use switchlens_core::{EventKind, Initiator, PersonId, TaskDescriptor, TaskEvent, TaskId, TaskType, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WalkPhase {
    Created,
    Active,
    Pending,
    Suspended(u32),
    Resuming,
    Completed,
    Trapped,
}

/// Counts the walker kept while generating.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WalkSummary {
    pub resumes: usize,
    pub top_level_suspensions: usize,
    pub max_depth: u32,
}

#[derive(Debug, Clone)]
pub struct Walk {
    pub descriptor: TaskDescriptor,
    pub events: Vec<TaskEvent>,
    pub summary: WalkSummary,
    pub end: WalkPhase,
}

pub fn descriptor(id: &str, task_type: TaskType, project: &str, priority: i64, performer: &str) -> TaskDescriptor {
    TaskDescriptor {
        task_id: TaskId::new(id),
        project: project.to_string(),
        task_type,
        granularity: Granularity::Fine,
        priority: Priority::new(priority).unwrap(),
        progress_status: ProgressStatus::Mid,
        performer_id: PersonId::new(performer),
        performer_experience: 3.0,
    }
}

pub struct WalkConfig<'a> {
    pub start_ms: i64,
    pub max_steps: usize,
    /// Whether to finish with `completed` when the walk is Active at the end.
    pub complete: bool,
    pub persons: &'a [&'a str],
    /// Candidate interrupting tasks.
    pub others: &'a [TaskId],
}

/// Generates a legal event stream for `descriptor`.
pub fn walk<R: Rng>(rng: &mut R, descriptor: TaskDescriptor, cfg: &WalkConfig<'_>) -> Walk {
    let id = descriptor.task_id.clone();
    let performer = descriptor.performer_id.clone();
    let mut at = cfg.start_ms;
    let mut events = Vec::new();
    let mut summary = WalkSummary::default();
    let mut tick = |rng: &mut R| {
        at += rng.gen_range(1..=3_600_000);
        Timestamp::from_millis(at).unwrap()
    };
    let push = |kind: EventKind, ts: Timestamp| TaskEvent::new(id.clone(), ts, kind, performer.clone());

    events.push(push(EventKind::Started, tick(rng)));
    let mut phase = WalkPhase::Active;
    for _ in 0..cfg.max_steps {
        let ts = tick(rng);
        let (event, next) = match phase {
            WalkPhase::Active => {
                let mut e = push(EventKind::SwitchRequested, ts);
                if rng.gen_bool(0.5) || cfg.persons.is_empty() {
                    e.initiator = Some(Initiator::SelfInitiated);
                } else {
                    e.initiator = Some(Initiator::External);
                    let p = cfg.persons[rng.gen_range(0..cfg.persons.len())];
                    e.requester_id = Some(PersonId::new(p));
                }
                if !cfg.others.is_empty() && rng.gen_bool(0.7) {
                    e.interrupting_task_id = Some(cfg.others[rng.gen_range(0..cfg.others.len())].clone());
                }
                if rng.gen_bool(0.2) {
                    e.flags.push(Flag::Blockage);
                }
                if rng.gen_bool(0.2) {
                    e.flags.push(Flag::Boredom);
                }
                (e, WalkPhase::Pending)
            }
            WalkPhase::Pending => {
                summary.top_level_suspensions += 1;
                summary.max_depth = summary.max_depth.max(1);
                (push(EventKind::Suspended, ts), WalkPhase::Suspended(1))
            }
            WalkPhase::Suspended(d) => match rng.gen_range(0..10) {
                0 => {
                    summary.max_depth = summary.max_depth.max(d + 1);
                    (push(EventKind::Suspended, ts), WalkPhase::Suspended(d + 1))
                }
                1 => {
                    let mut e = push(EventKind::SwitchRequested, ts);
                    e.initiator = Some(Initiator::SelfInitiated);
                    (e, WalkPhase::Suspended(d))
                }
                _ if d > 1 => (push(EventKind::InterruptionEnded, ts), WalkPhase::Suspended(d - 1)),
                _ => (push(EventKind::InterruptionEnded, ts), WalkPhase::Resuming),
            },
            WalkPhase::Resuming => {
                summary.resumes += 1;
                (push(EventKind::Resumed, ts), WalkPhase::Active)
            }
            WalkPhase::Created | WalkPhase::Completed | WalkPhase::Trapped => unreachable!(),
        };
        events.push(event);
        phase = next;
    }
    match phase {
        WalkPhase::Active if cfg.complete => {
            events.push(push(EventKind::Completed, tick(rng)));
            phase = WalkPhase::Completed;
        }
        WalkPhase::Suspended(_) | WalkPhase::Resuming if cfg.complete => {
            events.push(push(EventKind::Abandoned, tick(rng)));
            phase = WalkPhase::Trapped;
        }
        _ => {}
    }
    Walk {
        descriptor,
        events,
        summary,
        end: phase,
    }
}
