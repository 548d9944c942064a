//! Task descriptors and task events: the raw vocabulary of an interruption log.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Opaque task identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskId(pub String);

impl TaskId {
    pub fn new(id: impl Into<String>) -> Self {
        TaskId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Opaque person identifier (performer, requester).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PersonId(pub String);

impl PersonId {
    pub fn new(id: impl Into<String>) -> Self {
        PersonId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PersonId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DomainError {
    #[error("unknown {what} `{value}`")]
    UnknownValue { what: &'static str, value: String },
    #[error("priority {0} outside 1..=5")]
    PriorityOutOfRange(i64),
    #[error("performer experience must be a finite non-negative number of years")]
    InvalidExperience,
    #[error("timestamp `{0}` is not ISO-8601 UTC with at most millisecond precision")]
    InvalidTimestamp(String),
    #[error("{0}")]
    InvalidEvent(String),
}

macro_rules! string_enum {
    ($(#[$meta:meta])* $name:ident, $what:literal { $($variant:ident => $text:literal $(| $alias:literal)*),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl ::std::fmt::Display for $name {
            fn fmt(&self, f: &mut ::std::fmt::Formatter<'_>) -> ::std::fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl ::std::str::FromStr for $name {
            type Err = $crate::task::DomainError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text $(| $alias)* => Ok($name::$variant),)+
                    other => Err($crate::task::DomainError::UnknownValue { what: $what, value: other.to_string() }),
                }
            }
        }

        impl ::serde::Serialize for $name {
            fn serialize<S: ::serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.serialize_str(self.as_str())
            }
        }

        impl<'de> ::serde::Deserialize<'de> for $name {
            fn deserialize<D: ::serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let s = <::std::borrow::Cow<'de, str> as ::serde::Deserialize>::deserialize(deserializer)?;
                s.parse().map_err(::serde::de::Error::custom)
            }
        }
    };
}

pub(crate) use string_enum;

string_enum! {
    /// RE activity category of a task.
    TaskType, "task type" {
        Elicitation => "elicitation" | "gathering",
        Analysis => "analysis",
        Modeling => "modeling",
        Specification => "specification",
        Validation => "validation",
        Evolution => "evolution",
        Other => "other",
    }
}

string_enum! {
    Granularity, "granularity" {
        Coarse => "coarse",
        Fine => "fine",
    }
}

string_enum! {
    ProgressStatus, "progress status" {
        NotStarted => "not_started",
        Early => "early",
        Mid => "mid",
        Late => "late",
    }
}

string_enum! {
    /// Who initiated a task switch.
    Initiator, "initiator" {
        SelfInitiated => "self",
        External => "external",
    }
}

string_enum! {
    EventKind, "event kind" {
        Started => "started",
        SwitchRequested => "switch_requested",
        Suspended => "suspended",
        InterruptionEnded => "interruption_ended",
        Resumed => "resumed",
        Completed => "completed",
        Abandoned => "abandoned",
    }
}

string_enum! {
    /// Self-reported context flags attached to a switch request.
    Flag, "flag" {
        Blockage => "blockage",
        Boredom => "boredom",
    }
}

/// Task priority, 1 (highest) to 5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct Priority(u8);

impl Priority {
    pub fn new(value: i64) -> Result<Self, DomainError> {
        if (1..=5).contains(&value) {
            Ok(Priority(value as u8))
        } else {
            Err(DomainError::PriorityOutOfRange(value))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

impl<'de> Deserialize<'de> for Priority {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let v = i64::deserialize(deserializer)?;
        Priority::new(v).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskDescriptor {
    pub task_id: TaskId,
    pub project: String,
    pub task_type: TaskType,
    pub granularity: Granularity,
    pub priority: Priority,
    pub progress_status: ProgressStatus,
    pub performer_id: PersonId,
    pub performer_experience: f64,
}

impl TaskDescriptor {
    pub fn validate(&self) -> Result<(), DomainError> {
        if !self.performer_experience.is_finite() || self.performer_experience < 0.0 {
            return Err(DomainError::InvalidExperience);
        }
        Ok(())
    }
}

/// A UTC instant with millisecond precision, serialized as `YYYY-MM-DDTHH:MM:SS.mmmZ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(DateTime<Utc>);

impl Timestamp {
    pub fn from_millis(ms: i64) -> Option<Self> {
        DateTime::from_timestamp_millis(ms).map(Timestamp)
    }

    pub fn millis(self) -> i64 {
        self.0.timestamp_millis()
    }

    pub fn datetime(self) -> DateTime<Utc> {
        self.0
    }

    /// Seconds elapsed from `earlier` to `self` (negative if `earlier` is later).
    pub fn secs_since(self, earlier: Timestamp) -> f64 {
        (self.millis() - earlier.millis()) as f64 / 1000.0
    }
}

impl TryFrom<DateTime<Utc>> for Timestamp {
    type Error = DomainError;

    fn try_from(dt: DateTime<Utc>) -> Result<Self, Self::Error> {
        if dt.timestamp_subsec_nanos() % 1_000_000 != 0 {
            return Err(DomainError::InvalidTimestamp(dt.to_rfc3339()));
        }
        Ok(Timestamp(dt))
    }
}

impl FromStr for Timestamp {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || DomainError::InvalidTimestamp(s.to_string());
        if !s.ends_with('Z') {
            return Err(bad());
        }
        let dt = DateTime::parse_from_rfc3339(s).map_err(|_| bad())?;
        Timestamp::try_from(dt.with_timezone(&Utc)).map_err(|_| bad())
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.to_rfc3339_opts(SecondsFormat::Millis, true))
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = <std::borrow::Cow<'de, str>>::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskEvent {
    pub task_id: TaskId,
    pub at: Timestamp,
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initiator: Option<Initiator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interrupting_task_id: Option<TaskId>,
    /// Person who requested an external switch.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub requester_id: Option<PersonId>,
    pub performer_id: PersonId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotations: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<Flag>,
    /// Thumbnail artifacts captured with this event.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub artifact_ids: Vec<String>,
}

impl TaskEvent {
    /// Bare event with only the required fields set.
    pub fn new(task_id: TaskId, at: Timestamp, kind: EventKind, performer_id: PersonId) -> Self {
        TaskEvent {
            task_id,
            at,
            kind,
            initiator: None,
            interrupting_task_id: None,
            requester_id: None,
            performer_id,
            annotations: None,
            flags: Vec::new(),
            artifact_ids: Vec::new(),
        }
    }

    pub fn switch_requested(
        task_id: TaskId,
        at: Timestamp,
        performer_id: PersonId,
        initiator: Initiator,
    ) -> Self {
        let mut e = TaskEvent::new(task_id, at, EventKind::SwitchRequested, performer_id);
        e.initiator = Some(initiator);
        e
    }

    pub fn has_flag(&self, flag: Flag) -> bool {
        self.flags.contains(&flag)
    }

    /// Field-presence rules that do not depend on the task's history.
    pub fn validate(&self) -> Result<(), DomainError> {
        let switch = self.kind == EventKind::SwitchRequested;
        match (switch, self.initiator) {
            (true, None) => {
                return Err(DomainError::InvalidEvent(
                    "switch_requested requires an initiator".into(),
                ))
            }
            (false, Some(_)) => {
                return Err(DomainError::InvalidEvent(format!(
                    "initiator is only allowed on switch_requested, not {}",
                    self.kind
                )))
            }
            _ => {}
        }
        if self.interrupting_task_id.is_some()
            && !matches!(self.kind, EventKind::SwitchRequested | EventKind::Suspended)
        {
            return Err(DomainError::InvalidEvent(format!(
                "interrupting_task_id is not allowed on {}",
                self.kind
            )));
        }
        match (self.initiator, &self.requester_id) {
            (Some(Initiator::External), None) => Err(DomainError::InvalidEvent(
                "external switch requests require requester_id".into(),
            )),
            (Some(Initiator::External), Some(_)) => Ok(()),
            (_, Some(_)) => Err(DomainError::InvalidEvent(
                "requester_id is only allowed on external switch requests".into(),
            )),
            (_, None) => Ok(()),
        }
    }
}
