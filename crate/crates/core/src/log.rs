//! Line-delimited task-log format.
//!
//! Each line is one UTF-8 JSON object whose `record` field selects its kind:
//!
//! ```text
//! {"record":"task","task_id":"T1","project":"atlas","task_type":"modeling","granularity":"coarse","priority":2,"progress_status":"mid","performer_id":"alice","performer_experience":4.5}
//! {"record":"event","task_id":"T1","at":"2024-05-06T09:00:00.000Z","kind":"started","performer_id":"alice"}
//! {"record":"event","task_id":"T1","at":"2024-05-06T09:40:00.000Z","kind":"switch_requested","initiator":"external","requester_id":"bob","interrupting_task_id":"T7","performer_id":"alice","flags":["blockage"]}
//! {"record":"person","person_id":"bob","name":"Bob","role":"analyst","projects":["atlas"]}
//! {"record":"cue_visit","session_id":"T1#1","task_id":"T1","cue":"annotation","at":"2024-05-06T11:02:00.000Z"}
//! ```
//!
//! Timestamps are ISO-8601 UTC with millisecond precision and a `Z` suffix.
//! Unknown fields are rejected.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cues::CueType;
use crate::task::{DomainError, PersonId, TaskDescriptor, TaskEvent, TaskId, Timestamp};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PersonProfile {
    pub person_id: PersonId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub projects: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CueVisitRecord {
    pub session_id: String,
    pub task_id: TaskId,
    pub cue: CueType,
    pub at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum LogRecord {
    Task(TaskDescriptor),
    Event(TaskEvent),
    Person(PersonProfile),
    CueVisit(CueVisitRecord),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LogError {
    #[error("blank line")]
    Blank,
    #[error("line contains a raw newline")]
    Multiline,
    #[error("malformed record: {0}")]
    Malformed(String),
    #[error(transparent)]
    Invalid(#[from] DomainError),
}

/// Parses and validates one log line.
pub fn parse_line(line: &str) -> Result<LogRecord, LogError> {
    let trimmed = line.trim_end_matches(['\r', '\n']);
    if trimmed.trim().is_empty() {
        return Err(LogError::Blank);
    }
    if trimmed.contains('\n') {
        return Err(LogError::Multiline);
    }
    let record: LogRecord =
        serde_json::from_str(trimmed).map_err(|e| LogError::Malformed(e.to_string()))?;
    match &record {
        LogRecord::Task(d) => d.validate()?,
        LogRecord::Event(e) => e.validate()?,
        LogRecord::Person(_) | LogRecord::CueVisit(_) => {}
    }
    Ok(record)
}

/// Canonical single-line JSON for a record.
pub fn to_line(record: &LogRecord) -> String {
    serde_json::to_string(record).expect("log records always serialize")
}
