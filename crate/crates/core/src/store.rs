//! Append-only event store.
//!
//! Every accepted log line is kept verbatim (and appended to the backing
//! file, when there is one); all other state is derived from those lines and
//! can be rebuilt by replaying them. Events are validated against the task
//! state machine on the way in, so every stored stream replays cleanly.

use std::collections::{BTreeMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{FixedOffset, Timelike};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cues::{CueSession, CueType};
use crate::items::{CharacteristicItem, CharacteristicKey};
use crate::log::{parse_line, CueVisitRecord, LogError, LogRecord, PersonProfile};
use crate::machine::{derive_measures, LagPolicy, PhaseKind, ReplayError, TaskTrace};
use crate::pattern::{discretize, filter_by_type, Discretization, MiningError, MiningRecord, RawRecord};
use crate::task::{EventKind, Flag, Initiator, PersonId, TaskEvent, TaskId, TaskType, Timestamp};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("store log {path} is corrupt at line {line}: {reason}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        reason: RejectReason,
    },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RejectReason {
    #[error(transparent)]
    Parse(#[from] LogError),
    #[error("UnknownTask: {0}")]
    UnknownTask(TaskId),
    #[error("task {0} is already declared with different fields")]
    ConflictingDescriptor(TaskId),
    #[error("person {0} is already declared with a different profile")]
    ConflictingPerson(PersonId),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error("cue session {session} belongs to task {owner}")]
    SessionTaskMismatch { session: String, owner: TaskId },
    #[error("cue visit at {at} precedes the last visit of session {session}")]
    CueVisitOutOfOrder { session: String, at: Timestamp },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    /// 1-based line (or array element) number.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub accepted: usize,
    pub duplicates: usize,
    pub rejected: usize,
    pub rejections: Vec<Rejection>,
}

impl IngestReport {
    fn reject(&mut self, line: usize, reason: RejectReason) {
        self.rejected += 1;
        self.rejections.push(Rejection {
            line,
            reason: reason.to_string(),
        });
    }
}

enum Outcome {
    Accepted,
    Duplicate,
}

/// Bucket of the local time of day: morning [06, 12), afternoon [12, 18), evening otherwise.
pub fn time_of_day(at: Timestamp, offset: FixedOffset) -> &'static str {
    match at.datetime().with_timezone(&offset).hour() {
        6..=11 => "morning",
        12..=17 => "afternoon",
        _ => "evening",
    }
}

#[derive(Debug)]
struct Sink {
    path: PathBuf,
    file: File,
}

#[derive(Debug)]
pub struct Store {
    lines: Vec<String>,
    traces: BTreeMap<TaskId, TaskTrace>,
    event_keys: HashSet<(TaskId, i64, EventKind)>,
    persons: BTreeMap<PersonId, PersonProfile>,
    sessions: BTreeMap<String, (TaskId, Vec<CueVisitRecord>)>,
    session_order: Vec<String>,
    cue_keys: HashSet<(String, i64, CueType)>,
    offset: FixedOffset,
    sink: Option<Sink>,
}

impl Default for Store {
    fn default() -> Self {
        Store::in_memory()
    }
}

impl Store {
    pub fn in_memory() -> Self {
        Store {
            lines: Vec::new(),
            traces: BTreeMap::new(),
            event_keys: HashSet::new(),
            persons: BTreeMap::new(),
            sessions: BTreeMap::new(),
            session_order: Vec::new(),
            cue_keys: HashSet::new(),
            offset: FixedOffset::east_opt(0).expect("UTC offset"),
            sink: None,
        }
    }

    /// Opens (or creates) a store backed by an append-only log file.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        let io_err = |source| StoreError::Io {
            path: path.clone(),
            source,
        };
        let mut store = Store::in_memory();
        if path.exists() {
            let reader = BufReader::new(File::open(&path).map_err(io_err)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line.map_err(io_err)?;
                if line.trim().is_empty() {
                    continue;
                }
                match store.apply_line(&line) {
                    Ok(_) => {}
                    Err(reason) => {
                        return Err(StoreError::Corrupt {
                            path,
                            line: i + 1,
                            reason,
                        })
                    }
                }
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io_err)?;
        store.sink = Some(Sink { path, file });
        Ok(store)
    }

    /// Offset used to bucket switch times into morning/afternoon/evening.
    pub fn with_offset(mut self, offset: FixedOffset) -> Self {
        self.offset = offset;
        self
    }

    pub fn offset(&self) -> FixedOffset {
        self.offset
    }

    pub fn path(&self) -> Option<&Path> {
        self.sink.as_ref().map(|s| s.path.as_path())
    }

    /// Number of accepted records; grows with every accepted line.
    pub fn watermark(&self) -> u64 {
        self.lines.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    /// Ingests line-delimited records. Blank lines are skipped.
    pub fn ingest<R: BufRead>(&mut self, reader: R) -> Result<IngestReport, StoreError> {
        let lines = reader
            .lines()
            .collect::<Result<Vec<_>, _>>()
            .map_err(|source| StoreError::Io {
                path: self.path().map(Path::to_path_buf).unwrap_or_default(),
                source,
            })?;
        self.ingest_lines(lines.iter().map(String::as_str).enumerate().filter(|(_, l)| !l.trim().is_empty()).map(|(i, l)| (i + 1, l)))
    }

    /// Ingests `(line number, text)` pairs as one batch; accepted lines are
    /// persisted together at the end of the batch.
    pub fn ingest_lines<'a>(
        &mut self,
        lines: impl IntoIterator<Item = (usize, &'a str)>,
    ) -> Result<IngestReport, StoreError> {
        let start = self.lines.len();
        let mut report = IngestReport::default();
        for (n, line) in lines {
            match self.apply_line(line) {
                Ok(Outcome::Accepted) => report.accepted += 1,
                Ok(Outcome::Duplicate) => report.duplicates += 1,
                Err(reason) => report.reject(n, reason),
            }
        }
        self.persist(start)?;
        Ok(report)
    }

    fn persist(&mut self, start: usize) -> Result<(), StoreError> {
        let Some(sink) = self.sink.as_mut() else {
            return Ok(());
        };
        if start == self.lines.len() {
            return Ok(());
        }
        let mut buf = String::new();
        for l in &self.lines[start..] {
            buf.push_str(l);
            buf.push('\n');
        }
        let written = sink
            .file
            .write_all(buf.as_bytes())
            .and_then(|_| sink.file.sync_data());
        if let Err(source) = written {
            let path = sink.path.clone();
            // Fall back to what actually reached the disk.
            *self = Store::open(&path)?.with_offset(self.offset);
            return Err(StoreError::Io { path, source });
        }
        Ok(())
    }

    fn apply_line(&mut self, line: &str) -> Result<Outcome, RejectReason> {
        let record = parse_line(line)?;
        let outcome = self.apply(record)?;
        if let Outcome::Accepted = outcome {
            self.lines.push(line.trim_end_matches(['\r', '\n']).to_string());
        }
        Ok(outcome)
    }

    fn apply(&mut self, record: LogRecord) -> Result<Outcome, RejectReason> {
        match record {
            LogRecord::Task(d) => match self.traces.get(&d.task_id) {
                Some(t) if t.descriptor == d => Ok(Outcome::Duplicate),
                Some(_) => Err(RejectReason::ConflictingDescriptor(d.task_id)),
                None => {
                    self.traces.insert(d.task_id.clone(), TaskTrace::new(d));
                    Ok(Outcome::Accepted)
                }
            },
            LogRecord::Event(e) => {
                let key = (e.task_id.clone(), e.at.millis(), e.kind);
                if self.event_keys.contains(&key) {
                    return Ok(Outcome::Duplicate);
                }
                let trace = self
                    .traces
                    .get_mut(&e.task_id)
                    .ok_or_else(|| RejectReason::UnknownTask(e.task_id.clone()))?;
                trace.push(e)?;
                self.event_keys.insert(key);
                Ok(Outcome::Accepted)
            }
            LogRecord::Person(p) => match self.persons.get(&p.person_id) {
                Some(existing) if *existing == p => Ok(Outcome::Duplicate),
                Some(_) => Err(RejectReason::ConflictingPerson(p.person_id)),
                None => {
                    self.persons.insert(p.person_id.clone(), p);
                    Ok(Outcome::Accepted)
                }
            },
            LogRecord::CueVisit(v) => {
                let key = (v.session_id.clone(), v.at.millis(), v.cue);
                if self.cue_keys.contains(&key) {
                    return Ok(Outcome::Duplicate);
                }
                if !self.traces.contains_key(&v.task_id) {
                    return Err(RejectReason::UnknownTask(v.task_id));
                }
                match self.sessions.get_mut(&v.session_id) {
                    Some((owner, visits)) => {
                        if *owner != v.task_id {
                            return Err(RejectReason::SessionTaskMismatch {
                                session: v.session_id,
                                owner: owner.clone(),
                            });
                        }
                        if visits.last().is_some_and(|last| v.at < last.at) {
                            return Err(RejectReason::CueVisitOutOfOrder {
                                session: v.session_id,
                                at: v.at,
                            });
                        }
                        visits.push(v);
                    }
                    None => {
                        self.session_order.push(v.session_id.clone());
                        self.sessions
                            .insert(v.session_id.clone(), (v.task_id.clone(), vec![v]));
                    }
                }
                self.cue_keys.insert(key);
                Ok(Outcome::Accepted)
            }
        }
    }

    /// Accepted lines in ingestion order, newline-terminated.
    pub fn export<W: Write>(&self, mut out: W) -> io::Result<()> {
        for l in &self.lines {
            out.write_all(l.as_bytes())?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }

    pub fn trace(&self, task: &TaskId) -> Option<&TaskTrace> {
        self.traces.get(task)
    }

    pub fn traces(&self) -> impl Iterator<Item = &TaskTrace> {
        self.traces.values()
    }

    pub fn persons(&self) -> &BTreeMap<PersonId, PersonProfile> {
        &self.persons
    }

    /// Cue sessions in the order they were opened.
    pub fn sessions(&self) -> Vec<CueSession> {
        self.session_order
            .iter()
            .filter_map(|id| {
                let (task, visits) = &self.sessions[id];
                let task_type = self.traces.get(task)?.descriptor.task_type;
                CueSession::new(id.clone(), task.clone(), task_type, visits.iter().map(|v| (v.cue, v.at))).ok()
            })
            .collect()
    }

    pub fn session_visits(&self, session_id: &str) -> Option<&[CueVisitRecord]> {
        self.sessions.get(session_id).map(|(_, v)| v.as_slice())
    }

    /// One raw record per top-level interruption episode, across all task types.
    pub fn raw_records(&self) -> Vec<RawRecord> {
        self.traces
            .values()
            .flat_map(|trace| self.episode_records(trace))
            .collect()
    }

    /// Raw records of one task's top-level interruption episodes.
    pub fn task_records(&self, task: &TaskId) -> Vec<RawRecord> {
        self.traces
            .get(task)
            .map(|t| self.episode_records(t))
            .unwrap_or_default()
    }

    fn episode_records(&self, trace: &TaskTrace) -> Vec<RawRecord> {
        let fragments = derive_measures(trace, LagPolicy::AllowOpen)
            .map(|m| m.d1_fragments)
            .ok();
        let primary = &trace.descriptor;
        trace
            .episodes()
            .into_iter()
            .map(|ep| {
                let interrupting = ep
                    .interrupting_task()
                    .and_then(|id| self.traces.get(id))
                    .map(|t| &t.descriptor);
                let item = |key: CharacteristicKey, value: &str| {
                    CharacteristicItem::new(key, value).expect("derived values are in the vocabulary")
                };
                let initiator = match ep.switch.initiator {
                    Some(Initiator::External) => "external",
                    _ => "self",
                };
                let context = match interrupting {
                    Some(d) if d.project == primary.project => "same_project",
                    Some(_) => "different_project",
                    None => "unknown",
                };
                let itype = interrupting.map_or("unknown", |d| d.task_type.as_str());
                let priority = match interrupting {
                    Some(d) => match d.priority.get().cmp(&primary.priority.get()) {
                        std::cmp::Ordering::Less => "higher",
                        std::cmp::Ordering::Greater => "lower",
                        std::cmp::Ordering::Equal => "equal",
                    },
                    None => "unknown",
                };
                let yes_no = |f: Flag| if ep.switch.has_flag(f) { "yes" } else { "no" };
                let characteristics = [
                    item(CharacteristicKey::Initiator, initiator),
                    item(CharacteristicKey::TimeOfDay, time_of_day(ep.switch.at, self.offset)),
                    item(CharacteristicKey::ContextSwitch, context),
                    item(CharacteristicKey::InterruptingType, itype),
                    item(CharacteristicKey::PriorityRelation, priority),
                    item(CharacteristicKey::Blockage, yes_no(Flag::Blockage)),
                    item(CharacteristicKey::Boredom, yes_no(Flag::Boredom)),
                ]
                .into_iter()
                .collect();
                RawRecord {
                    task_type: primary.task_type,
                    characteristics,
                    fragments,
                    resumption_lag: ep.resumption_lag(),
                    interruption_lag: Some(ep.interruption_lag),
                }
            })
            .collect()
    }

    /// The task-characteristics matrix for one task type.
    pub fn mining_records(
        &self,
        task_type: TaskType,
        discretization: &Discretization,
    ) -> Result<Vec<MiningRecord>, MiningError> {
        let typed = filter_by_type(&self.raw_records(), task_type);
        discretize(&typed, discretization)
    }

    /// Closed resumption lags (seconds) of every task of `task_type`.
    pub fn resumption_lags(&self, task_type: TaskType) -> Vec<f64> {
        self.traces
            .values()
            .filter(|t| t.descriptor.task_type == task_type)
            .filter_map(|t| derive_measures(t, LagPolicy::AllowOpen).ok())
            .flat_map(|m| m.d2_resumption_lags)
            .collect()
    }

    /// Every switch request whose timestamp lies in `[from, to)`.
    pub fn switch_requests(
        &self,
        from: Option<Timestamp>,
        to: Option<Timestamp>,
    ) -> impl Iterator<Item = &TaskEvent> {
        self.traces.values().flat_map(|t| t.events()).filter(move |e| {
            e.kind == EventKind::SwitchRequested
                && from.is_none_or(|f| e.at >= f)
                && to.is_none_or(|t| e.at < t)
        })
    }

    /// Identifier of the cue session for the task's current (or latest) resumption.
    pub fn resumption_session_id(&self, task: &TaskId) -> Option<String> {
        let trace = self.traces.get(task)?;
        let n = trace
            .transitions()
            .iter()
            .filter(|t| t.state.phase.kind() == PhaseKind::ResumptionPending)
            .count();
        (n > 0).then(|| format!("{task}#{n}"))
    }
}
