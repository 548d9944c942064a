//! Resumption-cue interaction histories: a directed cue graph and
//! sequential association mining over cue sessions.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ratio::{self, fraction, Fraction, Threshold};
use crate::task::{string_enum, TaskId, TaskType, Timestamp};

string_enum! {
    /// Resumption cue kinds. Declaration order is the default ranking
    /// (most useful first) and the lexicographic order of cue sequences.
    CueType, "cue" {
        Annotation => "annotation",
        Thumbnail => "thumbnail",
        Verbal => "verbal",
        Eye => "eye",
        BehaviorGraph => "behavior_graph",
    }
}

/// Cue order used when no interaction history applies.
pub const DEFAULT_CUE_RANKING: [CueType; 5] = [
    CueType::Annotation,
    CueType::Thumbnail,
    CueType::Verbal,
    CueType::Eye,
    CueType::BehaviorGraph,
];

pub const DEFAULT_MAX_LEN: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CueVisit {
    pub cue: CueType,
    /// 1-based position in the session.
    pub order_index: u32,
    /// 1-based count of visits to this cue so far in the session.
    pub visit_count: u32,
    pub at: Timestamp,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CueError {
    #[error("a cue session needs at least one visit")]
    EmptySession,
    #[error("visit {index} at {at} precedes the previous visit")]
    OutOfOrder { index: usize, at: Timestamp },
    #[error("visit {index} has order/count ({found_i}, {found_k}), expected ({expected_i}, {expected_k})")]
    BadCounters {
        index: usize,
        found_i: u32,
        found_k: u32,
        expected_i: u32,
        expected_k: u32,
    },
    #[error("max_len must be at least 2")]
    MaxLenTooShort,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CueSession {
    pub session_id: String,
    pub task_id: TaskId,
    pub task_type: TaskType,
    visits: Vec<CueVisit>,
}

/// `(i, k)` for each position of a cue sequence.
fn counters(cues: impl IntoIterator<Item = CueType>) -> Vec<(u32, u32)> {
    let mut seen: BTreeMap<CueType, u32> = BTreeMap::new();
    cues.into_iter()
        .enumerate()
        .map(|(i, cue)| {
            let k = seen.entry(cue).or_insert(0);
            *k += 1;
            (i as u32 + 1, *k)
        })
        .collect()
}

impl CueSession {
    /// Builds a session from `(cue, at)` pairs, numbering visits.
    pub fn new(
        session_id: impl Into<String>,
        task_id: TaskId,
        task_type: TaskType,
        visits: impl IntoIterator<Item = (CueType, Timestamp)>,
    ) -> Result<Self, CueError> {
        let raw: Vec<(CueType, Timestamp)> = visits.into_iter().collect();
        if raw.is_empty() {
            return Err(CueError::EmptySession);
        }
        for (index, w) in raw.windows(2).enumerate() {
            if w[1].1 < w[0].1 {
                return Err(CueError::OutOfOrder {
                    index: index + 1,
                    at: w[1].1,
                });
            }
        }
        let visits = raw
            .iter()
            .zip(counters(raw.iter().map(|v| v.0)))
            .map(|(&(cue, at), (order_index, visit_count))| CueVisit {
                cue,
                order_index,
                visit_count,
                at,
            })
            .collect();
        Ok(CueSession {
            session_id: session_id.into(),
            task_id,
            task_type,
            visits,
        })
    }

    /// Accepts pre-numbered visits after checking the numbering.
    pub fn from_visits(
        session_id: impl Into<String>,
        task_id: TaskId,
        task_type: TaskType,
        visits: Vec<CueVisit>,
    ) -> Result<Self, CueError> {
        let rebuilt = CueSession::new(session_id, task_id, task_type, visits.iter().map(|v| (v.cue, v.at)))?;
        for (index, (got, want)) in visits.iter().zip(&rebuilt.visits).enumerate() {
            if (got.order_index, got.visit_count) != (want.order_index, want.visit_count) {
                return Err(CueError::BadCounters {
                    index,
                    found_i: got.order_index,
                    found_k: got.visit_count,
                    expected_i: want.order_index,
                    expected_k: want.visit_count,
                });
            }
        }
        Ok(rebuilt)
    }

    pub fn visits(&self) -> &[CueVisit] {
        &self.visits
    }

    pub fn cues(&self) -> impl Iterator<Item = CueType> + '_ {
        self.visits.iter().map(|v| v.cue)
    }

    /// Whether `seq` occurs as an order-preserving subsequence.
    pub fn contains_subsequence(&self, seq: &[CueType]) -> bool {
        is_subsequence(seq, self.cues())
    }
}

pub fn is_subsequence(seq: &[CueType], hay: impl IntoIterator<Item = CueType>) -> bool {
    let mut want = seq.iter().peekable();
    for cue in hay {
        match want.peek() {
            Some(&&w) if w == cue => {
                want.next();
            }
            Some(_) => {}
            None => break,
        }
    }
    want.peek().is_none()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CueEdge {
    pub from: CueType,
    pub to: CueType,
    pub weight: u64,
}

/// Directed graph of cue-to-cue navigation, weighted by traversal count.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CueGraph {
    pub nodes: BTreeSet<CueType>,
    pub edges: Vec<CueEdge>,
}

impl CueGraph {
    pub fn weight(&self, from: CueType, to: CueType) -> u64 {
        self.edges
            .iter()
            .find(|e| e.from == from && e.to == to)
            .map_or(0, |e| e.weight)
    }

    pub fn total_weight(&self) -> u64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    /// Most traversed successor of `cue`; ties go to the earlier-ranked cue.
    pub fn next_cue(&self, cue: CueType) -> Option<CueType> {
        self.edges
            .iter()
            .filter(|e| e.from == cue)
            .max_by(|a, b| a.weight.cmp(&b.weight).then(b.to.cmp(&a.to)))
            .map(|e| e.to)
    }
}

pub fn build_graph(sessions: &[CueSession]) -> CueGraph {
    let mut nodes = BTreeSet::new();
    let mut weights: BTreeMap<(CueType, CueType), u64> = BTreeMap::new();
    for s in sessions {
        nodes.extend(s.cues());
        for w in s.visits.windows(2) {
            *weights.entry((w[0].cue, w[1].cue)).or_insert(0) += 1;
        }
    }
    CueGraph {
        nodes,
        edges: weights
            .into_iter()
            .map(|((from, to), weight)| CueEdge { from, to, weight })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CueSequenceRule {
    /// Set when the rule was mined from sessions of one task type.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_type: Option<TaskType>,
    pub sequence: Vec<CueType>,
    #[serde(with = "ratio::exact")]
    pub support: Fraction,
    #[serde(with = "ratio::exact")]
    pub confidence: Fraction,
}

impl CueSequenceRule {
    /// Support desc, length asc, sequence ascending.
    pub fn mining_cmp(&self, other: &Self) -> Ordering {
        other
            .support
            .cmp(&self.support)
            .then(self.sequence.len().cmp(&other.sequence.len()))
            .then_with(|| self.sequence.cmp(&other.sequence))
    }
}

fn count_containing(sessions: &[CueSession], seq: &[CueType]) -> u64 {
    sessions.iter().filter(|s| s.contains_subsequence(seq)).count() as u64
}

/// Sequential association mining over whole sessions.
///
/// Emits every cue sequence of length `2..=max_len` contained (as an
/// order-preserving subsequence) in at least `min_support` of the sessions.
pub fn mine_sequences(
    sessions: &[CueSession],
    min_support: Threshold,
    max_len: usize,
) -> Result<Vec<CueSequenceRule>, CueError> {
    if max_len < 2 {
        return Err(CueError::MaxLenTooShort);
    }
    let n = sessions.len() as u64;
    if n == 0 {
        return Ok(Vec::new());
    }
    // Level-wise growth by appending one cue: every prefix of a frequent
    // sequence is frequent, so extending frequent sequences only is complete.
    let mut level: Vec<(Vec<CueType>, u64)> = CueType::ALL
        .iter()
        .map(|&c| (vec![c], count_containing(sessions, &[c])))
        .filter(|&(_, count)| min_support.admits(count, n))
        .collect();
    let mut rules = Vec::new();
    for _ in 2..=max_len {
        let mut next = Vec::new();
        for (prefix, prefix_count) in &level {
            for &c in CueType::ALL {
                let mut seq = prefix.clone();
                seq.push(c);
                let count = count_containing(sessions, &seq);
                if min_support.admits(count, n) {
                    rules.push(CueSequenceRule {
                        task_type: None,
                        sequence: seq.clone(),
                        support: fraction(count, n),
                        confidence: fraction(count, *prefix_count),
                    });
                    next.push((seq, count));
                }
            }
        }
        if next.is_empty() {
            break;
        }
        level = next;
    }
    rules.sort_by(CueSequenceRule::mining_cmp);
    Ok(rules)
}

/// [`mine_sequences`] over the sessions of one task type, tagging the rules with it.
pub fn mine_sequences_for_type(
    task_type: TaskType,
    sessions: &[CueSession],
    min_support: Threshold,
    max_len: usize,
) -> Result<Vec<CueSequenceRule>, CueError> {
    let typed: Vec<CueSession> = sessions
        .iter()
        .filter(|s| s.task_type == task_type)
        .cloned()
        .collect();
    let mut rules = mine_sequences(&typed, min_support, max_len)?;
    for r in &mut rules {
        r.task_type = Some(task_type);
    }
    Ok(rules)
}

/// Cue presentation order for resuming a task of `task_type`.
///
/// The highest-confidence maximal rule for the type (ties to the smaller
/// sequence) leads, de-duplicated; the remaining cues follow in the default
/// ranking. Rules without a task type apply to every type.
pub fn recommend_order(task_type: TaskType, rules: &[CueSequenceRule]) -> Vec<CueType> {
    let applicable: Vec<&CueSequenceRule> = rules
        .iter()
        .filter(|r| r.task_type.is_none_or(|t| t == task_type) && r.sequence.len() >= 2)
        .collect();
    let maximal = applicable.iter().filter(|r| {
        !applicable.iter().any(|o| {
            o.sequence.len() > r.sequence.len() && is_subsequence(&r.sequence, o.sequence.iter().copied())
        })
    });
    let best = maximal.min_by(|a, b| {
        b.confidence
            .cmp(&a.confidence)
            .then_with(|| a.sequence.cmp(&b.sequence))
    });
    let mut order: Vec<CueType> = Vec::with_capacity(CueType::ALL.len());
    let lead = best.map(|r| r.sequence.as_slice()).unwrap_or(&[]);
    for &c in lead.iter().chain(DEFAULT_CUE_RANKING.iter()) {
        if !order.contains(&c) {
            order.push(c);
        }
    }
    order
}
