//! Exhaustive cue-sequence enumeration.

use std::collections::BTreeMap;

use num_rational::Ratio;
use rand::Rng;
use switchlens_core::cues::{CueSession, CueType};
use switchlens_core::{TaskId, TaskType, Timestamp};

/// Greedy left-to-right matching, written independently of the library.
pub fn contains(session: &[CueType], seq: &[CueType]) -> bool {
    let mut pos = 0;
    for &c in session {
        if pos < seq.len() && seq[pos] == c {
            pos += 1;
        }
    }
    pos == seq.len()
}

/// Every sequence of length `len` over the five cue types.
pub fn all_sequences(len: usize) -> Vec<Vec<CueType>> {
    let mut out: Vec<Vec<CueType>> = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|p| {
                CueType::ALL.iter().map(move |&c| {
                    let mut q = p.clone();
                    q.push(c);
                    q
                })
            })
            .collect();
    }
    out
}

/// `sequence -> (support, confidence)` for lengths `2..=max_len`.
pub fn mine(
    sessions: &[Vec<CueType>],
    min_support: Ratio<u64>,
    max_len: usize,
) -> BTreeMap<Vec<CueType>, (Ratio<u64>, Ratio<u64>)> {
    let n = sessions.len() as u64;
    let mut out = BTreeMap::new();
    if n == 0 {
        return out;
    }
    let count = |seq: &[CueType]| sessions.iter().filter(|s| contains(s, seq)).count() as u64;
    for len in 2..=max_len {
        for seq in all_sequences(len) {
            let c = count(&seq);
            if c == 0 || Ratio::new(c, n) < min_support {
                continue;
            }
            let prefix = count(&seq[..len - 1]);
            out.insert(seq, (Ratio::new(c, n), Ratio::new(c, prefix)));
        }
    }
    out
}

pub fn random_cues<R: Rng>(rng: &mut R, max_len: usize) -> Vec<CueType> {
    let len = rng.gen_range(1..=max_len);
    (0..len)
        .map(|_| CueType::ALL[rng.gen_range(0..CueType::ALL.len())])
        .collect()
}

/// Builds a session with one-second spacing.
pub fn session(id: usize, task_type: TaskType, cues: &[CueType]) -> CueSession {
    CueSession::new(
        format!("s{id}"),
        TaskId::new(format!("T{id}")),
        task_type,
        cues.iter()
            .enumerate()
            .map(|(i, &c)| (c, Timestamp::from_millis(1_700_000_000_000 + i as i64 * 1000).unwrap())),
    )
    .unwrap()
}
