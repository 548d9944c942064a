//! Task-interruption analytics.
//!
//! Replays task-event logs through an interruption state machine, derives
//! disruptiveness measures (fragments, resumption lag, interruption lag),
//! mines which interruption characteristics predict high disruptiveness,
//! mines which resumption cues users follow in which order, and renders the
//! results as short narrative sentences.
//!
//! | Module | Role |
//! |--------|------|
//! | [`machine`] | state machine, replay, measures, trap detection |
//! | [`pattern`] | filtered Apriori over interruption records |
//! | [`cues`] | cue graph and sequential cue mining |
//! | [`narrative`] / [`lexicon`] | rule sentences |
//! | [`store`] / [`log`] | append-only log ingestion and derived views |
//! | [`graph`] | stakeholder communication graph |

pub mod task;

pub mod cues;
pub mod graph;
pub mod items;
pub mod lexicon;
pub mod log;
pub mod machine;
pub mod narrative;
pub mod pattern;
pub mod ratio;
pub mod store;

pub use cues::{CueGraph, CueSequenceRule, CueSession, CueType};
pub use graph::CommunicationGraph;
pub use items::{CharacteristicItem, DisruptivenessItem, Item, Level, Measure};
pub use lexicon::Lexicon;
pub use machine::{DisruptivenessMeasures, Phase, TaskState, TaskTrace, TrapHorizon};
pub use narrative::NarrativeRule;
pub use pattern::{AssociationRule, Discretization, MiningParams, MiningRecord, RawRecord};
pub use ratio::{Fraction, Threshold};
pub use store::Store;
pub use task::{EventKind, Initiator, PersonId, TaskDescriptor, TaskEvent, TaskId, TaskType, Timestamp};
