//! Stakeholder communication graph: who asked whom to switch tasks, and how often.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::log::PersonProfile;
use crate::store::Store;
use crate::task::{Initiator, PersonId, Timestamp};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: PersonId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<PersonProfile>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphEdge {
    /// Requester; equals `to` for self-interruptions.
    pub from: PersonId,
    /// Interrupted performer.
    pub to: PersonId,
    pub weight: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CommunicationGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
}

impl CommunicationGraph {
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty() && self.edges.is_empty()
    }

    pub fn weight(&self, from: &str, to: &str) -> u64 {
        self.edges
            .iter()
            .find(|e| e.from.as_str() == from && e.to.as_str() == to)
            .map_or(0, |e| e.weight)
    }

    pub fn total_weight(&self) -> u64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    /// Edges touching `person`, with their endpoints.
    pub fn slice_around(&self, person: &PersonId) -> CommunicationGraph {
        let edges: Vec<GraphEdge> = self
            .edges
            .iter()
            .filter(|e| e.from == *person || e.to == *person)
            .cloned()
            .collect();
        let mut ids: BTreeSet<&PersonId> = edges.iter().flat_map(|e| [&e.from, &e.to]).collect();
        ids.insert(person);
        let nodes = self
            .nodes
            .iter()
            .filter(|n| ids.contains(&n.id))
            .cloned()
            .collect();
        CommunicationGraph { nodes, edges }
    }

    /// Graphviz rendering; edge `weight` and `label` carry the switch count.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph communication {\n");
        for n in &self.nodes {
            let _ = writeln!(out, "  {};", quote(n.id.as_str()));
        }
        for e in &self.edges {
            let _ = writeln!(
                out,
                "  {} -> {} [weight={w}, label=\"{w}\"];",
                quote(e.from.as_str()),
                quote(e.to.as_str()),
                w = e.weight
            );
        }
        out.push_str("}\n");
        out
    }
}

fn quote(id: &str) -> String {
    format!("\"{}\"", id.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Switch requests in `[from, to)` as requester -> performer edges.
pub fn communication_graph(
    store: &Store,
    from: Option<Timestamp>,
    to: Option<Timestamp>,
) -> CommunicationGraph {
    let mut weights: BTreeMap<(PersonId, PersonId), u64> = BTreeMap::new();
    for e in store.switch_requests(from, to) {
        let requester = match (e.initiator, &e.requester_id) {
            (Some(Initiator::External), Some(r)) => r.clone(),
            _ => e.performer_id.clone(),
        };
        *weights.entry((requester, e.performer_id.clone())).or_insert(0) += 1;
    }
    let mut ids: BTreeSet<PersonId> = store.persons().keys().cloned().collect();
    for (a, b) in weights.keys() {
        ids.insert(a.clone());
        ids.insert(b.clone());
    }
    CommunicationGraph {
        nodes: ids
            .into_iter()
            .map(|id| GraphNode {
                profile: store.persons().get(&id).cloned(),
                id,
            })
            .collect(),
        edges: weights
            .into_iter()
            .map(|((from, to), weight)| GraphEdge { from, to, weight })
            .collect(),
    }
}
