use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::votes::VoteMatrix;
use crate::ledger::VerifierId;

/// Directed follower graph: an edge `a -> b` with weight `w` means `a`
/// voted before `b` on `w` URLs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VerifierGraph {
    nodes: BTreeSet<VerifierId>,
    edges: BTreeMap<(VerifierId, VerifierId), u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub from: VerifierId,
    pub to: VerifierId,
    pub weight: u64,
}

impl VerifierGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, id: impl Into<VerifierId>) {
        self.nodes.insert(id.into());
    }

    /// Adds `weight` to the edge `from -> to`. Self-edges are ignored.
    pub fn add_edge(&mut self, from: &str, to: &str, weight: u64) {
        if from == to || weight == 0 {
            return;
        }
        self.nodes.insert(from.to_string());
        self.nodes.insert(to.to_string());
        *self.edges.entry((from.to_string(), to.to_string())).or_insert(0) += weight;
    }

    /// Adds isolated nodes (registered verifiers with no follower relations).
    pub fn with_nodes<I, S>(mut self, ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<VerifierId>,
    {
        for id in ids {
            self.nodes.insert(id.into());
        }
        self
    }

    pub fn nodes(&self) -> impl Iterator<Item = &VerifierId> {
        self.nodes.iter()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn weight(&self, from: &str, to: &str) -> u64 {
        self.edges.get(&(from.to_string(), to.to_string())).copied().unwrap_or(0)
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.edges.iter().map(|((from, to), &weight)| Edge { from: from.clone(), to: to.clone(), weight })
    }

    pub fn total_weight(&self) -> u64 {
        self.edges.values().sum()
    }
}

/// For every URL with vote sequence `v1..vk`, increments `vi -> vj` for all
/// `i < j`.
pub fn build_verifier_graph(votes: &VoteMatrix) -> VerifierGraph {
    let mut graph = VerifierGraph::new();
    for (_, seq) in votes.sequences() {
        for (i, earlier) in seq.iter().enumerate() {
            graph.add_node(earlier.verifier_id.clone());
            for later in &seq[i + 1..] {
                graph.add_edge(&earlier.verifier_id, &later.verifier_id, 1);
            }
        }
    }
    graph
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::Verdict;
    use crate::truth::votes::VoteEntry;

    fn matrix(seqs: &[(&str, &[&str])]) -> VoteMatrix {
        let mut entries = Vec::new();
        for (url, voters) in seqs {
            for (i, v) in voters.iter().enumerate() {
                entries.push(VoteEntry {
                    url_id: url.to_string(),
                    verifier_id: v.to_string(),
                    verdict: Verdict::Phishing,
                    ordinal: i as u32 + 1,
                });
            }
        }
        VoteMatrix::new(entries).unwrap()
    }

    #[test]
    fn all_ordered_pairs() {
        let g = build_verifier_graph(&matrix(&[("u", &["A", "B", "C"])]));
        assert_eq!(g.edge_count(), 3);
        for (a, b) in [("A", "B"), ("A", "C"), ("B", "C")] {
            assert_eq!(g.weight(a, b), 1);
        }
        assert_eq!(g.weight("B", "A"), 0);
    }

    #[test]
    fn single_voter_is_isolated_node() {
        let g = build_verifier_graph(&matrix(&[("u", &["A"])]));
        assert_eq!(g.node_count(), 1);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn weights_accumulate() {
        let g = build_verifier_graph(&matrix(&[("u1", &["A", "B"]), ("u2", &["A", "B"])]));
        assert_eq!(g.weight("A", "B"), 2);
    }

    #[test]
    fn empty_votes_empty_graph() {
        let g = build_verifier_graph(&VoteMatrix::default());
        assert_eq!(g.node_count(), 0);
    }

    #[test]
    fn pair_increments_are_k_choose_2() {
        let voters = ["a", "b", "c", "d", "e", "f"];
        for k in 1..=voters.len() {
            let g = build_verifier_graph(&matrix(&[("u", &voters[..k])]));
            assert_eq!(g.total_weight() as usize, k * (k - 1) / 2);
        }
    }
}
