//! Read-side projections of the chain state. Pure functions: two replicas
//! with the same committed chain produce the same bytes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ledger::{Block, ChainState, UrlId, UrlStatus, Verdict, VerifierAccount, VerifierId};
use crate::pipeline::{verifier_graph, DeriveParams};
use crate::truth::{pagerank, score_timeline, Edge, TimelinePoint, VerifierGraph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoterView {
    pub verifier_id: VerifierId,
    pub verdict: Verdict,
    pub ordinal: u32,
    pub block_height: u64,
    pub rank: f64,
    pub skill_points: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UrlView {
    pub url_id: UrlId,
    pub url: String,
    pub submitter: VerifierId,
    pub evidence_email: String,
    pub status: UrlStatus,
    pub phish_score: Option<f64>,
    pub first_block_height: u64,
    pub votes: Vec<VoterView>,
    pub timeline: Vec<TimelinePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineView {
    pub url_id: UrlId,
    pub timeline: Vec<TimelinePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: VerifierId,
    pub rank: f64,
    pub skill_points: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphExport {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<Edge>,
}

impl GraphExport {
    /// Rebuilds the verifier graph the export was taken from.
    pub fn to_graph(&self) -> VerifierGraph {
        let mut g = VerifierGraph::new().with_nodes(self.nodes.iter().map(|n| n.id.clone()));
        for e in &self.edges {
            g.add_edge(&e.from, &e.to, e.weight);
        }
        g
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlacklistEntry {
    pub url_id: UrlId,
    pub url: String,
    pub phish_score: f64,
}

fn ranks(state: &ChainState) -> BTreeMap<VerifierId, f64> {
    state.users.iter().map(|(id, u)| (id.clone(), u.rank)).collect()
}

fn timeline_of(state: &ChainState, url_id: &str) -> Option<Vec<TimelinePoint>> {
    let record = state.urls.get(url_id)?;
    let ranks = ranks(state);
    Some(
        score_timeline(&ranks, record.votes.iter().map(|v| (v.verifier.as_str(), v.verdict)))
            .expect("voters are registered"),
    )
}

pub fn url_view(state: &ChainState, url_id: &str) -> Option<UrlView> {
    let record = state.urls.get(url_id)?;
    let votes = record
        .votes
        .iter()
        .map(|v| {
            let account = state.users.get(&v.verifier);
            VoterView {
                verifier_id: v.verifier.clone(),
                verdict: v.verdict,
                ordinal: v.ordinal,
                block_height: v.block_height,
                rank: account.map_or(0.0, |a| a.rank),
                skill_points: account.map_or(0, |a| a.skill_points),
            }
        })
        .collect();
    Some(UrlView {
        url_id: record.url_id.clone(),
        url: record.url.clone(),
        submitter: record.submitter.clone(),
        evidence_email: record.evidence_email.clone(),
        status: record.status,
        phish_score: record.phish_score,
        first_block_height: record.first_block_height,
        votes,
        timeline: timeline_of(state, url_id)?,
    })
}

pub fn timeline(state: &ChainState, url_id: &str) -> Option<TimelineView> {
    Some(TimelineView { url_id: url_id.to_string(), timeline: timeline_of(state, url_id)? })
}

/// Verifier graph with PageRank computed on the current graph, so
/// verifiers registered after the last vote still get a rank.
pub fn graph_export(state: &ChainState, params: &DeriveParams) -> GraphExport {
    let graph = verifier_graph(state);
    let ranks = if graph.node_count() == 0 {
        BTreeMap::new()
    } else {
        pagerank(&graph, params.damping, params.tol, params.max_iter).expect("valid parameters").ranks
    };
    GraphExport {
        nodes: graph
            .nodes()
            .map(|id| GraphNode {
                id: id.clone(),
                rank: ranks.get(id).copied().unwrap_or(0.0),
                skill_points: state.users.get(id).map_or(0, |a| a.skill_points),
            })
            .collect(),
        edges: graph.edges().collect(),
    }
}

/// URLs with a strictly positive score, highest first, ties by id.
pub fn blacklist(state: &ChainState) -> Vec<BlacklistEntry> {
    let mut out: Vec<BlacklistEntry> = state
        .urls
        .values()
        .filter(|r| r.status == UrlStatus::Phishing)
        .filter_map(|r| {
            r.phish_score.filter(|s| *s > 0.0).map(|s| BlacklistEntry {
                url_id: r.url_id.clone(),
                url: r.url.clone(),
                phish_score: s,
            })
        })
        .collect();
    out.sort_by(|a, b| b.phish_score.total_cmp(&a.phish_score).then_with(|| a.url_id.cmp(&b.url_id)));
    out
}

pub fn verifier(state: &ChainState, id: &str) -> Option<VerifierAccount> {
    state.users.get(id).cloned()
}

/// Blocks with `from <= height <= to`; `to` defaults to the tip. At most
/// `limit` blocks.
pub fn blocks(chain: &[Block], from: Option<u64>, to: Option<u64>, limit: usize) -> Vec<Block> {
    let tip = chain.len().saturating_sub(1) as u64;
    let from = from.unwrap_or(0);
    let to = to.unwrap_or(tip).min(tip);
    if chain.is_empty() || from > to {
        return Vec::new();
    }
    chain[from as usize..=to as usize].iter().take(limit).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::{url_id, Transaction};
    use crate::pipeline::execute_transactions;

    fn state_with(order: &[(&str, Verdict)], extra: &[&str]) -> (ChainState, String) {
        let url = "http://bad.example/p";
        let mut txs = vec![Transaction::register_user("sub", "s", 1)];
        for (v, _) in order {
            txs.push(Transaction::register_user(*v, *v, 1));
        }
        for v in extra {
            txs.push(Transaction::register_user(*v, *v, 1));
        }
        txs.push(Transaction::submit_url("sub", url, format!("mail: {url}"), 2));
        let id = url_id(url).unwrap();
        for (v, verdict) in order {
            txs.push(Transaction::cast_vote(*v, id.clone(), *verdict, 2));
        }
        (execute_transactions(&ChainState::new(), 1, &txs, &DeriveParams::default()).unwrap(), id)
    }

    #[test]
    fn two_votes_are_unverified() {
        let (s, id) = state_with(&[("a", Verdict::Phishing), ("b", Verdict::Phishing)], &[]);
        let v = url_view(&s, &id).unwrap();
        assert_eq!(v.status, UrlStatus::Unverified);
        assert_eq!(v.phish_score, None);
        assert_eq!(v.timeline.len(), 2);
        assert!(v.timeline.iter().all(|p| p.score.value().is_none()));
        assert!(blacklist(&s).is_empty());
    }

    #[test]
    fn graph_without_votes_is_uniform() {
        let (s, _) = state_with(&[], &["a", "b", "c"]);
        let g = graph_export(&s, &DeriveParams::default());
        assert_eq!(g.nodes.len(), 4);
        assert!(g.edges.is_empty());
        assert!(g.nodes.iter().all(|n| (n.rank - 0.25).abs() < 1e-12));
    }

    #[test]
    fn graph_round_trips() {
        let (s, _) =
            state_with(&[("a", Verdict::Phishing), ("b", Verdict::Phishing), ("c", Verdict::NotPhishing)], &[]);
        let g = graph_export(&s, &DeriveParams::default());
        assert_eq!(g.edges.len(), 3);
        let back: GraphExport = serde_json::from_str(&serde_json::to_string(&g).unwrap()).unwrap();
        assert_eq!(back.to_graph(), verifier_graph(&s));
    }

    #[test]
    fn unknown_ids() {
        let (s, _) = state_with(&[], &[]);
        assert!(url_view(&s, "nope").is_none());
        assert!(verifier(&s, "nope").is_none());
    }

    #[test]
    fn block_ranges() {
        let chain = vec![Block::genesis()];
        assert_eq!(blocks(&chain, None, None, 10).len(), 1);
        assert!(blocks(&chain, Some(1), None, 10).is_empty());
    }
}
