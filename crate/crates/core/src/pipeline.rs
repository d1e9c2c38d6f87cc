//! Post-commit derivation: ranks, phish scores, statuses and skill points
//! recomputed from the ledger's votes. Every replica runs the same code on
//! the same chain, so derived values agree bit for bit.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::{try_apply, Block, ChainState, Digest, Rejection, Transaction, UrlStatus, Verdict, VOTE_THRESHOLD};
use crate::truth::score::tally_votes;
use crate::truth::{
    build_verifier_graph, pagerank, phish_score, skill_points, PageRankParams, VerifierGraph, VoteMatrix,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeriveParams {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: u32,
    /// Minimum votes before a URL is scored (never below 3).
    pub vote_threshold: usize,
}

impl Default for DeriveParams {
    fn default() -> Self {
        let pr = PageRankParams::default();
        DeriveParams { damping: pr.damping, tol: pr.tol, max_iter: pr.max_iter, vote_threshold: VOTE_THRESHOLD }
    }
}

impl DeriveParams {
    pub fn pagerank(&self) -> PageRankParams {
        PageRankParams { damping: self.damping, tol: self.tol, max_iter: self.max_iter }
    }
}

/// Follower graph over all votes, with every registered verifier as a node.
pub fn verifier_graph(state: &ChainState) -> VerifierGraph {
    build_verifier_graph(&VoteMatrix::from_records(state.urls.values())).with_nodes(state.users.keys().cloned())
}

/// Recomputes ranks, scores, statuses and skill points in place.
pub fn recompute_derived(state: &mut ChainState, params: &DeriveParams) {
    let graph = verifier_graph(state);
    if graph.node_count() == 0 {
        return;
    }
    let ranks = pagerank(&graph, params.damping, params.tol, params.max_iter)
        .expect("validated pagerank parameters on a nonempty graph");
    let threshold = params.vote_threshold.max(VOTE_THRESHOLD);

    for record in state.urls.values_mut() {
        let score = if record.votes.len() >= threshold {
            phish_score(&ranks.ranks, record.votes.iter().map(|v| (v.verifier.as_str(), v.verdict)))
                .expect("every voter is registered and ranked")
                .value()
        } else {
            None
        };
        record.phish_score = score;
        record.status = UrlStatus::from_score(score);
    }

    let labels: BTreeMap<String, Verdict> =
        state.urls.iter().filter_map(|(id, r)| r.status.label().map(|l| (id.clone(), l))).collect();
    let tallies = tally_votes(
        state
            .urls
            .values()
            .flat_map(|r| r.votes.iter().map(move |v| (r.url_id.as_str(), v.verifier.as_str(), v.verdict))),
        &labels,
    );
    let skills = skill_points(&ranks.ranks, &tallies);
    for (id, account) in state.users.iter_mut() {
        account.rank = ranks.get(id).unwrap_or(0.0);
        let tally = tallies.get(id).copied().unwrap_or_default();
        account.votes_cast = tally.votes_cast;
        account.votes_correct = tally.votes_correct;
        account.skill_points = skills.get(id).copied().unwrap_or(0);
    }
}

/// Applies a block body on top of `state`: every transaction must validate
/// in order; then the height advances and, when the block carries a vote,
/// derived values are recomputed.
pub fn execute_transactions(
    state: &ChainState,
    height: u64,
    txs: &[Transaction],
    params: &DeriveParams,
) -> Result<ChainState, (usize, Rejection)> {
    let mut next = state.clone();
    for (i, tx) in txs.iter().enumerate() {
        try_apply(&mut next, tx).map_err(|r| (i, r))?;
    }
    next.height = height;
    if txs.iter().any(|tx| matches!(tx.body, crate::ledger::TxBody::CastVote { .. })) {
        recompute_derived(&mut next, params);
    }
    Ok(next)
}

#[derive(Debug, Error, PartialEq)]
pub enum ReplayError {
    #[error("chain must start with the genesis block")]
    BadGenesis,
    #[error("block {height}: expected height {expected}")]
    ChainGap { height: u64, expected: u64 },
    #[error("block {height}: parent hash mismatch")]
    BrokenLink { height: u64 },
    #[error("block {height}: block hash mismatch")]
    BadHash { height: u64 },
    #[error("block {height}: transaction {index} rejected: {reason}")]
    InvalidTransaction { height: u64, index: usize, reason: Rejection },
    #[error("block {height}: state digest mismatch (block {expected}, replay {actual})")]
    DigestMismatch { height: u64, expected: Digest, actual: Digest },
}

/// Applies one block on top of `state`, checking linkage and the recorded
/// state digest.
pub fn apply_block(
    state: &ChainState,
    parent_hash: &Digest,
    block: &Block,
    params: &DeriveParams,
) -> Result<ChainState, ReplayError> {
    let height = block.height;
    if height != state.height + 1 {
        return Err(ReplayError::ChainGap { height, expected: state.height + 1 });
    }
    if &block.parent_hash != parent_hash {
        return Err(ReplayError::BrokenLink { height });
    }
    if !block.hash_is_valid() {
        return Err(ReplayError::BadHash { height });
    }
    let next = execute_transactions(state, height, &block.transactions, params)
        .map_err(|(index, reason)| ReplayError::InvalidTransaction { height, index, reason })?;
    let actual = next.digest();
    if actual != block.state_digest {
        return Err(ReplayError::DigestMismatch { height, expected: block.state_digest, actual });
    }
    Ok(next)
}

/// Replays a chain from genesis, returning the final state.
pub fn replay(blocks: &[Block], params: &DeriveParams) -> Result<ChainState, ReplayError> {
    let genesis = Block::genesis();
    let mut iter = blocks.iter();
    match iter.next() {
        Some(first) if *first == genesis => {}
        None => return Ok(ChainState::new()),
        Some(_) => return Err(ReplayError::BadGenesis),
    }
    let mut state = ChainState::new();
    let mut parent = genesis.block_hash;
    for block in iter {
        state = apply_block(&state, &parent, block, params)?;
        parent = block.block_hash;
    }
    Ok(state)
}
