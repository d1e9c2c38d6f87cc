//! One replica's IBFT state machine.
//!
//! The node is driven entirely through [`NodeState::step`]; it never reads a
//! clock or touches the network itself. Time is whatever logical value the
//! caller passes in, and emitted messages are returned for the caller to
//! deliver.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::message::{CertifiedBlock, ConsensusMessage, MessageKind, PreparedCert, WireMessage};
use super::ValidatorSet;
use crate::ledger::{try_apply, Block, ChainState, Digest, Transaction, TxBody, ValidatorId};
use crate::pipeline::{execute_transactions, DeriveParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Validator,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Idle,
    PrePrepared,
    Prepared,
    Committed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeConfig {
    /// Round-0 timeout; doubles with every round change.
    pub base_timeout_ms: u64,
    pub max_block_txs: usize,
    pub derive: DeriveParams,
}

impl Default for NodeConfig {
    fn default() -> Self {
        NodeConfig { base_timeout_ms: 1000, max_block_txs: 100, derive: DeriveParams::default() }
    }
}

/// Largest backoff exponent; keeps deadlines finite on long stalls.
const MAX_BACKOFF_SHIFT: u64 = 16;
/// Blocks returned per sync response.
const SYNC_BATCH: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub enum Input {
    Message(WireMessage),
    /// The caller's timer fired; ignored unless `now` has reached the deadline.
    Timeout,
    /// Client transactions for the mempool.
    Propose(Vec<Transaction>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Target {
    /// Every other node, validators and normal nodes alike.
    All,
    Node(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outgoing {
    pub to: Target,
    pub msg: WireMessage,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepOutput {
    pub messages: Vec<Outgoing>,
    pub committed: Vec<Block>,
}

type LogKey = (u64, u64, MessageKind, ValidatorId);

#[derive(Debug, Clone)]
struct Candidate {
    block: Block,
    state: ChainState,
}

#[derive(Debug, Clone)]
pub struct NodeState {
    pub id: String,
    pub role: Role,
    /// Height currently being decided (one past the chain tip).
    pub height: u64,
    pub round: u64,
    pub phase: Phase,
    /// First message kept per (height, round, kind, sender).
    pub message_log: BTreeMap<LogKey, ConsensusMessage>,
    pub locked_block: Option<PreparedCert>,
    pub timer_deadline: Option<u64>,
    /// Inputs dropped as malformed or from unknown senders.
    pub dropped: u64,
    validators: ValidatorSet,
    config: NodeConfig,
    chain: Vec<Block>,
    certificates: Vec<Vec<ValidatorId>>,
    state: ChainState,
    mempool: Vec<Transaction>,
    proposal: Option<Digest>,
    proposed_round: Option<u64>,
    candidates: BTreeMap<Digest, Candidate>,
    rejected: BTreeSet<Digest>,
    sync_requested: Option<(u64, u64)>,
    round_started_at: u64,
    now: u64,
}

impl NodeState {
    pub fn new(id: impl Into<String>, role: Role, validators: ValidatorSet, config: NodeConfig) -> Self {
        NodeState {
            id: id.into(),
            role,
            height: 1,
            round: 0,
            phase: Phase::Idle,
            message_log: BTreeMap::new(),
            locked_block: None,
            timer_deadline: None,
            dropped: 0,
            validators,
            config,
            chain: vec![Block::genesis()],
            certificates: vec![Vec::new()],
            state: ChainState::new(),
            mempool: Vec::new(),
            proposal: None,
            proposed_round: None,
            candidates: BTreeMap::new(),
            rejected: BTreeSet::new(),
            sync_requested: None,
            round_started_at: 0,
            now: 0,
        }
    }

    pub fn chain(&self) -> &[Block] {
        &self.chain
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn mempool(&self) -> &[Transaction] {
        &self.mempool
    }

    pub fn validators(&self) -> &ValidatorSet {
        &self.validators
    }

    pub fn config(&self) -> &NodeConfig {
        &self.config
    }

    pub fn tip(&self) -> &Block {
        self.chain.last().expect("chain holds genesis")
    }

    pub fn is_validator(&self) -> bool {
        self.role == Role::Validator
    }

    /// Mempool transactions that would be accepted on top of the current state.
    pub fn pending_valid(&self) -> Vec<&Transaction> {
        let mut scratch = self.state.clone();
        let mut out = Vec::new();
        loop {
            let before = out.len();
            for tx in &self.mempool {
                if out.iter().any(|t: &&Transaction| t.key() == tx.key()) {
                    continue;
                }
                if try_apply(&mut scratch, tx).is_ok() {
                    out.push(tx);
                }
            }
            if out.len() == before {
                return out;
            }
        }
    }

    /// Restores a chain (genesis first) without re-running consensus, e.g.
    /// from a block log that was already checked by replay.
    pub fn restore(&mut self, blocks: Vec<Block>, state: ChainState) {
        let n = blocks.len();
        self.chain = blocks;
        self.certificates = vec![Vec::new(); n];
        self.state = state;
        self.height = n as u64;
        self.reset_height();
    }

    pub fn step(&mut self, now: u64, input: Input) -> StepOutput {
        self.now = now;
        let mut out = StepOutput::default();
        match input {
            Input::Propose(txs) => self.add_transactions(txs),
            Input::Message(msg) => self.handle_wire(msg, &mut out),
            Input::Timeout => {
                if self.timer_deadline.is_some_and(|d| now >= d) {
                    self.timer_deadline = None;
                    self.on_timeout(&mut out);
                }
            }
        }
        self.advance(&mut out);
        self.rearm_timer();
        out
    }

    fn timeout_for(&self, round: u64) -> u64 {
        self.config.base_timeout_ms.saturating_mul(1u64 << round.min(MAX_BACKOFF_SHIFT))
    }

    fn has_pending_work(&self) -> bool {
        !self.mempool.is_empty()
            || self.proposal.is_some()
            || self.locked_block.is_some()
            || self.round > 0
            || self.message_log.range((self.height + 1, 0, MessageKind::PrePrepare, String::new())..).next().is_some()
    }

    fn rearm_timer(&mut self) {
        if !self.is_validator() {
            // Normal nodes poll for blocks while they hold undecided messages.
            if self.message_log.is_empty() {
                self.timer_deadline = None;
            } else if self.timer_deadline.is_none() {
                self.timer_deadline = Some(self.now + self.config.base_timeout_ms);
            }
            return;
        }
        if !self.has_pending_work() {
            self.timer_deadline = None;
            return;
        }
        if self.timer_deadline.is_none() {
            if self.round == 0 && self.proposal.is_none() {
                self.round_started_at = self.now;
            }
            self.timer_deadline = Some(self.round_started_at + self.timeout_for(self.round));
        }
    }

    fn add_transactions(&mut self, txs: Vec<Transaction>) {
        if !self.is_validator() {
            return;
        }
        for tx in txs {
            if self.mempool.iter().any(|t| t.key() == tx.key()) {
                continue;
            }
            if let Err(r) = crate::ledger::validate_transaction(&self.state, &tx) {
                if r.is_permanent(&self.state, &tx) {
                    continue;
                }
            }
            self.mempool.push(tx);
        }
    }

    fn broadcast(&mut self, msg: ConsensusMessage, out: &mut StepOutput) {
        self.message_log.entry((msg.height, msg.round, msg.kind, msg.sender.clone())).or_insert_with(|| msg.clone());
        out.messages.push(Outgoing { to: Target::All, msg: WireMessage::Consensus(msg) });
    }

    fn handle_wire(&mut self, msg: WireMessage, out: &mut StepOutput) {
        match msg {
            WireMessage::Consensus(m) => {
                if !m.well_formed() || !self.validators.contains(&m.sender) || m.sender == self.id {
                    self.dropped += 1;
                    return;
                }
                if m.height < self.height {
                    // A validator still rounding-changing at a decided height
                    // missed the commit; hand it the blocks.
                    if m.kind == MessageKind::RoundChange {
                        self.serve_blocks(m.height, m.sender, out);
                    }
                    return;
                }
                let sender = m.sender.clone();
                let future = m.height > self.height;
                self.message_log.entry((m.height, m.round, m.kind, m.sender.clone())).or_insert(m);
                if future {
                    self.maybe_request_sync(&sender, out);
                }
            }
            WireMessage::Transactions(txs) => self.add_transactions(txs),
            WireMessage::BlockRequest { from_height, sender } => self.serve_blocks(from_height, sender, out),
            WireMessage::BlockResponse { blocks, sender } => {
                if !self.validators.contains(&sender) {
                    self.dropped += 1;
                    return;
                }
                for cb in blocks {
                    if cb.block.height != self.height {
                        continue;
                    }
                    let signers: BTreeSet<&String> =
                        cb.commit_senders.iter().filter(|s| self.validators.contains(s)).collect();
                    if signers.len() < self.validators.quorum() {
                        self.dropped += 1;
                        break;
                    }
                    match self.validate_block(&cb.block) {
                        Some(state) => self.commit(cb.block, state, cb.commit_senders, out),
                        None => {
                            self.dropped += 1;
                            break;
                        }
                    }
                }
            }
        }
    }

    fn serve_blocks(&mut self, from_height: u64, to: String, out: &mut StepOutput) {
        if !self.is_validator() {
            return;
        }
        let start = from_height as usize;
        if start == 0 || start >= self.chain.len() {
            return;
        }
        let end = (start + SYNC_BATCH).min(self.chain.len());
        let blocks = (start..end)
            .map(|h| CertifiedBlock { block: self.chain[h].clone(), commit_senders: self.certificates[h].clone() })
            .collect();
        out.messages.push(Outgoing {
            to: Target::Node(to),
            msg: WireMessage::BlockResponse { blocks, sender: self.id.clone() },
        });
    }

    /// Asks a peer for committed blocks once f+1 validators are seen at
    /// heights above ours. Retried after one base timeout.
    fn maybe_request_sync(&mut self, peer: &str, out: &mut StepOutput) {
        let ahead: BTreeSet<&String> = self
            .message_log
            .range((self.height + 1, 0, MessageKind::PrePrepare, String::new())..)
            .map(|(k, _)| &k.3)
            .collect();
        if ahead.len() < self.validators.f() + 1 {
            return;
        }
        self.request_blocks(peer, out);
    }

    fn request_blocks(&mut self, peer: &str, out: &mut StepOutput) {
        if let Some((h, at)) = self.sync_requested {
            if h == self.height && self.now < at + self.config.base_timeout_ms {
                return;
            }
        }
        self.sync_requested = Some((self.height, self.now));
        out.messages.push(Outgoing {
            to: Target::Node(peer.to_string()),
            msg: WireMessage::BlockRequest { from_height: self.height, sender: self.id.clone() },
        });
    }

    fn on_timeout(&mut self, out: &mut StepOutput) {
        if !self.is_validator() {
            self.round_started_at = self.now;
            let peer = self.message_log.keys().next_back().map(|k| k.3.clone());
            if let Some(peer) = peer {
                self.request_blocks(&peer, out);
            }
            return;
        }
        let next = self.round + 1;
        self.enter_round(next, out);
    }

    fn enter_round(&mut self, round: u64, out: &mut StepOutput) {
        self.round = round;
        self.phase = Phase::Idle;
        self.proposal = None;
        self.round_started_at = self.now;
        self.timer_deadline = Some(self.now + self.timeout_for(round));
        let rc = ConsensusMessage::round_change(self.height, round, self.locked_block.clone(), &self.id);
        self.broadcast(rc, out);
    }

    fn advance(&mut self, out: &mut StepOutput) {
        loop {
            let mut progressed = false;
            if self.is_validator() {
                progressed |= self.try_round_catchup(out);
                progressed |= self.try_propose(out);
                progressed |= self.try_accept(out);
                progressed |= self.try_prepared(out);
            }
            progressed |= self.try_commit(out);
            if !progressed {
                break;
            }
        }
    }

    fn messages_at(&self, height: u64, round: u64, kind: MessageKind) -> impl Iterator<Item = &ConsensusMessage> {
        self.message_log
            .range((height, round, kind, String::new())..)
            .take_while(move |(k, _)| k.0 == height && k.1 == round && k.2 == kind)
            .map(|(_, m)| m)
    }

    fn count_votes(&self, kind: MessageKind, round: u64, hash: &Digest) -> usize {
        self.messages_at(self.height, round, kind).filter(|m| m.block_hash.as_ref() == Some(hash)).count()
    }

    /// Jumps forward when f+1 validators have asked for a higher round.
    fn try_round_catchup(&mut self, out: &mut StepOutput) -> bool {
        let mut highest: BTreeMap<&str, u64> = BTreeMap::new();
        for ((h, r, kind, sender), _) in
            self.message_log.range((self.height, self.round + 1, MessageKind::PrePrepare, String::new())..)
        {
            if *h != self.height {
                break;
            }
            if *kind == MessageKind::RoundChange {
                let e = highest.entry(sender.as_str()).or_insert(*r);
                *e = (*e).max(*r);
            }
        }
        let need = self.validators.f() + 1;
        if highest.len() < need {
            return false;
        }
        let mut rounds: Vec<u64> = highest.into_values().collect();
        rounds.sort_unstable_by(|a, b| b.cmp(a));
        let target = rounds[need - 1];
        if target <= self.round {
            return false;
        }
        self.enter_round(target, out);
        true
    }

    /// Highest prepared certificate among the RoundChange quorum for `round`,
    /// or `None` when there is no quorum yet. `Some(None)` means a quorum
    /// with no prepared block.
    fn round_change_justification(&self, round: u64) -> Option<Option<PreparedCert>> {
        let rcs: Vec<&ConsensusMessage> = self.messages_at(self.height, round, MessageKind::RoundChange).collect();
        if rcs.len() < self.validators.quorum() {
            return None;
        }
        Some(
            rcs.into_iter()
                .filter_map(|m| m.prepared.as_ref())
                .max_by(|a, b| a.round.cmp(&b.round).then_with(|| b.block.block_hash.cmp(&a.block.block_hash)))
                .cloned(),
        )
    }

    fn try_propose(&mut self, out: &mut StepOutput) -> bool {
        if self.validators.leader_for(self.height, self.round) != &self.id
            || self.proposed_round == Some(self.round)
            || self.proposal.is_some()
        {
            return false;
        }
        let block = if self.round == 0 {
            match self.build_block() {
                Some(b) => b,
                None => return false,
            }
        } else {
            match self.round_change_justification(self.round) {
                None => return false,
                Some(Some(cert)) => cert.block,
                Some(None) => match self.build_block() {
                    Some(b) => b,
                    None => return false,
                },
            }
        };
        self.proposed_round = Some(self.round);
        let msg = ConsensusMessage::pre_prepare(self.height, self.round, block, &self.id);
        self.broadcast(msg, out);
        true
    }

    /// Packs valid mempool transactions (several passes, so later nonces
    /// can follow earlier ones) into a block. Drops permanently invalid ones.
    fn build_block(&mut self) -> Option<Block> {
        let mut scratch = self.state.clone();
        let mut chosen: Vec<Transaction> = Vec::new();
        let mut taken = vec![false; self.mempool.len()];
        let mut doomed = vec![false; self.mempool.len()];
        loop {
            let before = chosen.len();
            for (i, tx) in self.mempool.iter().enumerate() {
                if taken[i] || doomed[i] || chosen.len() >= self.config.max_block_txs {
                    continue;
                }
                match try_apply(&mut scratch, tx) {
                    Ok(()) => {
                        taken[i] = true;
                        let mut stamped = tx.clone();
                        stamped.submitted_at = self.now;
                        chosen.push(stamped);
                    }
                    Err(r) if r.is_permanent(&scratch, tx) && r.is_permanent(&self.state, tx) => doomed[i] = true,
                    Err(_) => {}
                }
            }
            if chosen.len() == before {
                break;
            }
        }
        let mut i = 0;
        self.mempool.retain(|_| {
            let keep = !doomed[i];
            i += 1;
            keep
        });
        if chosen.is_empty() {
            return None;
        }
        let state = execute_transactions(&self.state, self.height, &chosen, &self.config.derive)
            .expect("transactions were validated in order");
        let block = Block::new(self.height, self.tip().block_hash, chosen, self.id.clone(), self.round, state.digest());
        self.candidates.insert(block.block_hash, Candidate { block: block.clone(), state });
        Some(block)
    }

    /// Full check of a proposed block against the local chain; caches the
    /// resulting state.
    fn validate_block(&mut self, block: &Block) -> Option<ChainState> {
        if let Some(c) = self.candidates.get(&block.block_hash) {
            return Some(c.state.clone());
        }
        if self.rejected.contains(&block.block_hash) {
            return None;
        }
        let ok = block.height == self.height
            && block.parent_hash == self.tip().block_hash
            && block.hash_is_valid()
            && !block.transactions.is_empty()
            && block.transactions.len() <= self.config.max_block_txs
            && self.validators.leader_for(block.height, block.round) == &block.proposer;
        let state = if ok {
            execute_transactions(&self.state, self.height, &block.transactions, &self.config.derive)
                .ok()
                .filter(|s| s.digest() == block.state_digest)
        } else {
            None
        };
        match state {
            Some(s) => {
                self.candidates.insert(block.block_hash, Candidate { block: block.clone(), state: s.clone() });
                Some(s)
            }
            None => {
                self.rejected.insert(block.block_hash);
                None
            }
        }
    }

    /// Validates every PrePrepare seen at this height from its round's leader.
    fn collect_candidates(&mut self) {
        let proposals: Vec<(u64, Block)> = self
            .message_log
            .range((self.height, 0, MessageKind::PrePrepare, String::new())..)
            .take_while(|(k, _)| k.0 == self.height)
            .filter(|(k, m)| k.2 == MessageKind::PrePrepare && self.validators.leader_for(k.0, k.1) == &m.sender)
            .filter_map(|(k, m)| m.block.clone().map(|b| (k.1, b)))
            .filter(|(r, b)| {
                b.round <= *r && !self.candidates.contains_key(&b.block_hash) && !self.rejected.contains(&b.block_hash)
            })
            .collect();
        for (_, block) in proposals {
            self.validate_block(&block);
        }
    }

    fn try_accept(&mut self, out: &mut StepOutput) -> bool {
        if self.proposal.is_some() {
            return false;
        }
        let leader = self.validators.leader_for(self.height, self.round).clone();
        let Some(msg) = self.message_log.get(&(self.height, self.round, MessageKind::PrePrepare, leader)) else {
            return false;
        };
        let Some(block) = msg.block.clone() else {
            return false;
        };
        if block.round > self.round || self.validate_block(&block).is_none() {
            return false;
        }
        let hash = block.block_hash;
        if let Some(lock) = &self.locked_block {
            if lock.block.block_hash != hash {
                let justified = matches!(
                    self.round_change_justification(self.round),
                    Some(Some(ref cert)) if cert.block.block_hash == hash && cert.round >= lock.round
                );
                if !justified {
                    return false;
                }
            }
        }
        self.proposal = Some(hash);
        self.phase = Phase::PrePrepared;
        let prepare = ConsensusMessage::vote(MessageKind::Prepare, self.height, self.round, hash, &self.id);
        self.broadcast(prepare, out);
        true
    }

    fn try_prepared(&mut self, out: &mut StepOutput) -> bool {
        if self.phase != Phase::PrePrepared {
            return false;
        }
        let Some(hash) = self.proposal else {
            return false;
        };
        if self.count_votes(MessageKind::Prepare, self.round, &hash) < self.validators.quorum() {
            return false;
        }
        let block = self.candidates[&hash].block.clone();
        self.locked_block = Some(PreparedCert { round: self.round, block });
        self.phase = Phase::Prepared;
        let commit = ConsensusMessage::vote(MessageKind::Commit, self.height, self.round, hash, &self.id);
        self.broadcast(commit, out);
        true
    }

    /// Commits on any Commit quorum at this height; fetches the block when
    /// the quorum is for a block never received.
    fn try_commit(&mut self, out: &mut StepOutput) -> bool {
        let mut tallies: BTreeMap<(u64, Digest), Vec<ValidatorId>> = BTreeMap::new();
        for ((h, r, kind, sender), m) in
            self.message_log.range((self.height, 0, MessageKind::PrePrepare, String::new())..)
        {
            if *h != self.height {
                break;
            }
            if *kind == MessageKind::Commit {
                if let Some(hash) = m.block_hash {
                    tallies.entry((*r, hash)).or_default().push(sender.clone());
                }
            }
        }
        let quorum = self.validators.quorum();
        let Some(((_, hash), signers)) = tallies.into_iter().find(|(_, s)| s.len() >= quorum) else {
            return false;
        };
        self.collect_candidates();
        match self.candidates.get(&hash) {
            Some(c) => {
                let (block, state) = (c.block.clone(), c.state.clone());
                self.commit(block, state, signers, out);
                true
            }
            None => {
                let peer = signers.iter().find(|s| **s != self.id).cloned();
                if let Some(peer) = peer {
                    self.request_blocks(&peer, out);
                }
                false
            }
        }
    }

    fn commit(&mut self, block: Block, state: ChainState, signers: Vec<ValidatorId>, out: &mut StepOutput) {
        let committed: BTreeSet<(String, u64)> = block.transactions.iter().map(Transaction::key).collect();
        self.chain.push(block.clone());
        self.certificates.push(signers);
        self.state = state;
        self.height += 1;
        let state = &self.state;
        self.mempool.retain(|tx| {
            !committed.contains(&tx.key())
                && match crate::ledger::validate_transaction(state, tx) {
                    Ok(()) => true,
                    Err(r) => !r.is_permanent(state, tx),
                }
        });
        self.reset_height();
        self.phase = Phase::Committed;
        out.committed.push(block);
    }

    fn reset_height(&mut self) {
        self.round = 0;
        self.phase = Phase::Idle;
        self.proposal = None;
        self.proposed_round = None;
        self.locked_block = None;
        self.candidates.clear();
        self.rejected.clear();
        self.timer_deadline = None;
        self.round_started_at = self.now;
        let keep_from = (self.height, 0, MessageKind::PrePrepare, String::new());
        self.message_log = self.message_log.split_off(&keep_from);
    }
}

/// True when the block carries at least one vote (and so triggers derivation).
pub fn block_has_votes(block: &Block) -> bool {
    block.transactions.iter().any(|tx| matches!(tx.body, TxBody::CastVote { .. }))
}
