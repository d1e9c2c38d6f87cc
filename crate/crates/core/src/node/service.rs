//! A runnable node: the consensus replica plus the block log, the pending
//! write queue and the read snapshot published after every commit.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use super::{ApiError, NodeConfig, NodeError, CHAIN_FILE};
use crate::consensus::{
    Input, NodeState, Outgoing, ReplicaConfig, Role, StepOutput, Target, ValidatorSet, WireMessage,
};
use crate::ledger::{
    try_apply, validate_transaction, Block, BlockLog, ChainState, Transaction, UrlId, Verdict, VerifierId,
};
use crate::pipeline::{replay, DeriveParams};

/// What a read request sees: the state and chain as of the last commit.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub state: ChainState,
    pub chain: Vec<Block>,
    pub derive: DeriveParams,
}

/// Shared handle to the latest snapshot. Readers clone the inner `Arc` and
/// never block the writer for longer than a pointer swap.
#[derive(Debug, Clone)]
pub struct SnapshotCell(Arc<RwLock<Arc<Snapshot>>>);

impl SnapshotCell {
    fn new(s: Snapshot) -> Self {
        SnapshotCell(Arc::new(RwLock::new(Arc::new(s))))
    }

    pub fn get(&self) -> Arc<Snapshot> {
        self.0.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    fn set(&self, s: Snapshot) {
        *self.0.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(s);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WriteRequest {
    RegisterUser { verifier_id: VerifierId, display_name: String },
    SubmitUrl { sender: VerifierId, url: String, evidence_email: String },
    CastVote { sender: VerifierId, url_id: UrlId, verdict: Verdict },
}

impl WriteRequest {
    pub fn sender(&self) -> &str {
        match self {
            WriteRequest::RegisterUser { verifier_id, .. } => verifier_id,
            WriteRequest::SubmitUrl { sender, .. } | WriteRequest::CastVote { sender, .. } => sender,
        }
    }

    fn into_transaction(self, nonce: u64) -> Transaction {
        match self {
            WriteRequest::RegisterUser { verifier_id, display_name } => {
                Transaction::register_user(verifier_id, display_name, nonce)
            }
            WriteRequest::SubmitUrl { sender, url, evidence_email } => {
                Transaction::submit_url(sender, url, evidence_email, nonce)
            }
            WriteRequest::CastVote { sender, url_id, verdict } => {
                Transaction::cast_vote(sender, url_id, verdict, nonce)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Accepted {
    pub tx_id: String,
    pub sender: VerifierId,
    pub nonce: u64,
    pub status: String,
}

pub struct Node {
    replica: NodeState,
    log: Option<BlockLog>,
    /// Transactions accepted through this node's API and not yet committed.
    pending: Vec<Transaction>,
    snapshot: SnapshotCell,
    derive: DeriveParams,
}

impl Node {
    /// Opens a node, replaying `<data_dir>/chain.jsonl` when present.
    pub fn open(
        id: &str,
        role: Role,
        validators: ValidatorSet,
        config: ReplicaConfig,
        data_dir: Option<&Path>,
    ) -> Result<Self, NodeError> {
        let mut replica = NodeState::new(id, role, validators, config);
        let mut log = None;
        if let Some(dir) = data_dir {
            let path = dir.join(CHAIN_FILE);
            let blocks = crate::ledger::read_blocks(&path)?;
            let mut opened = BlockLog::open(&path)?;
            if blocks.is_empty() {
                opened.append(&Block::genesis())?;
            } else {
                let state = replay(&blocks, &config.derive)?;
                replica.restore(blocks, state);
            }
            log = Some(opened);
        }
        let snapshot = SnapshotCell::new(Snapshot {
            state: replica.state().clone(),
            chain: replica.chain().to_vec(),
            derive: config.derive,
        });
        Ok(Node { replica, log, pending: Vec::new(), snapshot, derive: config.derive })
    }

    pub fn from_config(cfg: &NodeConfig) -> Result<Self, NodeError> {
        let vs = cfg.validator_set()?;
        Node::open(&cfg.node_id, cfg.role, vs, cfg.replica_config(), Some(&cfg.data_dir))
    }

    pub fn id(&self) -> &str {
        &self.replica.id
    }

    pub fn role(&self) -> Role {
        self.replica.role
    }

    pub fn replica(&self) -> &NodeState {
        &self.replica
    }

    pub fn snapshot_cell(&self) -> SnapshotCell {
        self.snapshot.clone()
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.get()
    }

    pub fn pending(&self) -> &[Transaction] {
        &self.pending
    }

    pub fn timer_deadline(&self) -> Option<u64> {
        self.replica.timer_deadline
    }

    /// State with this node's pending writes folded in, for nonce
    /// assignment and pre-validation.
    fn projected_state(&self) -> ChainState {
        let mut scratch = self.replica.state().clone();
        for tx in &self.pending {
            let _ = try_apply(&mut scratch, tx);
        }
        scratch
    }

    /// Builds the transaction with the sender's next nonce, checks it, and
    /// hands it to consensus. A rejected request consumes no nonce.
    pub fn submit(&mut self, now: u64, req: WriteRequest) -> Result<(Accepted, Vec<Outgoing>), ApiError> {
        let scratch = self.projected_state();
        let sender = req.sender().to_string();
        let pending_max = self.pending.iter().filter(|t| t.sender == sender).map(|t| t.nonce).max().unwrap_or(0);
        let nonce = scratch.last_nonce(&sender).max(pending_max) + 1;
        let tx = req.into_transaction(nonce);
        validate_transaction(&scratch, &tx).map_err(ApiError::Rejected)?;

        self.pending.push(tx.clone());
        let accepted = Accepted { tx_id: tx.tx_id(), sender, nonce, status: "accepted".into() };
        let mut out = vec![Outgoing { to: Target::All, msg: WireMessage::Transactions(vec![tx.clone()]) }];
        let step = self.replica.step(now, Input::Propose(vec![tx]));
        out.extend(self.absorb(step).map_err(|e| ApiError::Internal(e.to_string()))?);
        Ok((accepted, out))
    }

    pub fn handle(&mut self, now: u64, msg: WireMessage) -> Result<Vec<Outgoing>, NodeError> {
        let step = self.replica.step(now, Input::Message(msg));
        self.absorb(step)
    }

    /// Fires the consensus timer if it is due.
    pub fn tick(&mut self, now: u64) -> Result<Vec<Outgoing>, NodeError> {
        if self.replica.timer_deadline.is_some_and(|d| now >= d) {
            let step = self.replica.step(now, Input::Timeout);
            self.absorb(step)
        } else {
            Ok(Vec::new())
        }
    }

    fn absorb(&mut self, step: StepOutput) -> Result<Vec<Outgoing>, NodeError> {
        for block in &step.committed {
            self.on_block_committed(block)?;
        }
        Ok(step.messages)
    }

    /// Persists a block the replica just committed and publishes the new
    /// read snapshot. The replica has already executed the block and run
    /// the derivation pipeline on it.
    pub fn on_block_committed(&mut self, block: &Block) -> Result<(), NodeError> {
        let prev = self.snapshot.get();
        let expected = prev.chain.len() as u64;
        if block.height != expected {
            return Err(NodeError::ChainGap { height: block.height, expected });
        }
        if let Some(log) = self.log.as_mut() {
            log.append(block)?;
        }
        let state = self.replica.state();
        let committed: BTreeSet<(String, u64)> = block.transactions.iter().map(Transaction::key).collect();
        self.pending.retain(|tx| {
            !committed.contains(&tx.key())
                && match validate_transaction(state, tx) {
                    Ok(()) => true,
                    Err(r) => !r.is_permanent(state, tx),
                }
        });
        let mut chain = prev.chain.clone();
        chain.push(block.clone());
        self.snapshot.set(Snapshot { state: state.clone(), chain, derive: self.derive });
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::Rejection;

    fn solo(dir: Option<&Path>) -> Node {
        let vs = ValidatorSet::new(vec!["v0".into()]).unwrap();
        Node::open("v0", Role::Validator, vs, ReplicaConfig::default(), dir).unwrap()
    }

    fn register(id: &str) -> WriteRequest {
        WriteRequest::RegisterUser { verifier_id: id.into(), display_name: id.into() }
    }

    #[test]
    fn single_validator_commits_immediately() {
        let mut node = solo(None);
        let (acc, _) = node.submit(0, register("alice")).unwrap();
        assert_eq!(acc.nonce, 1);
        assert_eq!(node.snapshot().chain.len(), 2);
        assert!(node.pending().is_empty());
        assert_eq!(node.submit(1, register("alice")).unwrap_err(), ApiError::Rejected(Rejection::DuplicateUser));
    }

    #[test]
    fn rejection_consumes_no_nonce() {
        let mut node = solo(None);
        node.submit(0, register("a")).unwrap();
        let bad = WriteRequest::SubmitUrl {
            sender: "a".into(),
            url: "http://x.example/".into(),
            evidence_email: "nothing".into(),
        };
        assert_eq!(node.submit(1, bad).unwrap_err(), ApiError::Rejected(Rejection::EvidenceMismatch));
        let good = WriteRequest::SubmitUrl {
            sender: "a".into(),
            url: "http://x.example/".into(),
            evidence_email: "see http://x.example/".into(),
        };
        assert_eq!(node.submit(2, good).unwrap().0.nonce, 2);
    }

    #[test]
    fn reopening_replays_the_log() {
        let dir = tempfile::tempdir().unwrap();
        let digest = {
            let mut node = solo(Some(dir.path()));
            node.submit(0, register("a")).unwrap();
            node.submit(1, register("b")).unwrap();
            node.snapshot().state.digest()
        };
        let node = solo(Some(dir.path()));
        assert_eq!(node.snapshot().state.digest(), digest);
        assert_eq!(node.snapshot().chain.len(), 3);
    }

    #[test]
    fn out_of_order_block_is_a_gap() {
        let mut node = solo(None);
        let mut b = Block::genesis();
        b.height = 5;
        assert!(matches!(node.on_block_committed(&b), Err(NodeError::ChainGap { height: 5, expected: 1 })));
    }

    #[test]
    fn write_requests_parse_by_shape() {
        let r: WriteRequest = serde_json::from_str(r#"{"sender":"a","url_id":"x","verdict":"Phishing"}"#).unwrap();
        assert!(matches!(r, WriteRequest::CastVote { .. }));
        let r: WriteRequest = serde_json::from_str(r#"{"verifier_id":"a","display_name":"A"}"#).unwrap();
        assert!(matches!(r, WriteRequest::RegisterUser { .. }));
    }
}
