use serde::{Deserialize, Serialize};

use crate::ledger::{Block, Digest, Transaction, ValidatorId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MessageKind {
    PrePrepare,
    Prepare,
    Commit,
    RoundChange,
}

/// A block this validator saw a Prepare quorum for, carried in RoundChange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparedCert {
    pub round: u64,
    pub block: Block,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusMessage {
    pub kind: MessageKind,
    pub height: u64,
    pub round: u64,
    /// PrePrepare only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block: Option<Block>,
    /// Prepare and Commit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_hash: Option<Digest>,
    /// RoundChange only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prepared: Option<PreparedCert>,
    pub sender: ValidatorId,
}

impl ConsensusMessage {
    pub fn pre_prepare(height: u64, round: u64, block: Block, sender: &str) -> Self {
        ConsensusMessage {
            kind: MessageKind::PrePrepare,
            height,
            round,
            block_hash: Some(block.block_hash),
            block: Some(block),
            prepared: None,
            sender: sender.to_string(),
        }
    }

    pub fn vote(kind: MessageKind, height: u64, round: u64, hash: Digest, sender: &str) -> Self {
        ConsensusMessage {
            kind,
            height,
            round,
            block: None,
            block_hash: Some(hash),
            prepared: None,
            sender: sender.to_string(),
        }
    }

    pub fn round_change(height: u64, round: u64, prepared: Option<PreparedCert>, sender: &str) -> Self {
        ConsensusMessage {
            kind: MessageKind::RoundChange,
            height,
            round,
            block: None,
            block_hash: None,
            prepared,
            sender: sender.to_string(),
        }
    }

    /// The block hash this message refers to, if any.
    pub fn target_hash(&self) -> Option<Digest> {
        match self.kind {
            MessageKind::PrePrepare => self.block.as_ref().map(|b| b.block_hash),
            MessageKind::Prepare | MessageKind::Commit => self.block_hash,
            MessageKind::RoundChange => None,
        }
    }

    /// Shape check independent of node state.
    pub fn well_formed(&self) -> bool {
        match self.kind {
            MessageKind::PrePrepare => self
                .block
                .as_ref()
                .is_some_and(|b| b.height == self.height && self.block_hash.is_none_or(|h| h == b.block_hash)),
            MessageKind::Prepare | MessageKind::Commit => self.block_hash.is_some() && self.block.is_none(),
            MessageKind::RoundChange => {
                self.block.is_none()
                    && self.prepared.as_ref().is_none_or(|p| p.round < self.round && p.block.height == self.height)
            }
        }
    }
}

/// A committed block with the validators whose Commit messages finalized it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifiedBlock {
    pub block: Block,
    pub commit_senders: Vec<ValidatorId>,
}

/// Everything that travels between nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum WireMessage {
    Consensus(ConsensusMessage),
    /// Client transactions relayed to a validator's mempool.
    Transactions(Vec<Transaction>),
    BlockRequest {
        from_height: u64,
        sender: String,
    },
    BlockResponse {
        blocks: Vec<CertifiedBlock>,
        sender: String,
    },
}

impl WireMessage {
    pub fn sender(&self) -> Option<&str> {
        match self {
            WireMessage::Consensus(m) => Some(&m.sender),
            WireMessage::BlockRequest { sender, .. } | WireMessage::BlockResponse { sender, .. } => Some(sender),
            WireMessage::Transactions(_) => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            WireMessage::Consensus(m) => match m.kind {
                MessageKind::PrePrepare => "PrePrepare",
                MessageKind::Prepare => "Prepare",
                MessageKind::Commit => "Commit",
                MessageKind::RoundChange => "RoundChange",
            },
            WireMessage::Transactions(_) => "Transactions",
            WireMessage::BlockRequest { .. } => "BlockRequest",
            WireMessage::BlockResponse { .. } => "BlockResponse",
        }
    }
}
