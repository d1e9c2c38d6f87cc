use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::canonical::{sha256, Digest};

pub type VerifierId = String;
pub type ValidatorId = String;

/// Hex-encoded SHA-256 of a normalized URL.
pub type UrlId = String;

/// Number of votes a URL needs before it is scored.
pub const VOTE_THRESHOLD: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Verdict {
    Phishing,
    NotPhishing,
}

impl Verdict {
    pub fn is_phishing(self) -> bool {
        matches!(self, Verdict::Phishing)
    }

    pub fn from_phishing(phishing: bool) -> Self {
        if phishing {
            Verdict::Phishing
        } else {
            Verdict::NotPhishing
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Phishing => "Phishing",
            Verdict::NotPhishing => "NotPhishing",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Verdict {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Phishing" | "phishing" | "P" => Ok(Verdict::Phishing),
            "NotPhishing" | "not-phishing" | "notphishing" | "N" => Ok(Verdict::NotPhishing),
            other => Err(format!("unknown verdict {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UrlStatus {
    Unverified,
    Phishing,
    NotPhishing,
}

impl UrlStatus {
    /// Status implied by a score; strictly positive means phishing.
    pub fn from_score(score: Option<f64>) -> Self {
        match score {
            None => UrlStatus::Unverified,
            Some(s) if s > 0.0 => UrlStatus::Phishing,
            Some(_) => UrlStatus::NotPhishing,
        }
    }

    pub fn label(self) -> Option<Verdict> {
        match self {
            UrlStatus::Unverified => None,
            UrlStatus::Phishing => Some(Verdict::Phishing),
            UrlStatus::NotPhishing => Some(Verdict::NotPhishing),
        }
    }
}

/// Kind-specific part of a transaction. Serialized as `"kind"` plus `"payload"`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum TxBody {
    RegisterUser { display_name: String },
    SubmitUrl { url: String, evidence_email: String },
    CastVote { url_id: UrlId, verdict: Verdict },
}

impl TxBody {
    pub fn kind(&self) -> &'static str {
        match self {
            TxBody::RegisterUser { .. } => "RegisterUser",
            TxBody::SubmitUrl { .. } => "SubmitUrl",
            TxBody::CastVote { .. } => "CastVote",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub sender: VerifierId,
    pub nonce: u64,
    #[serde(default)]
    pub submitted_at: u64,
    #[serde(flatten)]
    pub body: TxBody,
}

impl Transaction {
    pub fn register_user(sender: impl Into<String>, display_name: impl Into<String>, nonce: u64) -> Self {
        Transaction {
            sender: sender.into(),
            nonce,
            submitted_at: 0,
            body: TxBody::RegisterUser { display_name: display_name.into() },
        }
    }

    pub fn submit_url(
        sender: impl Into<String>,
        url: impl Into<String>,
        evidence_email: impl Into<String>,
        nonce: u64,
    ) -> Self {
        Transaction {
            sender: sender.into(),
            nonce,
            submitted_at: 0,
            body: TxBody::SubmitUrl { url: url.into(), evidence_email: evidence_email.into() },
        }
    }

    pub fn cast_vote(sender: impl Into<String>, url_id: impl Into<String>, verdict: Verdict, nonce: u64) -> Self {
        Transaction {
            sender: sender.into(),
            nonce,
            submitted_at: 0,
            body: TxBody::CastVote { url_id: url_id.into(), verdict },
        }
    }

    /// Identifier stable across proposers: `submitted_at` is excluded.
    pub fn tx_id(&self) -> String {
        let mut unstamped = self.clone();
        unstamped.submitted_at = 0;
        sha256(&super::canonical::canonical_serialize(&unstamped)).to_hex()
    }

    /// Mempool identity: a sender cannot have two live transactions with one nonce.
    pub fn key(&self) -> (VerifierId, u64) {
        (self.sender.clone(), self.nonce)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vote {
    pub verifier: VerifierId,
    pub verdict: Verdict,
    pub ordinal: u32,
    pub block_height: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UrlRecord {
    pub url_id: UrlId,
    pub url: String,
    pub submitter: VerifierId,
    pub evidence_email: String,
    pub votes: Vec<Vote>,
    pub status: UrlStatus,
    pub phish_score: Option<f64>,
    pub first_block_height: u64,
}

impl UrlRecord {
    pub fn has_voted(&self, verifier: &str) -> bool {
        self.votes.iter().any(|v| v.verifier == verifier)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifierAccount {
    pub verifier_id: VerifierId,
    pub display_name: String,
    pub rank: f64,
    pub skill_points: u32,
    pub votes_cast: u32,
    pub votes_correct: u32,
}

impl VerifierAccount {
    pub fn new(verifier_id: impl Into<String>, display_name: impl Into<String>) -> Self {
        VerifierAccount {
            verifier_id: verifier_id.into(),
            display_name: display_name.into(),
            rank: 0.0,
            skill_points: 0,
            votes_cast: 0,
            votes_correct: 0,
        }
    }
}

/// Materialized view of the ledger. Maps are ordered so the canonical
/// encoding is independent of insertion order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub users: BTreeMap<VerifierId, VerifierAccount>,
    pub urls: BTreeMap<UrlId, UrlRecord>,
    pub height: u64,
    pub sender_nonces: BTreeMap<VerifierId, u64>,
}

impl ChainState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn last_nonce(&self, sender: &str) -> u64 {
        self.sender_nonces.get(sender).copied().unwrap_or(0)
    }

    pub fn digest(&self) -> Digest {
        super::canonical::state_digest(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub height: u64,
    pub parent_hash: Digest,
    pub transactions: Vec<Transaction>,
    pub proposer: ValidatorId,
    pub round: u64,
    pub state_digest: Digest,
    pub block_hash: Digest,
}

/// Proposer id recorded in the genesis block.
pub const GENESIS_PROPOSER: &str = "genesis";

impl Block {
    /// Builds a block and fills in its hash.
    pub fn new(
        height: u64,
        parent_hash: Digest,
        transactions: Vec<Transaction>,
        proposer: impl Into<String>,
        round: u64,
        state_digest: Digest,
    ) -> Self {
        let mut block = Block {
            height,
            parent_hash,
            transactions,
            proposer: proposer.into(),
            round,
            state_digest,
            block_hash: Digest::ZERO,
        };
        block.block_hash = super::canonical::block_hash(&block);
        block
    }

    /// The shared genesis block: height 0, zero parent, no transactions,
    /// digest of the empty state.
    pub fn genesis() -> Self {
        Block::new(0, Digest::ZERO, Vec::new(), GENESIS_PROPOSER, 0, ChainState::new().digest())
    }

    pub fn hash_is_valid(&self) -> bool {
        super::canonical::block_hash(self) == self.block_hash
    }

    pub fn has_votes(&self) -> bool {
        self.transactions.iter().any(|tx| matches!(tx.body, TxBody::CastVote { .. }))
    }
}
