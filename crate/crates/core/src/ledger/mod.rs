//! Ledger state machine: transactions, blocks, validation rules and the
//! canonical encoding that every replica hashes.

pub mod canonical;
pub mod log;
pub mod rules;
pub mod types;
pub mod urlnorm;

pub use canonical::{block_hash, canonical_serialize, sha256, state_digest, Digest};
pub use log::{read_blocks, BlockLog, LogError};
pub use rules::{apply_in_place, apply_transaction, try_apply, validate_transaction, Rejection};
pub use types::{
    Block, ChainState, Transaction, TxBody, UrlId, UrlRecord, UrlStatus, ValidatorId, Verdict, VerifierAccount,
    VerifierId, Vote, VOTE_THRESHOLD,
};
pub use urlnorm::{normalize_url, url_id};
