//! Transaction validation and application.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::types::{ChainState, Transaction, TxBody, UrlRecord, UrlStatus, VerifierAccount, Vote};
use super::urlnorm;

/// Why a transaction was refused. The variant names double as the wire
/// error codes of the HTTP API.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Error, Serialize, Deserialize)]
pub enum Rejection {
    #[error("UnknownUser")]
    UnknownUser,
    #[error("BadNonce")]
    BadNonce,
    #[error("DuplicateUrl")]
    DuplicateUrl,
    #[error("EvidenceMismatch")]
    EvidenceMismatch,
    #[error("MalformedUrl")]
    MalformedUrl,
    #[error("UnknownUrl")]
    UnknownUrl,
    #[error("DuplicateVote")]
    DuplicateVote,
    #[error("DuplicateUser")]
    DuplicateUser,
}

impl Rejection {
    pub fn code(self) -> &'static str {
        match self {
            Rejection::UnknownUser => "UnknownUser",
            Rejection::BadNonce => "BadNonce",
            Rejection::DuplicateUrl => "DuplicateUrl",
            Rejection::EvidenceMismatch => "EvidenceMismatch",
            Rejection::MalformedUrl => "MalformedUrl",
            Rejection::UnknownUrl => "UnknownUrl",
            Rejection::DuplicateVote => "DuplicateVote",
            Rejection::DuplicateUser => "DuplicateUser",
        }
    }

    /// True when the transaction can never become valid on top of a later
    /// state (the mempool drops these instead of retrying them).
    pub fn is_permanent(self, state: &ChainState, tx: &Transaction) -> bool {
        match self {
            Rejection::BadNonce => tx.nonce <= state.last_nonce(&tx.sender),
            Rejection::UnknownUser | Rejection::UnknownUrl => false,
            _ => true,
        }
    }
}

pub fn validate_transaction(state: &ChainState, tx: &Transaction) -> Result<(), Rejection> {
    let registered = state.users.contains_key(&tx.sender);
    match &tx.body {
        TxBody::RegisterUser { .. } => {
            if registered {
                return Err(Rejection::DuplicateUser);
            }
        }
        _ if !registered => return Err(Rejection::UnknownUser),
        _ => {}
    }
    if tx.sender.is_empty() {
        return Err(Rejection::UnknownUser);
    }
    if tx.nonce != state.last_nonce(&tx.sender) + 1 {
        return Err(Rejection::BadNonce);
    }

    match &tx.body {
        TxBody::RegisterUser { .. } => Ok(()),
        TxBody::SubmitUrl { url, evidence_email } => {
            let id = urlnorm::url_id(url).ok_or(Rejection::MalformedUrl)?;
            if state.urls.contains_key(&id) {
                return Err(Rejection::DuplicateUrl);
            }
            if evidence_email.trim().is_empty() || !evidence_email.contains(url.as_str()) {
                return Err(Rejection::EvidenceMismatch);
            }
            Ok(())
        }
        TxBody::CastVote { url_id, .. } => {
            let record = state.urls.get(url_id).ok_or(Rejection::UnknownUrl)?;
            if record.has_voted(&tx.sender) {
                return Err(Rejection::DuplicateVote);
            }
            Ok(())
        }
    }
}

/// Applies a validated transaction, returning the new state.
pub fn apply_transaction(state: &ChainState, tx: &Transaction) -> ChainState {
    let mut next = state.clone();
    apply_in_place(&mut next, tx);
    next
}

/// In-place form of [`apply_transaction`]. Entries created here are stamped
/// with the height of the block being built (`state.height + 1`).
pub fn apply_in_place(state: &mut ChainState, tx: &Transaction) {
    let height = state.height + 1;
    match &tx.body {
        TxBody::RegisterUser { display_name } => {
            state.users.insert(tx.sender.clone(), VerifierAccount::new(tx.sender.clone(), display_name.clone()));
        }
        TxBody::SubmitUrl { url, evidence_email } => {
            let url_id = urlnorm::url_id(url).expect("validated url");
            state.urls.insert(
                url_id.clone(),
                UrlRecord {
                    url_id,
                    url: url.clone(),
                    submitter: tx.sender.clone(),
                    evidence_email: evidence_email.clone(),
                    votes: Vec::new(),
                    status: UrlStatus::Unverified,
                    phish_score: None,
                    first_block_height: height,
                },
            );
        }
        TxBody::CastVote { url_id, verdict } => {
            let record = state.urls.get_mut(url_id).expect("validated url_id");
            let ordinal = record.votes.len() as u32 + 1;
            record.votes.push(Vote { verifier: tx.sender.clone(), verdict: *verdict, ordinal, block_height: height });
            if let Some(account) = state.users.get_mut(&tx.sender) {
                account.votes_cast += 1;
            }
        }
    }
    state.sender_nonces.insert(tx.sender.clone(), tx.nonce);
}

/// Validates and applies in one step.
pub fn try_apply(state: &mut ChainState, tx: &Transaction) -> Result<(), Rejection> {
    validate_transaction(state, tx)?;
    apply_in_place(state, tx);
    Ok(())
}
