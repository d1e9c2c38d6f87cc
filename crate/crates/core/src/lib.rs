//! Replicated phishing-URL blacklist: ledger, BFT consensus, rank-weighted
//! truth discovery and the node that serves them over HTTP.

// `!(x > 0.0)` is how parameter checks reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Consensus messages are moved, not stored in bulk; boxing buys nothing.
#![allow(clippy::large_enum_variant)]

pub mod cli;
pub mod consensus;
pub mod ledger;
pub mod node;
pub mod pipeline;
pub mod truth;
