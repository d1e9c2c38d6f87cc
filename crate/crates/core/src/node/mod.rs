//! Runnable node: consensus replica, block log, read views and HTTP API.

pub mod cluster;
pub mod config;
pub mod http;
pub mod net;
pub mod service;
pub mod views;

use thiserror::Error;

use crate::consensus::ConsensusError;
use crate::ledger::{LogError, Rejection};
use crate::pipeline::ReplayError;

pub use cluster::LocalCluster;
pub use config::{ConfigError, ConsensusSettings, NodeConfig, Peer};
pub use http::{router, Backend, ClusterMember};
pub use net::{serve, serve_local_cluster, NetworkNode};
pub use service::{Accepted, Node, Snapshot, SnapshotCell, WriteRequest};
pub use views::{BlacklistEntry, GraphExport, GraphNode, TimelineView, UrlView, VoterView};

/// Block log file name inside a node's data directory.
pub const CHAIN_FILE: &str = "chain.jsonl";

#[derive(Debug, Error)]
pub enum NodeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("block log replay failed: {0}")]
    Replay(#[from] ReplayError),
    #[error(transparent)]
    Consensus(#[from] ConsensusError),
    #[error("committed block {height} does not extend the local chain (expected {expected})")]
    ChainGap { height: u64, expected: u64 },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("node lock poisoned")]
    Poisoned,
}

/// Errors surfaced by the HTTP API.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ApiError {
    #[error("{0}")]
    Rejected(Rejection),
    #[error("not found")]
    NotFound,
    #[error("malformed request: {0}")]
    BadRequest(String),
    #[error("node not ready")]
    NotReady,
    #[error("internal error: {0}")]
    Internal(String),
}

impl ApiError {
    /// Stable reason code for the `error` field.
    pub fn code(&self) -> &'static str {
        match self {
            ApiError::Rejected(r) => r.code(),
            ApiError::NotFound => "NotFound",
            ApiError::BadRequest(_) => "MalformedRequest",
            ApiError::NotReady => "NodeNotReady",
            ApiError::Internal(_) => "Internal",
        }
    }
}
