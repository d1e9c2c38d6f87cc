//! Node configuration file.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consensus::{ReplicaConfig, Role, ValidatorSet};
use crate::pipeline::DeriveParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config does not parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConsensusSettings {
    pub base_timeout_ms: u64,
    pub max_block_txs: usize,
    /// How often the runtime checks consensus timers.
    pub tick_ms: u64,
}

impl Default for ConsensusSettings {
    fn default() -> Self {
        let r = ReplicaConfig::default();
        ConsensusSettings { base_timeout_ms: r.base_timeout_ms, max_block_txs: r.max_block_txs, tick_ms: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeConfig {
    pub node_id: String,
    pub role: Role,
    pub listen_address: String,
    /// `"<node_id>@<host>:<port>"` for every other node.
    #[serde(default)]
    pub peer_addresses: Vec<String>,
    /// Ordered validator ids; the order fixes leader rotation.
    pub validators: Vec<String>,
    pub data_dir: PathBuf,
    #[serde(default)]
    pub consensus: ConsensusSettings,
    #[serde(default)]
    pub truth: DeriveParams,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Peer {
    pub id: String,
    pub address: String,
}

pub fn parse_peer(s: &str) -> Result<Peer, ConfigError> {
    match s.split_once('@') {
        Some((id, addr)) if !id.is_empty() && addr.contains(':') => {
            Ok(Peer { id: id.to_string(), address: addr.to_string() })
        }
        _ => Err(ConfigError::Invalid(format!("peer address {s:?} is not id@host:port"))),
    }
}

impl NodeConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: NodeConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.node_id.is_empty() {
            return bad("node_id is empty".into());
        }
        let vs = self.validator_set()?;
        match (self.role, vs.contains(&self.node_id)) {
            (Role::Validator, false) => return bad(format!("validator {} is not in the validator set", self.node_id)),
            (Role::Normal, true) => return bad(format!("normal node {} is listed as a validator", self.node_id)),
            _ => {}
        }
        let peers = self.peers()?;
        let mut seen = BTreeSet::new();
        for p in &peers {
            if p.id == self.node_id || !seen.insert(p.id.clone()) {
                return bad(format!("peer {} listed twice or equal to this node", p.id));
            }
        }
        if self.consensus.base_timeout_ms == 0 || self.consensus.max_block_txs == 0 || self.consensus.tick_ms == 0 {
            return bad("consensus timeouts and block size must be positive".into());
        }
        let t = &self.truth;
        if !(t.damping > 0.0 && t.damping < 1.0) || !(t.tol > 0.0) || t.max_iter == 0 {
            return bad("truth parameters need 0 < damping < 1, tol > 0, max_iter >= 1".into());
        }
        if t.vote_threshold < crate::ledger::VOTE_THRESHOLD {
            return bad("vote_threshold must be at least 3".into());
        }
        Ok(())
    }

    pub fn validator_set(&self) -> Result<ValidatorSet, ConfigError> {
        ValidatorSet::new(self.validators.clone()).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn peers(&self) -> Result<Vec<Peer>, ConfigError> {
        self.peer_addresses.iter().map(|s| parse_peer(s)).collect()
    }

    pub fn replica_config(&self) -> ReplicaConfig {
        ReplicaConfig {
            base_timeout_ms: self.consensus.base_timeout_ms,
            max_block_txs: self.consensus.max_block_txs,
            derive: self.truth,
        }
    }

    pub fn chain_path(&self) -> PathBuf {
        self.data_dir.join(super::CHAIN_FILE)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"{
        "node_id": "v0", "role": "Validator", "listen_address": "127.0.0.1:8000",
        "peer_addresses": ["v1@127.0.0.1:8001"], "validators": ["v0", "v1"], "data_dir": "/tmp/x"
    }"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = NodeConfig::from_json(GOOD).unwrap();
        assert_eq!(cfg.consensus.base_timeout_ms, 1000);
        assert_eq!(cfg.truth.vote_threshold, 3);
        assert_eq!(cfg.peers().unwrap()[0], Peer { id: "v1".into(), address: "127.0.0.1:8001".into() });
    }

    #[test]
    fn rejects_bad_role_and_membership() {
        assert!(matches!(
            NodeConfig::from_json(&GOOD.replace("\"Validator\"", "\"Miner\"")),
            Err(ConfigError::Parse(_))
        ));
        assert!(matches!(
            NodeConfig::from_json(&GOOD.replace("\"Validator\"", "\"Normal\"")),
            Err(ConfigError::Invalid(_))
        ));
        assert!(NodeConfig::from_json(&GOOD.replace("v1@127.0.0.1:8001", "v1")).is_err());
    }
}
