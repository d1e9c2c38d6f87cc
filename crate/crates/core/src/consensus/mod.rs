//! IBFT-style block replication and a deterministic network simulator.

pub mod message;
pub mod node;
pub mod sim;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::ValidatorId;

pub use message::{CertifiedBlock, ConsensusMessage, MessageKind, PreparedCert, WireMessage};
pub use node::{Input, NodeConfig as ReplicaConfig, NodeState, Outgoing, Phase, Role, StepOutput, Target};
pub use sim::{run_simulation, Behavior, DelayModel, Fault, Partition, Scenario, SimulationReport, WorkloadItem};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConsensusError {
    #[error("invalid validator set: {0}")]
    InvalidValidatorSet(String),
    #[error("invalid scenario: {0}")]
    ScenarioInvalid(String),
}

/// `2 * floor((n - 1) / 3) + 1`.
pub fn quorum_size(n: usize) -> Result<usize, ConsensusError> {
    if n == 0 {
        return Err(ConsensusError::InvalidValidatorSet("no validators".into()));
    }
    Ok(2 * max_faults(n) + 1)
}

/// `floor((n - 1) / 3)`; zero for an empty set.
pub fn max_faults(n: usize) -> usize {
    n.saturating_sub(1) / 3
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValidatorSet {
    validators: Vec<ValidatorId>,
}

impl ValidatorSet {
    pub fn new(validators: Vec<ValidatorId>) -> Result<Self, ConsensusError> {
        if validators.is_empty() {
            return Err(ConsensusError::InvalidValidatorSet("no validators".into()));
        }
        let mut sorted = validators.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != validators.len() {
            return Err(ConsensusError::InvalidValidatorSet("duplicate validator id".into()));
        }
        Ok(ValidatorSet { validators })
    }

    pub fn ids(&self) -> &[ValidatorId] {
        &self.validators
    }

    pub fn n(&self) -> usize {
        self.validators.len()
    }

    pub fn f(&self) -> usize {
        max_faults(self.n())
    }

    pub fn quorum(&self) -> usize {
        2 * self.f() + 1
    }

    pub fn contains(&self, id: &str) -> bool {
        self.validators.iter().any(|v| v == id)
    }

    pub fn leader_for(&self, height: u64, round: u64) -> &ValidatorId {
        leader_for(height, round, self)
    }
}

/// `validators[(height + round) mod n]`.
pub fn leader_for(height: u64, round: u64, vs: &ValidatorSet) -> &ValidatorId {
    let n = vs.n() as u64;
    &vs.validators[(height.wrapping_add(round) % n) as usize]
}
