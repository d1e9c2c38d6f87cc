//! Several nodes in one process on a synchronous FIFO transport.
//!
//! Messages are delivered in send order and time only moves when the
//! caller says so, so a cluster run is reproducible.

use std::collections::{BTreeMap, VecDeque};
use std::path::Path;

use super::service::{Accepted, Node, WriteRequest};
use super::{ApiError, NodeError};
use crate::consensus::{Outgoing, ReplicaConfig, Role, Target, ValidatorSet, WireMessage};

/// Upper bound on deliveries per `settle`, as a guard against livelock.
const MAX_DELIVERIES: usize = 10_000_000;

pub struct LocalCluster {
    nodes: Vec<Node>,
    index: BTreeMap<String, usize>,
    queue: VecDeque<(usize, usize, WireMessage)>,
    now: u64,
    delivered: u64,
}

impl LocalCluster {
    /// `n_validators` validators `v0..` and `n_normal` normal nodes `n0..`.
    /// With `data_root`, node `id` keeps its log in `<data_root>/<id>/`.
    pub fn new(
        n_validators: usize,
        n_normal: usize,
        config: ReplicaConfig,
        data_root: Option<&Path>,
    ) -> Result<Self, NodeError> {
        let vs = ValidatorSet::new((0..n_validators).map(|i| format!("v{i}")).collect())?;
        let ids = (0..n_validators)
            .map(|i| (format!("v{i}"), Role::Validator))
            .chain((0..n_normal).map(|i| (format!("n{i}"), Role::Normal)));
        let mut nodes = Vec::new();
        for (id, role) in ids {
            let dir = data_root.map(|d| d.join(&id));
            nodes.push(Node::open(&id, role, vs.clone(), config, dir.as_deref())?);
        }
        let index = nodes.iter().enumerate().map(|(i, n)| (n.id().to_string(), i)).collect();
        Ok(LocalCluster { nodes, index, queue: VecDeque::new(), now: 0, delivered: 0 })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, i: usize) -> &Node {
        &self.nodes[i]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn delivered(&self) -> u64 {
        self.delivered
    }

    /// Submits through node `i` and runs the cluster until it goes quiet.
    pub fn submit(&mut self, i: usize, req: WriteRequest) -> Result<Accepted, ApiError> {
        let (acc, out) = self.nodes[i].submit(self.now, req)?;
        self.route(i, out);
        self.settle().map_err(|e| ApiError::Internal(e.to_string()))?;
        Ok(acc)
    }

    /// Delivers one queued message. Returns false when the queue is empty.
    pub fn pump(&mut self) -> Result<bool, NodeError> {
        let Some((_, to, msg)) = self.queue.pop_front() else {
            return Ok(false);
        };
        self.delivered += 1;
        let out = self.nodes[to].handle(self.now, msg)?;
        self.route(to, out);
        Ok(true)
    }

    /// Delivers until nothing is in flight.
    pub fn settle(&mut self) -> Result<usize, NodeError> {
        let mut n = 0;
        while n < MAX_DELIVERIES && self.pump()? {
            n += 1;
        }
        Ok(n)
    }

    /// Moves the clock forward, fires due timers and settles.
    pub fn advance(&mut self, ms: u64) -> Result<(), NodeError> {
        self.advance_to(self.now + ms)
    }

    pub fn advance_to(&mut self, now: u64) -> Result<(), NodeError> {
        self.now = self.now.max(now);
        for i in 0..self.nodes.len() {
            let out = self.nodes[i].tick(self.now)?;
            self.route(i, out);
        }
        self.settle().map(|_| ())
    }

    fn route(&mut self, from: usize, out: Vec<Outgoing>) {
        for o in out {
            match o.to {
                Target::All => {
                    for to in 0..self.nodes.len() {
                        if to != from {
                            self.queue.push_back((from, to, o.msg.clone()));
                        }
                    }
                }
                Target::Node(id) => {
                    if let Some(&to) = self.index.get(&id) {
                        self.queue.push_back((from, to, o.msg));
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_node_commits_a_registration() {
        let mut c = LocalCluster::new(4, 1, ReplicaConfig::default(), None).unwrap();
        c.submit(4, WriteRequest::RegisterUser { verifier_id: "a".into(), display_name: "A".into() }).unwrap();
        let digests: Vec<_> = c.nodes().iter().map(|n| n.snapshot().state.digest()).collect();
        assert!(digests.windows(2).all(|w| w[0] == w[1]));
        assert!(c.nodes().iter().all(|n| n.snapshot().chain.len() == 2));
    }
}
