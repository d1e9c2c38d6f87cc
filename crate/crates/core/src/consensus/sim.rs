//! Deterministic discrete-event network simulator.
//!
//! One logical clock, one seeded RNG for message delays, and a priority
//! queue ordered by (time, insertion sequence). Given the same scenario the
//! report is identical down to the byte.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::message::{ConsensusMessage, MessageKind, WireMessage};
use super::node::{Input, NodeConfig, NodeState, Outgoing, Role, Target};
use super::{max_faults, ConsensusError, ValidatorSet};
use crate::ledger::{sha256, Block, Digest, Transaction};
use crate::pipeline::execute_transactions;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Behavior {
    /// Stops receiving and sending at the given logical time.
    Crash { at_time: u64 },
    /// Sends conflicting PrePrepares and votes to different halves of its peers.
    Equivocate,
    /// Runs but never sends anything.
    Mute,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fault {
    pub node: String,
    pub behavior: Behavior,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelayModel {
    pub min_ms: u64,
    pub max_ms: u64,
}

/// Messages between the two groups are dropped while `from_time <= t < to_time`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub from_time: u64,
    pub to_time: u64,
    pub group_a: Vec<String>,
    pub group_b: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadItem {
    pub at: u64,
    pub tx: Transaction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub seed: u64,
    pub n_validators: usize,
    #[serde(default)]
    pub n_normal: usize,
    #[serde(default)]
    pub faults: Vec<Fault>,
    pub delay_model: DelayModel,
    #[serde(default)]
    pub partitions: Vec<Partition>,
    #[serde(default)]
    pub workload: Vec<WorkloadItem>,
    pub max_time: u64,
    /// Maximum number of faulty nodes; defaults to f.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault_budget: Option<usize>,
    /// What the scenario author expects `stalled` to be, checked by the CLI.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_stalled: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_timeout_ms: Option<u64>,
}

pub fn validator_id(i: usize) -> String {
    format!("v{i}")
}

pub fn normal_id(i: usize) -> String {
    format!("n{i}")
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ConsensusError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| ConsensusError::ScenarioInvalid(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn node_ids(&self) -> Vec<String> {
        (0..self.n_validators).map(validator_id).chain((0..self.n_normal).map(normal_id)).collect()
    }

    pub fn validate(&self) -> Result<(), ConsensusError> {
        let bad = |m: String| Err(ConsensusError::ScenarioInvalid(m));
        if self.n_validators == 0 {
            return bad("n_validators must be >= 1".into());
        }
        if self.delay_model.min_ms > self.delay_model.max_ms {
            return bad("delay_model.min_ms exceeds max_ms".into());
        }
        let ids: BTreeSet<String> = self.node_ids().into_iter().collect();
        let mut seen = BTreeSet::new();
        for f in &self.faults {
            if !ids.contains(&f.node) {
                return bad(format!("fault on unknown node {}", f.node));
            }
            if !seen.insert(&f.node) {
                return bad(format!("node {} has more than one fault", f.node));
            }
        }
        let budget = self.fault_budget.unwrap_or_else(|| max_faults(self.n_validators));
        if self.faults.len() > budget {
            return bad(format!("{} faults exceed the fault budget {budget}", self.faults.len()));
        }
        for p in &self.partitions {
            if p.from_time > p.to_time {
                return bad("partition from_time after to_time".into());
            }
            if let Some(n) = p.group_a.iter().chain(&p.group_b).find(|n| !ids.contains(*n)) {
                return bad(format!("partition names unknown node {n}"));
            }
        }
        if self.base_timeout_ms == Some(0) {
            return bad("base_timeout_ms must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    /// Committed block hashes per node, genesis first.
    pub chains: BTreeMap<String, Vec<Digest>>,
    pub heights: BTreeMap<String, u64>,
    pub state_digests: BTreeMap<String, Digest>,
    /// Messages sent, by kind.
    pub message_counts: BTreeMap<String, u64>,
    /// Messages sent, by node.
    pub sent_by_node: BTreeMap<String, u64>,
    /// Nodes without a declared fault.
    pub honest: Vec<String>,
    /// Round in which each block of the longest honest chain was decided.
    pub commit_rounds: Vec<u64>,
    pub injected_txs: usize,
    /// Injected transactions found in the longest honest chain.
    pub committed_txs: usize,
    /// Heights at which two honest nodes committed different blocks.
    pub safety_violations: Vec<u64>,
    /// Some live honest validator still holds a valid, uncommitted transaction.
    pub stalled: bool,
    pub end_time: u64,
}

impl SimulationReport {
    pub fn safe(&self) -> bool {
        self.safety_violations.is_empty()
    }

    /// Safety holds and `stalled` matches the expectation (false if unset).
    pub fn meets(&self, scenario: &Scenario) -> bool {
        self.safe() && self.stalled == scenario.expect_stalled.unwrap_or(false)
    }
}

#[derive(Debug)]
enum Event {
    Deliver { to: usize, msg: WireMessage },
    Timer { node: usize, deadline: u64 },
    Inject { tx: Transaction },
}

struct Sim<'a> {
    scenario: &'a Scenario,
    ids: Vec<String>,
    index: BTreeMap<String, usize>,
    nodes: Vec<NodeState>,
    behavior: Vec<Option<Behavior>>,
    queue: BinaryHeap<Reverse<(u64, u64)>>,
    events: BTreeMap<u64, Event>,
    seq: u64,
    rng: ChaCha8Rng,
    timers: Vec<Option<u64>>,
    /// Equivocators' alternative block per original hash.
    alternates: BTreeMap<Digest, Digest>,
    message_counts: BTreeMap<String, u64>,
    sent_by_node: Vec<u64>,
}

impl Sim<'_> {
    fn schedule(&mut self, at: u64, event: Event) {
        self.seq += 1;
        self.queue.push(Reverse((at, self.seq)));
        self.events.insert(self.seq, event);
    }

    fn is_down(&self, i: usize, now: u64) -> bool {
        matches!(self.behavior[i], Some(Behavior::Crash { at_time }) if now >= at_time)
    }

    fn partitioned(&self, now: u64, a: &str, b: &str) -> bool {
        self.scenario.partitions.iter().any(|p| {
            now >= p.from_time
                && now < p.to_time
                && ((p.group_a.iter().any(|x| x == a) && p.group_b.iter().any(|x| x == b))
                    || (p.group_b.iter().any(|x| x == a) && p.group_a.iter().any(|x| x == b)))
        })
    }

    fn step(&mut self, i: usize, now: u64, input: Input) {
        let out = self.nodes[i].step(now, input);
        if let Some(d) = self.nodes[i].timer_deadline {
            if self.timers[i] != Some(d) {
                self.timers[i] = Some(d);
                self.schedule(d, Event::Timer { node: i, deadline: d });
            }
        }
        self.dispatch(i, now, out.messages);
    }

    fn dispatch(&mut self, from: usize, now: u64, messages: Vec<Outgoing>) {
        if self.behavior[from] == Some(Behavior::Mute) {
            return;
        }
        for o in messages {
            let recipients: Vec<usize> = match &o.to {
                Target::All => (0..self.ids.len()).filter(|&j| j != from).collect(),
                Target::Node(id) => self.index.get(id).copied().into_iter().collect(),
            };
            let equivocating = self.behavior[from] == Some(Behavior::Equivocate);
            let alt = if equivocating { self.conflicting(from, &o.msg) } else { None };
            let half = recipients.len() / 2;
            for (k, to) in recipients.into_iter().enumerate() {
                let msg = match &alt {
                    Some(m) if k >= half => m.clone(),
                    _ => o.msg.clone(),
                };
                self.send(from, to, now, msg);
            }
        }
    }

    /// The variant an equivocating node sends to its second half of peers.
    fn conflicting(&mut self, from: usize, msg: &WireMessage) -> Option<WireMessage> {
        let WireMessage::Consensus(m) = msg else {
            return None;
        };
        match m.kind {
            MessageKind::PrePrepare => {
                let block = m.block.as_ref()?;
                let alt = self.alternate_block(from, block)?;
                self.alternates.insert(block.block_hash, alt.block_hash);
                Some(WireMessage::Consensus(ConsensusMessage::pre_prepare(m.height, m.round, alt, &m.sender)))
            }
            MessageKind::Prepare | MessageKind::Commit => {
                let hash = m.block_hash?;
                let other = self.alternates.get(&hash).copied().unwrap_or_else(|| sha256(&hash.0));
                Some(WireMessage::Consensus(ConsensusMessage::vote(m.kind, m.height, m.round, other, &m.sender)))
            }
            MessageKind::RoundChange => None,
        }
    }

    /// Same transactions with a shifted timestamp: valid, but a different hash.
    fn alternate_block(&self, from: usize, block: &Block) -> Option<Block> {
        let node = &self.nodes[from];
        let mut txs = block.transactions.clone();
        txs.first_mut()?.submitted_at += 1;
        let state = node.state();
        if state.height + 1 != block.height {
            return None;
        }
        let next = execute_transactions(state, block.height, &txs, &node.config().derive).ok()?;
        Some(Block::new(block.height, block.parent_hash, txs, block.proposer.clone(), block.round, next.digest()))
    }

    fn send(&mut self, from: usize, to: usize, now: u64, msg: WireMessage) {
        *self.message_counts.entry(msg.label().to_string()).or_default() += 1;
        self.sent_by_node[from] += 1;
        if self.partitioned(now, &self.ids[from], &self.ids[to]) {
            return;
        }
        let d = self.scenario.delay_model;
        let delay = self.rng.random_range(d.min_ms..=d.max_ms);
        self.schedule(now + delay, Event::Deliver { to, msg });
    }
}

/// Runs a scenario to `max_time` (or until nothing is left to happen).
pub fn run_simulation(scenario: &Scenario) -> Result<SimulationReport, ConsensusError> {
    scenario.validate()?;
    let validators = ValidatorSet::new((0..scenario.n_validators).map(validator_id).collect())?;
    let mut config = NodeConfig::default();
    if let Some(t) = scenario.base_timeout_ms {
        config.base_timeout_ms = t;
    }
    let ids = scenario.node_ids();
    let nodes: Vec<NodeState> = ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let role = if i < scenario.n_validators { Role::Validator } else { Role::Normal };
            NodeState::new(id.clone(), role, validators.clone(), config)
        })
        .collect();
    let behavior: Vec<Option<Behavior>> =
        ids.iter().map(|id| scenario.faults.iter().find(|f| &f.node == id).map(|f| f.behavior.clone())).collect();
    let n = ids.len();
    let mut sim = Sim {
        scenario,
        index: ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect(),
        ids,
        nodes,
        behavior,
        queue: BinaryHeap::new(),
        events: BTreeMap::new(),
        seq: 0,
        rng: ChaCha8Rng::seed_from_u64(scenario.seed),
        timers: vec![None; n],
        alternates: BTreeMap::new(),
        message_counts: BTreeMap::new(),
        sent_by_node: vec![0; n],
    };
    for item in &scenario.workload {
        sim.schedule(item.at, Event::Inject { tx: item.tx.clone() });
    }

    let mut end_time = 0;
    while let Some(Reverse((at, seq))) = sim.queue.pop() {
        if at > scenario.max_time {
            break;
        }
        end_time = at;
        let event = sim.events.remove(&seq).expect("every queued sequence has an event");
        match event {
            Event::Deliver { to, msg } => {
                if !sim.is_down(to, at) {
                    sim.step(to, at, Input::Message(msg));
                }
            }
            Event::Timer { node, deadline } => {
                if sim.timers[node] == Some(deadline) {
                    sim.timers[node] = None;
                }
                if !sim.is_down(node, at) && sim.nodes[node].timer_deadline == Some(deadline) {
                    sim.step(node, at, Input::Timeout);
                }
            }
            Event::Inject { tx } => {
                for v in 0..scenario.n_validators {
                    if !sim.is_down(v, at) {
                        sim.step(v, at, Input::Propose(vec![tx.clone()]));
                    }
                }
            }
        }
    }

    Ok(report(&sim, end_time))
}

fn report(sim: &Sim<'_>, end_time: u64) -> SimulationReport {
    let scenario = sim.scenario;
    let honest: Vec<usize> = (0..sim.ids.len()).filter(|&i| sim.behavior[i].is_none()).collect();

    let mut safety_violations = Vec::new();
    let max_len = sim.nodes.iter().map(|n| n.chain().len()).max().unwrap_or(0);
    for h in 0..max_len {
        let hashes: BTreeSet<Digest> =
            honest.iter().filter_map(|&i| sim.nodes[i].chain().get(h)).map(|b| b.block_hash).collect();
        if hashes.len() > 1 {
            safety_violations.push(h as u64);
        }
    }

    let reference: &[Block] = honest.iter().map(|&i| sim.nodes[i].chain()).max_by_key(|c| c.len()).unwrap_or(&[]);
    let committed_keys: BTreeSet<(String, u64)> =
        reference.iter().flat_map(|b| b.transactions.iter().map(Transaction::key)).collect();
    let injected: BTreeSet<(String, u64)> = scenario.workload.iter().map(|w| w.tx.key()).collect();

    let stalled =
        honest.iter().filter(|&&i| i < scenario.n_validators).any(|&i| !sim.nodes[i].pending_valid().is_empty());

    SimulationReport {
        chains: sim.nodes.iter().map(|n| (n.id.clone(), n.chain().iter().map(|b| b.block_hash).collect())).collect(),
        heights: sim.nodes.iter().map(|n| (n.id.clone(), n.tip().height)).collect(),
        state_digests: sim.nodes.iter().map(|n| (n.id.clone(), n.state().digest())).collect(),
        message_counts: sim.message_counts.clone(),
        sent_by_node: sim.ids.iter().cloned().zip(sim.sent_by_node.iter().copied()).collect(),
        honest: honest.iter().map(|&i| sim.ids[i].clone()).collect(),
        commit_rounds: reference.iter().skip(1).map(|b| b.round).collect(),
        injected_txs: injected.len(),
        committed_txs: injected.intersection(&committed_keys).count(),
        safety_violations,
        stalled,
        end_time,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(n: usize, txs: usize) -> Scenario {
        let workload = (0..txs)
            .map(|i| WorkloadItem { at: 10 * i as u64, tx: Transaction::register_user(format!("user{i}"), "x", 1) })
            .collect();
        Scenario {
            seed: 1,
            n_validators: n,
            n_normal: 1,
            faults: vec![],
            delay_model: DelayModel { min_ms: 5, max_ms: 50 },
            partitions: vec![],
            workload,
            max_time: 60_000,
            fault_budget: None,
            expect_stalled: None,
            base_timeout_ms: None,
        }
    }

    #[test]
    fn honest_cluster_agrees() {
        let r = run_simulation(&base(7, 10)).unwrap();
        assert!(r.safe());
        assert!(!r.stalled);
        assert_eq!(r.committed_txs, 10);
        let chains: BTreeSet<&Vec<Digest>> = r.chains.values().collect();
        assert_eq!(chains.len(), 1);
        assert_eq!(r.sent_by_node["n0"], 0);
    }

    #[test]
    fn deterministic() {
        let mut s = base(4, 5);
        s.faults = vec![Fault { node: "v1".into(), behavior: Behavior::Equivocate }];
        let a = serde_json::to_string(&run_simulation(&s).unwrap()).unwrap();
        let b = serde_json::to_string(&run_simulation(&s).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn crashed_leader_is_replaced() {
        let mut s = base(4, 1);
        // v1 leads height 1, round 0
        s.faults = vec![Fault { node: "v1".into(), behavior: Behavior::Crash { at_time: 0 } }];
        let r = run_simulation(&s).unwrap();
        assert!(r.safe() && !r.stalled);
        assert_eq!(r.committed_txs, 1);
        assert!(r.commit_rounds[0] >= 1 && r.commit_rounds[0] <= 2);
    }

    #[test]
    fn below_quorum_stalls() {
        let mut s = base(7, 3);
        s.fault_budget = Some(3);
        s.faults = (0..3).map(|i| Fault { node: validator_id(i), behavior: Behavior::Crash { at_time: 0 } }).collect();
        let r = run_simulation(&s).unwrap();
        assert!(r.stalled);
        assert!(r.heights.values().all(|&h| h == 0));
    }

    #[test]
    fn invalid_scenarios() {
        let mut s = base(7, 0);
        s.faults = (0..3).map(|i| Fault { node: validator_id(i), behavior: Behavior::Mute }).collect();
        assert!(matches!(run_simulation(&s), Err(ConsensusError::ScenarioInvalid(_))));
        let mut s = base(4, 0);
        s.faults = vec![Fault { node: "zz".into(), behavior: Behavior::Mute }];
        assert!(s.validate().is_err());
        assert!(Scenario::from_json("{\"seed\":1}").is_err());
    }

    #[test]
    fn healed_partition_catches_up() {
        let mut s = base(4, 4);
        s.partitions = vec![Partition {
            from_time: 0,
            to_time: 5_000,
            group_a: vec!["v3".into(), "n0".into()],
            group_b: vec!["v0".into(), "v1".into(), "v2".into()],
        }];
        s.workload.push(WorkloadItem { at: 8_000, tx: Transaction::register_user("late", "x", 1) });
        let r = run_simulation(&s).unwrap();
        assert!(r.safe() && !r.stalled);
        let chains: BTreeSet<&Vec<Digest>> = r.chains.values().collect();
        assert_eq!(chains.len(), 1);
    }
}
