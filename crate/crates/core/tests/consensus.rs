mod common;

use common::{adversarial, fault, scenario};
use phishlist::consensus::{max_faults, run_simulation, Behavior, Scenario};

fn bundled(name: &str) -> Scenario {
    let path = format!("{}/scenarios/{name}.json", env!("CARGO_MANIFEST_DIR"));
    Scenario::from_json(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn bundled_scenarios_meet_their_expectations() {
    for name in ["7-honest", "7-with-2-byzantine", "7-with-2-crashed", "7-with-3-crashed", "7-partition-heals"] {
        let s = bundled(name);
        let r = run_simulation(&s).unwrap();
        assert!(r.meets(&s), "{name}: {r:?}");
    }
}

#[test]
fn honest_chains_agree_under_adversaries() {
    for seed in 0..30 {
        let r = run_simulation(&adversarial(seed)).unwrap();
        assert!(r.safe(), "seed {seed}: {:?}", r.safety_violations);
        assert_eq!(r.committed_txs, r.injected_txs, "seed {seed}");
    }
}

#[test]
fn same_seed_same_report() {
    let s = adversarial(9);
    assert_eq!(run_simulation(&s).unwrap(), run_simulation(&s).unwrap());
}

#[test]
fn crashed_leader_is_replaced_in_four_node_cluster() {
    let mut s = scenario(3, vec![fault(1, Behavior::Crash { at_time: 0 })]);
    s.n_validators = 4;
    let r = run_simulation(&s).unwrap();
    assert!(r.safe());
    assert!(!r.stalled);
    assert_eq!(r.committed_txs, r.injected_txs);
    // height 1 is led by v1 in round 0
    assert!(r.commit_rounds[0] >= 1);
}

#[test]
fn three_crashes_stall_without_progress() {
    let faults = (0..3).map(|i| fault(i, Behavior::Crash { at_time: 0 })).collect();
    let mut s = scenario(5, faults);
    s.fault_budget = Some(3);
    let r = run_simulation(&s).unwrap();
    assert!(r.stalled);
    assert_eq!(r.committed_txs, 0);
    for id in &r.honest {
        assert_eq!(r.heights[id], 0, "{id}");
    }
}

#[test]
fn normal_nodes_follow_without_voting() {
    for seed in 0..10 {
        let mut s = adversarial(seed);
        s.n_normal = 3;
        let r = run_simulation(&s).unwrap();
        let longest =
            r.honest.iter().filter(|id| id.starts_with('v')).map(|id| &r.chains[id]).max_by_key(|c| c.len()).unwrap();
        for n in ["n0", "n1", "n2"] {
            let chain = &r.chains[n];
            assert_eq!(&longest[..chain.len()], &chain[..], "seed {seed} {n}");
        }
        // everything a normal node sends is a block request
        let from_normals: u64 = ["n0", "n1", "n2"].iter().map(|n| r.sent_by_node[*n]).sum();
        assert!(from_normals <= r.message_counts.get("BlockRequest").copied().unwrap_or(0));
    }
}

#[test]
fn crash_faults_settle_within_f_plus_one_rounds() {
    let f = max_faults(7) as u64;
    for seed in 0..20 {
        let faults = vec![
            fault((seed % 7) as usize, Behavior::Crash { at_time: 0 }),
            fault(((seed + 3) % 7) as usize, Behavior::Crash { at_time: seed * 20 }),
        ];
        let r = run_simulation(&scenario(seed, faults)).unwrap();
        assert!(!r.stalled);
        let worst = r.commit_rounds.iter().copied().max().unwrap_or(0);
        assert!(worst <= f + 1, "seed {seed}: round {worst}");
    }
}

#[test]
fn malformed_scenarios_are_rejected() {
    assert!(Scenario::from_json("{").is_err());
    let mut s = scenario(1, vec![fault(9, Behavior::Equivocate)]);
    assert!(run_simulation(&s).is_err());
    s.faults = (0..3).map(|i| fault(i, Behavior::Equivocate)).collect();
    assert!(run_simulation(&s).is_err(), "three faults exceed the default budget of two");
}
