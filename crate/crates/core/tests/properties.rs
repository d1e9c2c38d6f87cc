use std::collections::BTreeMap;

use proptest::prelude::*;

use phishlist::consensus::{max_faults, quorum_size};
use phishlist::ledger::{normalize_url, try_apply, ChainState, Transaction, Verdict};
use phishlist::pipeline::{execute_transactions, DeriveParams};
use phishlist::truth::{
    build_verifier_graph, dawid_skene, pagerank, phish_score, skill_value, DawidSkeneParams, PhishScore, VerifierGraph,
    VoteEntry, VoteMatrix,
};

fn verdict() -> impl Strategy<Value = Verdict> {
    any::<bool>().prop_map(Verdict::from_phishing)
}

/// Random weighted digraph on `n` nodes named `v0..`.
fn graph() -> impl Strategy<Value = (usize, Vec<(usize, usize, u64)>)> {
    (1usize..12).prop_flat_map(|n| (Just(n), prop::collection::vec((0..n, 0..n, 1u64..5), 0..40)))
}

fn build(n: usize, edges: &[(usize, usize, u64)], name: impl Fn(usize) -> String) -> VerifierGraph {
    let mut g = VerifierGraph::new().with_nodes((0..n).map(&name));
    for &(a, b, w) in edges {
        g.add_edge(&name(a), &name(b), w);
    }
    g
}

/// Votes on `urls` URLs by up to `voters` verifiers, each verifier at most
/// once per URL, ordinals in order.
fn vote_matrix(urls: usize, voters: usize) -> impl Strategy<Value = VoteMatrix> {
    prop::collection::vec(prop::collection::vec((0..voters, verdict()), 1..voters + 1), 1..urls + 1).prop_map(
        |per_url| {
            let mut entries = Vec::new();
            for (u, votes) in per_url.into_iter().enumerate() {
                let mut seen = Vec::new();
                for (v, verdict) in votes {
                    if seen.contains(&v) {
                        continue;
                    }
                    seen.push(v);
                    entries.push(VoteEntry {
                        url_id: format!("u{u}"),
                        verifier_id: format!("w{v}"),
                        verdict,
                        ordinal: seen.len() as u32,
                    });
                }
            }
            VoteMatrix::new(entries).unwrap()
        },
    )
}

proptest! {
    #[test]
    fn transactions_round_trip(sender in "[a-z]{1,8}", nonce in 1u64..1000, at in 0u64..1_000_000, v in verdict()) {
        let mut tx = Transaction::cast_vote(sender, "ab".repeat(32), v, nonce);
        tx.submitted_at = at;
        let json = serde_json::to_string(&tx).unwrap();
        let back: Transaction = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(&back, &tx);
        prop_assert_eq!(back.tx_id(), tx.tx_id());
    }

    #[test]
    fn state_digest_ignores_registration_order(names in prop::collection::btree_set("[a-z]{1,6}", 1..8), seed in any::<u64>()) {
        let names: Vec<String> = names.into_iter().collect();
        let mut shuffled = names.clone();
        // deterministic rotation stands in for a shuffle
        let k = (seed as usize) % shuffled.len();
        shuffled.rotate_left(k);
        let params = DeriveParams::default();
        let run = |order: &[String]| {
            let mut s = ChainState::new();
            for n in order {
                s = execute_transactions(&s, s.height + 1, &[Transaction::register_user(n.clone(), n.clone(), 1)], &params).unwrap();
            }
            s.digest()
        };
        prop_assert_eq!(run(&names), run(&shuffled));
    }

    #[test]
    fn rejected_transactions_leave_state_alone(nonce in 2u64..50) {
        let mut s = ChainState::new();
        try_apply(&mut s, &Transaction::register_user("a", "A", 1)).unwrap();
        let before = s.clone();
        prop_assert!(try_apply(&mut s, &Transaction::register_user("a", "A", nonce)).is_err());
        prop_assert_eq!(s, before);
    }

    #[test]
    fn pagerank_is_a_distribution((n, edges) in graph()) {
        let g = build(n, &edges, |i| format!("v{i}"));
        let r = pagerank(&g, 0.85, 1e-9, 200).unwrap();
        prop_assert!(r.converged);
        prop_assert!((r.sum() - 1.0).abs() <= 1e-9);
        prop_assert!(r.ranks.values().all(|&x| x > 0.0));
    }

    #[test]
    fn pagerank_commutes_with_relabeling((n, edges) in graph(), shift in 0usize..12) {
        let g = build(n, &edges, |i| format!("v{i}"));
        // relabel i -> (i + shift) mod n, names chosen so sort order changes too
        let perm = |i: usize| format!("x{:02}", (i + shift) % n);
        let h = build(n, &edges, perm);
        let rg = pagerank(&g, 0.85, 1e-9, 200).unwrap();
        let rh = pagerank(&h, 0.85, 1e-9, 200).unwrap();
        for i in 0..n {
            let a = rg.get(&format!("v{i}")).unwrap();
            let b = rh.get(&perm(i)).unwrap();
            prop_assert!((a - b).abs() < 1e-8, "node {} : {} vs {}", i, a, b);
        }
    }

    #[test]
    fn pair_increments_per_url(k in 1usize..15) {
        let entries = (0..k)
            .map(|i| VoteEntry { url_id: "u".into(), verifier_id: format!("w{i}"), verdict: Verdict::Phishing, ordinal: i as u32 + 1 })
            .collect();
        let g = build_verifier_graph(&VoteMatrix::new(entries).unwrap());
        prop_assert_eq!(g.total_weight() as usize, k * (k - 1) / 2);
        prop_assert_eq!(g.node_count(), k);
    }

    #[test]
    fn score_bounds_and_monotonicity(
        votes in prop::collection::vec((0.001f64..1.0, verdict()), 3..12),
        extra in 0.001f64..1.0,
        scale in 0.01f64..100.0,
    ) {
        let ranks: BTreeMap<String, f64> =
            votes.iter().enumerate().map(|(i, (r, _))| (format!("w{i}"), *r)).chain([("z".to_string(), extra)]).collect();
        let ids: Vec<String> = (0..votes.len()).map(|i| format!("w{i}")).collect();
        let seq = || ids.iter().map(String::as_str).zip(votes.iter().map(|(_, v)| *v));
        let base = phish_score(&ranks, seq()).unwrap().value().unwrap();
        prop_assert!((-1.0..=1.0).contains(&base));

        let with = |v: Verdict| phish_score(&ranks, seq().chain([("z", v)])).unwrap().value().unwrap();
        if base < 1.0 {
            prop_assert!(with(Verdict::Phishing) > base);
        }
        if base > -1.0 {
            prop_assert!(with(Verdict::NotPhishing) < base);
        }

        let scaled: BTreeMap<String, f64> = ranks.iter().map(|(k, v)| (k.clone(), v * scale)).collect();
        let s = phish_score(&scaled, seq()).unwrap().value().unwrap();
        prop_assert!((s - base).abs() < 1e-12);
    }

    #[test]
    fn fewer_than_three_votes_are_unscored(n in 0usize..3) {
        let ranks: BTreeMap<String, f64> = (0..n).map(|i| (format!("w{i}"), 0.5)).collect();
        let s = phish_score(&ranks, ranks.keys().map(|k| (k.as_str(), Verdict::Phishing))).unwrap();
        prop_assert_eq!(s, PhishScore::Insufficient);
    }

    #[test]
    fn dawid_skene_never_decreases_likelihood(votes in vote_matrix(30, 8)) {
        let res = dawid_skene(&votes, &DawidSkeneParams::default()).unwrap();
        for w in res.log_likelihood.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9, "{} then {}", w[0], w[1]);
        }
        prop_assert!(res.posteriors.values().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn skill_is_monotone(rank in 0.0f64..=1.0, cast in 1u32..100, correct in 0u32..100) {
        let correct = correct.min(cast - 1);
        let lo = skill_value(rank, correct as f64 / cast as f64);
        let hi = skill_value(rank, (correct + 1) as f64 / cast as f64);
        prop_assert!(hi >= lo);
        prop_assert!(hi <= 200);
    }

    #[test]
    fn normalization_is_idempotent(
        scheme in "(http|https|HTTP|Https)",
        host in "[a-zA-Z]{1,10}\\.(com|org|NET)",
        port in prop::option::of(1u16..65535),
        path in "(/[a-zA-Z0-9_.-]{0,8}){0,3}",
        query in prop::option::of("[a-z]{1,4}=[A-Za-z0-9]{0,4}"),
    ) {
        let port = port.map(|p| format!(":{p}")).unwrap_or_default();
        let query = query.map(|q| format!("?{q}")).unwrap_or_default();
        let raw = format!("{scheme}://{host}{port}{path}{query}");
        let once = normalize_url(&raw).unwrap();
        prop_assert_eq!(normalize_url(&once).unwrap(), once.clone());
        prop_assert!(once.starts_with(&scheme.to_ascii_lowercase()));
    }

    #[test]
    fn quorum_bounds(n in 1usize..200) {
        let q = quorum_size(n).unwrap();
        let f = max_faults(n);
        prop_assert!(3 * f < n);
        // a quorum survives f silent validators
        prop_assert!(q <= n - f);
    }

    #[test]
    fn quorums_intersect_in_an_honest_node(f in 0usize..60) {
        // only guaranteed at n = 3f + 1; other sizes get the same quorum
        let n = 3 * f + 1;
        prop_assert_eq!(max_faults(n), f);
        prop_assert!(2 * quorum_size(n).unwrap() > n + f);
    }
}
