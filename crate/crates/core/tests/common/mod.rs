//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::Path;
use std::sync::{mpsc, Arc, Mutex};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use phishlist::consensus::{Behavior, DelayModel, Fault, Partition, ReplicaConfig, Scenario, WorkloadItem};
use phishlist::ledger::{url_id, Transaction, Verdict};
use phishlist::node::{router, ClusterMember, LocalCluster};
use phishlist::truth::glad::{expected_log_likelihood, gradient, posteriors, GladModel, VoteTriple};

pub const PHISH_URL: &str = "http://paypa1-secure.example/login";

/// Six registrations, one submission and five votes, spread over 300 ms.
pub fn workload() -> Vec<WorkloadItem> {
    let mut wl: Vec<WorkloadItem> = (0..6)
        .map(|i| WorkloadItem { at: 10 * i, tx: Transaction::register_user(format!("u{i}"), format!("User {i}"), 1) })
        .collect();
    wl.push(WorkloadItem {
        at: 60,
        tx: Transaction::submit_url("u0", PHISH_URL, format!("Dear customer, verify at {PHISH_URL}"), 2),
    });
    let id = url_id(PHISH_URL).unwrap();
    for i in 1..6u64 {
        let verdict = Verdict::from_phishing(i % 2 == 1);
        wl.push(WorkloadItem { at: 100 + 40 * i, tx: Transaction::cast_vote(format!("u{i}"), id.clone(), verdict, 2) });
    }
    wl
}

pub fn scenario(seed: u64, faults: Vec<Fault>) -> Scenario {
    Scenario {
        seed,
        n_validators: 7,
        n_normal: 1,
        faults,
        delay_model: DelayModel { min_ms: 1, max_ms: 50 },
        partitions: Vec::new(),
        workload: workload(),
        max_time: 120_000,
        fault_budget: None,
        expect_stalled: None,
        base_timeout_ms: None,
    }
}

pub fn fault(node: usize, behavior: Behavior) -> Fault {
    Fault { node: format!("v{node}"), behavior }
}

/// Seeded mix of up to two Equivocate or Crash faults, wider delay ranges
/// and an occasional partition that heals.
pub fn adversarial(seed: u64) -> Scenario {
    let a = (seed % 7) as usize;
    let b = (a + 1 + (seed / 7) as usize % 6) % 7;
    let pick = |k: u64| match k % 3 {
        0 => Behavior::Equivocate,
        1 => Behavior::Crash { at_time: seed * 37 % 400 },
        _ => Behavior::Crash { at_time: 0 },
    };
    let faults = match seed % 4 {
        0 => vec![],
        1 => vec![fault(a, pick(seed))],
        _ => vec![fault(a, pick(seed)), fault(b, pick(seed / 3 + 1))],
    };
    let mut s = scenario(seed, faults);
    s.delay_model = DelayModel { min_ms: 1, max_ms: 10 + seed % 300 };
    if seed.is_multiple_of(5) {
        let cut = (seed as usize + 2) % 7;
        s.partitions.push(Partition {
            from_time: 0,
            to_time: 2000 + seed * 10,
            group_a: vec![format!("v{cut}"), "n0".into()],
            group_b: (0..7).filter(|&i| i != cut).map(|i| format!("v{i}")).collect(),
        });
    }
    s
}

/// A local cluster with one HTTP server per node on ephemeral ports.
/// Servers stop when this is dropped.
pub struct Served {
    pub urls: Vec<String>,
    pub cluster: Arc<Mutex<LocalCluster>>,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl Drop for Served {
    fn drop(&mut self) {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

pub fn serve_cluster(n_validators: usize, n_normal: usize, data_root: Option<&Path>) -> Served {
    let cluster = LocalCluster::new(n_validators, n_normal, ReplicaConfig::default(), data_root).unwrap();
    let cluster = Arc::new(Mutex::new(cluster));
    let (addr_tx, addr_rx) = mpsc::channel::<Vec<SocketAddr>>();
    let (stop_tx, stop_rx) = tokio::sync::oneshot::channel::<()>();
    let shared = cluster.clone();
    let thread = std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let n = shared.lock().unwrap().len();
            let mut addrs = Vec::new();
            let (done_tx, _) = tokio::sync::broadcast::channel::<()>(1);
            for i in 0..n {
                let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
                addrs.push(listener.local_addr().unwrap());
                let app = router(Arc::new(ClusterMember::new(shared.clone(), i)));
                let mut done = done_tx.subscribe();
                tokio::spawn(async move {
                    axum::serve(listener, app)
                        .with_graceful_shutdown(async move {
                            let _ = done.recv().await;
                        })
                        .await
                        .unwrap();
                });
            }
            addr_tx.send(addrs).unwrap();
            let _ = stop_rx.await;
            let _ = done_tx.send(());
        });
    });
    let urls = addr_rx.recv().unwrap().into_iter().map(|a| format!("http://{a}")).collect();
    Served { urls, cluster, stop: Some(stop_tx), thread: Some(thread) }
}

/// Random small GLAD model, votes and the matching posteriors.
pub fn glad_instance(rng: &mut ChaCha8Rng) -> (GladModel, Vec<VoteTriple>, Vec<f64>) {
    let (n_items, n_workers) = (rng.random_range(2..8), rng.random_range(2..6));
    let model = GladModel {
        alpha: (0..n_workers).map(|_| rng.random_range(-2.0..3.0)).collect(),
        beta: (0..n_items).map(|_| rng.random_range(-1.0..1.0)).collect(),
    };
    let mut votes = Vec::new();
    for i in 0..n_items {
        for j in 0..n_workers {
            if rng.random_bool(0.7) {
                votes.push((i, j, rng.random_bool(0.5)));
            }
        }
    }
    let post = posteriors(&model, &votes, n_items);
    (model, votes, post)
}

/// Largest relative error between the analytic gradient and central
/// differences of the M-step objective.
pub fn glad_gradient_error(model: &GladModel, votes: &[VoteTriple], post: &[f64]) -> f64 {
    const H: f64 = 1e-5;
    let (ga, gb) = gradient(model, votes, post);
    let mut worst = 0.0f64;
    let mut check = |analytic: f64, numeric: f64| {
        let scale = analytic.abs().max(numeric.abs());
        if scale > 1e-8 {
            worst = worst.max((analytic - numeric).abs() / scale);
        }
    };
    let central = |up: &GladModel, down: &GladModel| {
        (expected_log_likelihood(up, votes, post) - expected_log_likelihood(down, votes, post)) / (2.0 * H)
    };
    for (j, &analytic) in ga.iter().enumerate() {
        let (mut up, mut down) = (model.clone(), model.clone());
        up.alpha[j] += H;
        down.alpha[j] -= H;
        check(analytic, central(&up, &down));
    }
    for (i, &analytic) in gb.iter().enumerate() {
        let (mut up, mut down) = (model.clone(), model.clone());
        up.beta[i] += H;
        down.beta[i] -= H;
        check(analytic, central(&up, &down));
    }
    worst
}
