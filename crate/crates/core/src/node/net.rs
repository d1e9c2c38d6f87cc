//! Networked runtime: one node per process, peers reached over HTTP.

use std::collections::BTreeMap;
use std::future::Future;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::mpsc;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use super::cluster::LocalCluster;
use super::config::{NodeConfig, Peer};
use super::http::{router, Backend, ClusterMember, INTERNAL_MESSAGES_PATH};
use super::service::{Accepted, Node, Snapshot, SnapshotCell, WriteRequest};
use super::{ApiError, NodeError};
use crate::consensus::{Outgoing, ReplicaConfig, Target, WireMessage};

const PEER_TIMEOUT: Duration = Duration::from_secs(2);

/// A node plus one sender thread per peer. Logical time is milliseconds
/// since start.
pub struct NetworkNode {
    node: Mutex<Node>,
    outboxes: BTreeMap<String, mpsc::Sender<WireMessage>>,
    snapshot: SnapshotCell,
    start: Instant,
}

impl NetworkNode {
    pub fn start(node: Node, peers: &[Peer]) -> Arc<Self> {
        let agent: ureq::Agent = ureq::Agent::config_builder().timeout_global(Some(PEER_TIMEOUT)).build().into();
        let mut outboxes = BTreeMap::new();
        for peer in peers {
            let (tx, rx) = mpsc::channel::<WireMessage>();
            let url = format!("http://{}{}", peer.address, INTERNAL_MESSAGES_PATH);
            let agent = agent.clone();
            let id = peer.id.clone();
            std::thread::spawn(move || {
                for msg in rx {
                    if let Err(e) = agent.post(&url).send_json(&msg) {
                        log::debug!("send {} to {id} failed: {e}", msg.label());
                    }
                }
            });
            outboxes.insert(peer.id.clone(), tx);
        }
        let snapshot = node.snapshot_cell();
        Arc::new(NetworkNode { node: Mutex::new(node), outboxes, snapshot, start: Instant::now() })
    }

    fn now(&self) -> u64 {
        self.start.elapsed().as_millis() as u64
    }

    fn route(&self, out: Vec<Outgoing>) {
        for o in out {
            match o.to {
                Target::All => {
                    for tx in self.outboxes.values() {
                        let _ = tx.send(o.msg.clone());
                    }
                }
                Target::Node(id) => {
                    if let Some(tx) = self.outboxes.get(&id) {
                        let _ = tx.send(o.msg);
                    }
                }
            }
        }
    }

    pub fn tick(&self) -> Result<(), NodeError> {
        let out = self.node.lock().map_err(|_| NodeError::Poisoned)?.tick(self.now())?;
        self.route(out);
        Ok(())
    }
}

impl Backend for NetworkNode {
    fn submit(&self, req: WriteRequest) -> Result<Accepted, ApiError> {
        let (acc, out) = self.node.lock().map_err(|_| ApiError::NotReady)?.submit(self.now(), req)?;
        self.route(out);
        Ok(acc)
    }

    fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.get()
    }

    fn deliver(&self, msg: WireMessage) -> Result<(), ApiError> {
        let out = self
            .node
            .lock()
            .map_err(|_| ApiError::NotReady)?
            .handle(self.now(), msg)
            .map_err(|e| ApiError::Internal(e.to_string()))?;
        self.route(out);
        Ok(())
    }
}

/// Runs a node from its config until `shutdown` resolves.
pub async fn serve(cfg: NodeConfig, shutdown: impl Future<Output = ()> + Send + 'static) -> Result<(), NodeError> {
    let node = Node::from_config(&cfg)?;
    let peers = cfg.peers()?;
    let net = NetworkNode::start(node, &peers);
    let listener = tokio::net::TcpListener::bind(&cfg.listen_address).await?;
    log::info!("{} ({:?}) listening on {}", cfg.node_id, cfg.role, listener.local_addr()?);

    let ticker = net.clone();
    let tick = Duration::from_millis(cfg.consensus.tick_ms);
    let ticking = tokio::spawn(async move {
        let mut interval = tokio::time::interval(tick);
        loop {
            interval.tick().await;
            if let Err(e) = ticker.tick() {
                log::error!("consensus tick failed: {e}");
            }
        }
    });
    let app = router(net);
    let served = axum::serve(listener, app).with_graceful_shutdown(shutdown).await;
    ticking.abort();
    served.map_err(NodeError::from)
}

/// Runs `n` validators in-process on the simulated transport, node `i`
/// serving HTTP on `base.port() + i`. Returns the bound addresses through
/// `on_ready` before serving.
pub async fn serve_local_cluster(
    n: usize,
    base: SocketAddr,
    data_root: Option<&Path>,
    config: ReplicaConfig,
    tick_ms: u64,
    on_ready: impl FnOnce(&[SocketAddr]),
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), NodeError> {
    let cluster = Arc::new(Mutex::new(LocalCluster::new(n, 0, config, data_root)?));
    let mut listeners = Vec::new();
    for i in 0..n {
        let mut addr = base;
        if base.port() != 0 {
            addr.set_port(base.port() + i as u16);
        }
        listeners.push(tokio::net::TcpListener::bind(addr).await?);
    }
    let addrs: Vec<SocketAddr> = listeners.iter().map(|l| l.local_addr()).collect::<Result<_, _>>()?;
    on_ready(&addrs);

    let start = Instant::now();
    let ticker = cluster.clone();
    let ticking = tokio::spawn(async move {
        let mut interval = tokio::time::interval(Duration::from_millis(tick_ms));
        loop {
            interval.tick().await;
            let now = start.elapsed().as_millis() as u64;
            let result = match ticker.lock() {
                Ok(mut c) => c.advance_to(now),
                Err(_) => break,
            };
            if let Err(e) = result {
                log::error!("cluster tick failed: {e}");
            }
        }
    });

    let (stop_tx, _) = tokio::sync::broadcast::channel::<()>(1);
    let mut servers = Vec::new();
    for (i, listener) in listeners.into_iter().enumerate() {
        let app = router(Arc::new(ClusterMember::new(cluster.clone(), i)));
        let mut stop = stop_tx.subscribe();
        servers.push(tokio::spawn(async move {
            axum::serve(listener, app)
                .with_graceful_shutdown(async move {
                    let _ = stop.recv().await;
                })
                .await
        }));
    }
    shutdown.await;
    let _ = stop_tx.send(());
    for s in servers {
        s.await.map_err(|e| NodeError::Io(std::io::Error::other(e)))??;
    }
    ticking.abort();
    Ok(())
}
