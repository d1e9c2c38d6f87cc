//! Command-line front end. Exit codes: 0 success, 1 domain rejection or
//! failed expectation, 2 usage, config or connection error.

mod client;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::consensus::{run_simulation, ReplicaConfig, Scenario, SimulationReport};
use crate::node::NodeConfig;
use crate::truth::{run_bench, BenchReport, BenchSpec};

pub use client::{ApiClient, ClientError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Success = 0,
    Rejected = 1,
    Usage = 2,
}

impl From<Exit> for ExitCode {
    fn from(e: Exit) -> Self {
        ExitCode::from(e as u8)
    }
}

#[derive(Debug, Parser)]
#[command(name = "phishlist", version, about = "Decentralized phishing URL blacklist")]
pub struct Cli {
    /// Machine-readable JSON output.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a node from a config file, or an in-process local cluster.
    Node {
        #[arg(long, required_unless_present = "local_cluster", conflicts_with = "local_cluster")]
        config: Option<PathBuf>,
        /// Number of validators to run in this process.
        #[arg(long, value_name = "N")]
        local_cluster: Option<usize>,
        /// First HTTP address of the local cluster; node i uses port + i.
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
        /// Block logs for the local cluster, one subdirectory per node.
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
    /// Truth-discovery benchmark on synthetic data.
    Bench {
        /// Bench spec JSON; defaults apply when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Run a single seed instead of the spec's seed list.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a consensus fault scenario in the simulator.
    Sim {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Register a verifier.
    Register {
        #[arg(long, default_value = client::DEFAULT_API)]
        api: String,
        #[arg(long)]
        id: String,
        #[arg(long)]
        name: Option<String>,
    },
    /// Submit a suspected phishing URL with its evidence email.
    Submit {
        #[arg(long, default_value = client::DEFAULT_API)]
        api: String,
        #[arg(long)]
        sender: String,
        #[arg(long)]
        url: String,
        /// Evidence email text.
        #[arg(long, required_unless_present = "evidence_file", conflicts_with = "evidence_file")]
        evidence: Option<String>,
        #[arg(long)]
        evidence_file: Option<PathBuf>,
    },
    /// Vote on a submitted URL (by URL or url_id).
    Vote {
        #[arg(long, default_value = client::DEFAULT_API)]
        api: String,
        #[arg(long)]
        sender: String,
        /// URL or url_id.
        target: String,
        /// Phishing or NotPhishing.
        verdict: String,
    },
    /// Show a URL's record, score and timeline (by URL or url_id).
    Lookup {
        #[arg(long, default_value = client::DEFAULT_API)]
        api: String,
        target: String,
    },
    /// List blacklisted URLs.
    Blacklist {
        #[arg(long, default_value = client::DEFAULT_API)]
        api: String,
    },
}

/// Parses `args` and runs the command.
pub fn run<I, T>(args: I) -> Exit
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { Exit::Usage } else { Exit::Success };
        }
    };
    let json = cli.json;
    match cli.command {
        Command::Node { config, local_cluster, listen, data_dir } => cmd_node(config, local_cluster, listen, data_dir),
        Command::Bench { spec, seed } => cmd_bench(spec, seed, json),
        Command::Sim { scenario } => cmd_sim(scenario, json),
        Command::Register { api, id, name } => {
            let name = name.unwrap_or_else(|| id.clone());
            client::report(ApiClient::new(&api).register(&id, &name), json)
        }
        Command::Submit { api, sender, url, evidence, evidence_file } => {
            let evidence = match (evidence, evidence_file) {
                (Some(e), _) => e,
                (None, Some(path)) => match std::fs::read_to_string(&path) {
                    Ok(e) => e,
                    Err(e) => {
                        eprintln!("error: cannot read {}: {e}", path.display());
                        return Exit::Usage;
                    }
                },
                (None, None) => unreachable!("clap requires one of the two"),
            };
            client::report(ApiClient::new(&api).submit(&sender, &url, &evidence), json)
        }
        Command::Vote { api, sender, target, verdict } => client::cmd_vote(&api, &sender, &target, &verdict, json),
        Command::Lookup { api, target } => client::cmd_lookup(&api, &target, json),
        Command::Blacklist { api } => client::cmd_blacklist(&api, json),
    }
}

async fn ctrl_c() {
    let _ = tokio::signal::ctrl_c().await;
}

fn cmd_node(config: Option<PathBuf>, local: Option<usize>, listen: SocketAddr, data_dir: Option<PathBuf>) -> Exit {
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: cannot start runtime: {e}");
            return Exit::Usage;
        }
    };
    let result = if let Some(n) = local {
        if n == 0 {
            eprintln!("error: --local-cluster needs at least one node");
            return Exit::Usage;
        }
        let settings = crate::node::ConsensusSettings::default();
        runtime.block_on(crate::node::serve_local_cluster(
            n,
            listen,
            data_dir.as_deref(),
            ReplicaConfig::default(),
            settings.tick_ms,
            |addrs| {
                for (i, a) in addrs.iter().enumerate() {
                    println!("v{i} http://{a}");
                }
            },
            ctrl_c(),
        ))
    } else {
        let path = config.expect("clap requires --config without --local-cluster");
        let cfg = match NodeConfig::from_file(&path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return Exit::Usage;
            }
        };
        runtime.block_on(crate::node::serve(cfg, ctrl_c()))
    };
    match result {
        Ok(()) => Exit::Success,
        Err(crate::node::NodeError::Config(e)) => {
            eprintln!("error: {e}");
            Exit::Usage
        }
        Err(e) => {
            eprintln!("error: {e}");
            Exit::Rejected
        }
    }
}

pub fn load_bench_spec(path: Option<&std::path::Path>, seed: Option<u64>) -> Result<BenchSpec, String> {
    let mut spec = match path {
        None => BenchSpec::default(),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| format!("cannot read {}: {e}", p.display()))?;
            serde_json::from_str(&text).map_err(|e| format!("bench spec does not parse: {e}"))?
        }
    };
    if let Some(s) = seed {
        spec.seeds = vec![s];
    }
    spec.validate().map_err(|e| e.to_string())?;
    Ok(spec)
}

fn cmd_bench(spec: Option<PathBuf>, seed: Option<u64>, json: bool) -> Exit {
    let spec = match load_bench_spec(spec.as_deref(), seed) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return Exit::Usage;
        }
    };
    match run_bench(&spec) {
        Ok(report) => {
            print_bench(&report, json);
            Exit::Success
        }
        Err(e) => {
            eprintln!("error: {e}");
            Exit::Usage
        }
    }
}

fn print_bench(report: &BenchReport, json: bool) {
    if json {
        println!("{}", serde_json::to_string_pretty(report).expect("report serializes"));
        return;
    }
    print!("{}", report.table());
    let medians: Vec<String> = report.runs.iter().map(|r| format!("{}", r.median_votes_per_url)).collect();
    println!("\nseeds: {}  median votes/URL per seed: {}", report.runs.len(), medians.join(" "));
}

fn cmd_sim(path: PathBuf, json: bool) -> Exit {
    let scenario = match std::fs::read_to_string(&path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))
        .and_then(|t| Scenario::from_json(&t).map_err(|e| e.to_string()))
    {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return Exit::Usage;
        }
    };
    let report = match run_simulation(&scenario) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return Exit::Usage;
        }
    };
    if json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    } else {
        print_sim(&scenario, &report);
    }
    if report.meets(&scenario) {
        Exit::Success
    } else {
        Exit::Rejected
    }
}

fn print_sim(scenario: &Scenario, r: &SimulationReport) {
    println!("{:<6} {:>6} {:>8}  state_digest", "node", "height", "sent");
    for (id, h) in &r.heights {
        let mark = if r.honest.contains(id) { "" } else { " (faulty)" };
        println!("{:<6} {:>6} {:>8}  {}{}", id, h, r.sent_by_node[id], r.state_digests[id], mark);
    }
    println!();
    if r.safe() {
        println!("safety: ok");
    } else {
        println!("safety: VIOLATED at heights {:?}", r.safety_violations);
    }
    let expected = scenario.expect_stalled.unwrap_or(false);
    println!("stalled: {} (expected {})", r.stalled, expected);
    println!("committed transactions: {}/{}", r.committed_txs, r.injected_txs);
    let counts: Vec<String> = r.message_counts.iter().map(|(k, v)| format!("{k}={v}")).collect();
    println!("messages: {}", counts.join(" "));
    println!("end time: {} ms", r.end_time);
}
