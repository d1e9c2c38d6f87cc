//! Truth discovery: follower graph, PageRank reputation, rank-weighted
//! phish scores and skill points, plus the Dawid-Skene and GLAD baselines
//! and the evaluation harness.

pub mod bench;
pub mod dawid_skene;
pub mod eval;
pub mod glad;
pub mod graph;
pub mod pagerank;
pub mod score;
pub mod synthetic;
pub mod votes;

use thiserror::Error;

pub use bench::{run_bench, Algorithm, BenchReport, BenchSpec};
pub use dawid_skene::{dawid_skene, DawidSkeneParams, DawidSkeneResult};
pub use eval::{evaluate, majority_labels, rank_truth_discovery, EvaluationReport};
pub use glad::{glad, GladParams, GladResult};
pub use graph::{build_verifier_graph, Edge, VerifierGraph};
pub use pagerank::{pagerank, PageRankParams, RankVector};
pub use score::{phish_score, score_timeline, skill_points, skill_value, PhishScore, TimelinePoint, VoteTally};
pub use synthetic::generate_synthetic;
pub use votes::{GeneratorParams, LabeledDataset, VoteEntry, VoteMatrix};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TruthError {
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("no rank for verifier {0}")]
    MissingRank(String),
    #[error("no votes")]
    EmptyInput,
    #[error("gradient component is not finite")]
    NonFiniteGradient,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("predicted and truth label sets cover different URLs")]
    DomainMismatch,
    #[error("verifier {verifier_id} voted twice on {url_id}")]
    DuplicateVote { url_id: String, verifier_id: String },
    #[error("vote ordinals for {0} are not 1..k")]
    NonContiguousOrdinals(String),
    #[error("no ground truth for {0}")]
    MissingTruth(String),
}
