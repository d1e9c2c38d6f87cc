//! Benchmark harness: synthetic datasets, every algorithm, aggregated rows.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::dawid_skene::{dawid_skene, DawidSkeneParams};
use super::eval::{evaluate, format_table, majority_labels, rank_truth_discovery, AggregateRow, EvaluationReport};
use super::glad::{glad, GladParams};
use super::pagerank::PageRankParams;
use super::synthetic::generate_synthetic;
use super::votes::GeneratorParams;
use super::TruthError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Pagerank,
    Em,
    Glad,
    Majority,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Pagerank, Algorithm::Em, Algorithm::Glad, Algorithm::Majority];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Pagerank => "pagerank",
            Algorithm::Em => "em",
            Algorithm::Glad => "glad",
            Algorithm::Majority => "majority",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL.into_iter().find(|a| a.name() == s).ok_or_else(|| format!("unknown algorithm {s:?}"))
    }
}

fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}

fn default_algorithms() -> Vec<Algorithm> {
    vec![Algorithm::Pagerank, Algorithm::Em, Algorithm::Glad]
}

/// Generator parameters (the per-dataset seed comes from `seeds`) plus the
/// algorithms to compare.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSpec {
    #[serde(flatten)]
    pub generator: GeneratorParams,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub pagerank: PageRankParams,
    #[serde(default)]
    pub em: DawidSkeneParams,
    #[serde(default)]
    pub glad: GladParams,
}

impl Default for BenchSpec {
    fn default() -> Self {
        BenchSpec {
            generator: GeneratorParams::default(),
            algorithms: default_algorithms(),
            seeds: default_seeds(),
            pagerank: PageRankParams::default(),
            em: DawidSkeneParams::default(),
            glad: GladParams::default(),
        }
    }
}

impl BenchSpec {
    pub fn validate(&self) -> Result<(), TruthError> {
        if self.algorithms.is_empty() {
            return Err(TruthError::InvalidParams("at least one algorithm is required".into()));
        }
        if self.seeds.is_empty() {
            return Err(TruthError::InvalidParams("at least one seed is required".into()));
        }
        self.generator.validate()
    }

    /// Requested algorithms plus majority vote, deduplicated, in table order.
    pub fn rows(&self) -> Vec<Algorithm> {
        let mut algos = self.algorithms.clone();
        algos.push(Algorithm::Majority);
        algos.sort();
        algos.dedup();
        algos
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub median_votes_per_url: f64,
    pub reports: Vec<EvaluationReport>,
    /// EM smoothed log-likelihood never dropped by more than 1e-9 per step.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub em_monotone: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pagerank_converged: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<AggregateRow>,
    pub runs: Vec<SeedRun>,
}

impl BenchReport {
    pub fn table(&self) -> String {
        format_table(&self.rows)
    }

    pub fn row(&self, algorithm: Algorithm) -> Option<&AggregateRow> {
        self.rows.iter().find(|r| r.algorithm == algorithm.name())
    }

    /// Per-seed accuracies of one algorithm, in seed order.
    pub fn accuracies(&self, algorithm: Algorithm) -> Vec<f64> {
        self.runs
            .iter()
            .filter_map(|run| run.reports.iter().find(|r| r.algorithm == algorithm.name()).map(|r| r.accuracy))
            .collect()
    }
}

pub fn run_bench(spec: &BenchSpec) -> Result<BenchReport, TruthError> {
    spec.validate()?;
    let algos = spec.rows();
    let mut runs = Vec::with_capacity(spec.seeds.len());
    let mut per_algo: BTreeMap<Algorithm, Vec<EvaluationReport>> = BTreeMap::new();

    for &seed in &spec.seeds {
        let ds = generate_synthetic(&GeneratorParams { seed, ..spec.generator.clone() })?;
        let mut counts: Vec<usize> = ds.votes.sequences().map(|(_, s)| s.len()).collect();
        counts.sort_unstable();
        let median = median_sorted(&counts);

        let mut run = SeedRun {
            seed,
            median_votes_per_url: median,
            reports: Vec::new(),
            em_monotone: None,
            pagerank_converged: None,
        };
        for &algo in &algos {
            let predicted = match algo {
                Algorithm::Pagerank => {
                    let labeling = rank_truth_discovery(&ds.votes, &spec.pagerank)?;
                    run.pagerank_converged = Some(labeling.ranks.converged);
                    labeling.labels(&ds.votes)
                }
                Algorithm::Em => {
                    let res = dawid_skene(&ds.votes, &spec.em)?;
                    run.em_monotone = Some(res.log_likelihood.windows(2).all(|w| w[1] >= w[0] - 1e-9));
                    res.labels()
                }
                Algorithm::Glad => glad(&ds.votes, &GladParams { seed, ..spec.glad })?.labels(),
                Algorithm::Majority => majority_labels(&ds.votes),
            };
            let report = evaluate(algo.name(), &predicted, &ds.truth)?;
            per_algo.entry(algo).or_default().push(report.clone());
            run.reports.push(report);
        }
        runs.push(run);
    }

    let rows = algos.iter().map(|a| AggregateRow::from_reports(a.name(), &per_algo[a])).collect();
    Ok(BenchReport { rows, runs })
}

fn median_sorted(xs: &[usize]) -> f64 {
    match xs.len() {
        0 => 0.0,
        n if n % 2 == 1 => xs[n / 2] as f64,
        n => (xs[n / 2 - 1] + xs[n / 2]) as f64 / 2.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_json_defaults() {
        let spec: BenchSpec = serde_json::from_str(
            r#"{"n_urls":100,"n_verifiers":10,"phish_fraction":0.5,"reliability_mean":0.9,
                "reliability_spread":0.05,"participation_exponent":2.0,"min_votes":3,"seed":0}"#,
        )
        .unwrap();
        assert_eq!(spec.seeds.len(), 10);
        assert_eq!(spec.rows(), Algorithm::ALL.to_vec());
    }

    #[test]
    fn empty_algorithms_rejected() {
        let spec = BenchSpec { algorithms: vec![], ..Default::default() };
        assert!(matches!(run_bench(&spec), Err(TruthError::InvalidParams(_))));
        let spec = BenchSpec { seeds: vec![], ..Default::default() };
        assert!(matches!(run_bench(&spec), Err(TruthError::InvalidParams(_))));
    }
}
