//! Labeling strategies and the accuracy/precision/recall report.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::graph::build_verifier_graph;
use super::pagerank::{pagerank_with, PageRankParams, RankVector};
use super::score::{phish_score, PhishScore};
use super::votes::VoteMatrix;
use super::TruthError;
use crate::ledger::{UrlId, Verdict};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub algorithm: String,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Phishing is the positive class. Precision and recall are 1.0 when their
/// denominator is zero.
pub fn evaluate(
    algorithm: &str,
    predicted: &BTreeMap<UrlId, Verdict>,
    truth: &BTreeMap<UrlId, Verdict>,
) -> Result<EvaluationReport, TruthError> {
    if predicted.len() != truth.len() || predicted.keys().zip(truth.keys()).any(|(a, b)| a != b) {
        return Err(TruthError::DomainMismatch);
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0u64, 0u64, 0u64, 0u64);
    for (url, actual) in truth {
        match (predicted[url].is_phishing(), actual.is_phishing()) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let ratio = |num: u64, den: u64| if den == 0 { 1.0 } else { num as f64 / den as f64 };
    let total = tp + fp + tn + fn_;
    Ok(EvaluationReport {
        algorithm: algorithm.to_string(),
        accuracy: if total == 0 { 1.0 } else { (tp + tn) as f64 / total as f64 },
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fn_),
    })
}

/// Unweighted vote: Phishing iff strictly more Phishing than NotPhishing votes.
pub fn majority_labels(votes: &VoteMatrix) -> BTreeMap<UrlId, Verdict> {
    votes
        .sequences()
        .map(|(url, seq)| {
            let balance: i64 = seq.iter().map(|v| if v.verdict.is_phishing() { 1 } else { -1 }).sum();
            (url.clone(), Verdict::from_phishing(balance > 0))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankLabeling {
    pub ranks: RankVector,
    pub scores: BTreeMap<UrlId, PhishScore>,
}

impl RankLabeling {
    /// Labels every URL; URLs below the vote threshold fall back to the sign
    /// of their rank-weighted balance (same formula, no threshold).
    pub fn labels(&self, votes: &VoteMatrix) -> BTreeMap<UrlId, Verdict> {
        votes
            .sequences()
            .map(|(url, seq)| {
                let label = match self.scores[url] {
                    PhishScore::Scored(s) => Verdict::from_phishing(s > 0.0),
                    PhishScore::Insufficient => {
                        let bal: f64 = seq
                            .iter()
                            .map(|v| {
                                let r = self.ranks.get(&v.verifier_id).unwrap_or(0.0);
                                if v.verdict.is_phishing() {
                                    r
                                } else {
                                    -r
                                }
                            })
                            .sum();
                        Verdict::from_phishing(bal > 0.0)
                    }
                };
                (url.clone(), label)
            })
            .collect()
    }
}

/// Follower graph, PageRank, then the rank-weighted score for every URL.
pub fn rank_truth_discovery(votes: &VoteMatrix, params: &PageRankParams) -> Result<RankLabeling, TruthError> {
    let graph = build_verifier_graph(votes);
    let ranks = pagerank_with(&graph, params)?;
    let scores = votes
        .sequences()
        .map(|(url, seq)| {
            let s = phish_score(&ranks.ranks, seq.iter().map(|v| (v.verifier_id.as_str(), v.verdict)))?;
            Ok((url.clone(), s))
        })
        .collect::<Result<_, TruthError>>()?;
    Ok(RankLabeling { ranks, scores })
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub algorithm: String,
    pub runs: usize,
    pub accuracy: (f64, f64),
    pub precision: (f64, f64),
    pub recall: (f64, f64),
}

impl AggregateRow {
    pub fn from_reports(algorithm: &str, reports: &[EvaluationReport]) -> Self {
        let col = |f: fn(&EvaluationReport) -> f64| mean_std(&reports.iter().map(f).collect::<Vec<_>>());
        AggregateRow {
            algorithm: algorithm.to_string(),
            runs: reports.len(),
            accuracy: col(|r| r.accuracy),
            precision: col(|r| r.precision),
            recall: col(|r| r.recall),
        }
    }
}

/// `Algorithm | Acc. | Prec. | Rec.` table with percentages.
pub fn format_table(rows: &[AggregateRow]) -> String {
    let cell = |(m, s): (f64, f64), runs: usize| {
        if runs > 1 {
            format!("{:.2}% ± {:.2}", 100.0 * m, 100.0 * s)
        } else {
            format!("{:.2}%", 100.0 * m)
        }
    };
    let body: Vec<[String; 4]> = rows
        .iter()
        .map(|r| [r.algorithm.clone(), cell(r.accuracy, r.runs), cell(r.precision, r.runs), cell(r.recall, r.runs)])
        .collect();
    let header = ["Algorithm".to_string(), "Acc.".to_string(), "Prec.".to_string(), "Rec.".to_string()];
    let mut widths = header.clone().map(|h| h.chars().count());
    for row in &body {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: &[String; 4]| {
        let parts: Vec<String> =
            cells.iter().zip(widths).map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count()))).collect();
        let _ = writeln!(out, "| {} |", parts.join(" | "));
    };
    line(&mut out, &header);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    let _ = writeln!(out, "|-{}-|", rule.join("-|-"));
    for row in &body {
        line(&mut out, row);
    }
    out
}
