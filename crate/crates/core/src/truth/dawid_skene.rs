//! Two-class Dawid-Skene estimator (EM over per-verifier confusion matrices).
//!
//! Class index 0 is `Phishing`, index 1 is `NotPhishing`; a confusion matrix
//! row is the true class and the column the reported verdict.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::votes::{Indexed, VoteMatrix};
use super::TruthError;
use crate::ledger::{UrlId, Verdict, VerifierId};

pub type Confusion = [[f64; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DawidSkeneParams {
    pub prior: f64,
    pub tol: f64,
    pub max_iter: u32,
}

impl Default for DawidSkeneParams {
    fn default() -> Self {
        DawidSkeneParams { prior: 0.5, tol: 1e-6, max_iter: 100 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DawidSkeneResult {
    /// P(Phishing) per URL.
    pub posteriors: BTreeMap<UrlId, f64>,
    pub confusions: BTreeMap<VerifierId, Confusion>,
    pub class_prior: f64,
    /// Smoothed log-likelihood (data term plus the Laplace pseudo-count
    /// term) after each M-step; EM never decreases it.
    pub log_likelihood: Vec<f64>,
    pub iterations: u32,
    pub converged: bool,
}

impl DawidSkeneResult {
    pub fn labels(&self) -> BTreeMap<UrlId, Verdict> {
        self.posteriors.iter().map(|(u, &p)| (u.clone(), Verdict::from_phishing(p > 0.5))).collect()
    }
}

fn class_of(verdict: Verdict) -> usize {
    if verdict.is_phishing() {
        0
    } else {
        1
    }
}

/// Posterior P(Phishing) for one item given each voter's verdict and
/// confusion matrix (the E-step for a single URL).
pub fn item_posterior(votes: &[(Verdict, Confusion)], prior_phishing: f64) -> f64 {
    let mut log_p = [prior_phishing.ln(), (1.0 - prior_phishing).ln()];
    for (verdict, c) in votes {
        let l = class_of(*verdict);
        log_p[0] += c[0][l].ln();
        log_p[1] += c[1][l].ln();
    }
    normalize_pair(log_p)[0]
}

fn normalize_pair(log_p: [f64; 2]) -> [f64; 2] {
    let m = log_p[0].max(log_p[1]);
    if m == f64::NEG_INFINITY {
        return [0.5, 0.5];
    }
    let a = (log_p[0] - m).exp();
    let b = (log_p[1] - m).exp();
    [a / (a + b), b / (a + b)]
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

pub fn dawid_skene(votes: &VoteMatrix, params: &DawidSkeneParams) -> Result<DawidSkeneResult, TruthError> {
    if votes.is_empty() {
        return Err(TruthError::EmptyInput);
    }
    if !(params.prior > 0.0 && params.prior < 1.0) || !(params.tol > 0.0) || params.max_iter == 0 {
        return Err(TruthError::InvalidParams("dawid_skene needs prior in (0,1), tol > 0, max_iter >= 1".into()));
    }
    let data = votes.indexed();
    let mut posteriors = majority_init(&data, params.prior);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut confusions = vec![[[0.5; 2]; 2]; data.verifiers.len()];
    let mut class_prior = params.prior;

    while iterations < params.max_iter {
        iterations += 1;
        (confusions, class_prior) = m_step(&data, &posteriors);
        trace.push(smoothed_log_likelihood(&data, &confusions, class_prior));
        let next = e_step(&data, &confusions, class_prior);
        let delta = posteriors.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        posteriors = next;
        if delta < params.tol {
            converged = true;
            break;
        }
    }

    Ok(DawidSkeneResult {
        posteriors: data.urls.iter().cloned().zip(posteriors).collect(),
        confusions: data.verifiers.iter().cloned().zip(confusions).collect(),
        class_prior,
        log_likelihood: trace,
        iterations,
        converged,
    })
}

fn majority_init(data: &Indexed, prior: f64) -> Vec<f64> {
    let mut balance = vec![0i64; data.urls.len()];
    for v in &data.votes {
        balance[v.item] += if v.phishing { 1 } else { -1 };
    }
    balance
        .into_iter()
        .map(|b| match b.cmp(&0) {
            std::cmp::Ordering::Greater => 1.0,
            std::cmp::Ordering::Less => 0.0,
            std::cmp::Ordering::Equal => prior,
        })
        .collect()
}

/// Laplace-smoothed confusion matrices and the class prior.
fn m_step(data: &Indexed, posteriors: &[f64]) -> (Vec<Confusion>, f64) {
    let mut counts = vec![[[1.0f64; 2]; 2]; data.verifiers.len()];
    for v in &data.votes {
        let p = posteriors[v.item];
        let l = if v.phishing { 0 } else { 1 };
        counts[v.worker][0][l] += p;
        counts[v.worker][1][l] += 1.0 - p;
    }
    let confusions = counts
        .into_iter()
        .map(|c| {
            let mut out = [[0.0; 2]; 2];
            for k in 0..2 {
                let row = c[k][0] + c[k][1];
                out[k] = [c[k][0] / row, c[k][1] / row];
            }
            out
        })
        .collect();
    let prior = posteriors.iter().sum::<f64>() / posteriors.len() as f64;
    (confusions, prior)
}

fn class_log_weights(data: &Indexed, confusions: &[Confusion], prior: f64) -> Vec<[f64; 2]> {
    let mut logs = vec![[prior.ln(), (1.0 - prior).ln()]; data.urls.len()];
    for v in &data.votes {
        let l = if v.phishing { 0 } else { 1 };
        let c = &confusions[v.worker];
        logs[v.item][0] += c[0][l].ln();
        logs[v.item][1] += c[1][l].ln();
    }
    logs
}

fn e_step(data: &Indexed, confusions: &[Confusion], prior: f64) -> Vec<f64> {
    class_log_weights(data, confusions, prior).into_iter().map(|lp| normalize_pair(lp)[0]).collect()
}

fn smoothed_log_likelihood(data: &Indexed, confusions: &[Confusion], prior: f64) -> f64 {
    let data_term: f64 =
        class_log_weights(data, confusions, prior).into_iter().map(|lp| log_sum_exp(lp[0], lp[1])).sum();
    let smoothing: f64 = confusions.iter().flat_map(|c| c.iter().flatten()).map(|x| x.ln()).sum();
    data_term + smoothing
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::truth::votes::VoteEntry;

    #[test]
    fn fixed_confusion_e_step() {
        let c = [[0.8, 0.2], [0.2, 0.8]];
        let p = item_posterior(&[(Verdict::Phishing, c); 3], 0.5);
        let expected = 0.8f64.powi(3) * 0.5 / (0.8f64.powi(3) * 0.5 + 0.2f64.powi(3) * 0.5);
        assert!((p - expected).abs() < 1e-12);
        assert!((p - 0.9846).abs() < 1e-4);
    }

    #[test]
    fn identity_confusion_is_certain() {
        let id = [[1.0, 0.0], [0.0, 1.0]];
        assert_eq!(item_posterior(&[(Verdict::Phishing, id)], 0.5), 1.0);
        assert_eq!(item_posterior(&[(Verdict::NotPhishing, id)], 0.5), 0.0);
    }

    #[test]
    fn empty_and_bad_params() {
        assert_eq!(dawid_skene(&VoteMatrix::default(), &DawidSkeneParams::default()), Err(TruthError::EmptyInput));
        let m = VoteMatrix::new(vec![VoteEntry {
            url_id: "u".into(),
            verifier_id: "a".into(),
            verdict: Verdict::Phishing,
            ordinal: 1,
        }])
        .unwrap();
        let bad = DawidSkeneParams { prior: 1.0, ..Default::default() };
        assert!(matches!(dawid_skene(&m, &bad), Err(TruthError::InvalidParams(_))));
    }
}
