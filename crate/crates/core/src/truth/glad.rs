//! GLAD: verifier ability `alpha` and URL difficulty `beta`.
//!
//! A verifier answers correctly with probability `sigmoid(alpha * exp(beta))`.
//! EM alternates Bayes posteriors (class prior 0.5) with gradient ascent on
//! the expected complete-data log-likelihood.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::votes::{Indexed, IndexedVote, VoteMatrix};
use super::TruthError;
use crate::ledger::{UrlId, Verdict, VerifierId};

/// Gradient steps per M-step.
pub const INNER_STEPS: u32 = 25;
const JITTER: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GladParams {
    pub learning_rate: f64,
    pub iters: u32,
    pub seed: u64,
}

impl Default for GladParams {
    fn default() -> Self {
        GladParams { learning_rate: 0.5, iters: 30, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GladResult {
    pub posteriors: BTreeMap<UrlId, f64>,
    pub abilities: BTreeMap<VerifierId, f64>,
    /// `beta` per URL (difficulty is `exp(beta)`).
    pub difficulties: BTreeMap<UrlId, f64>,
    pub log_likelihood: Vec<f64>,
}

impl GladResult {
    pub fn labels(&self) -> BTreeMap<UrlId, Verdict> {
        self.posteriors.iter().map(|(u, &p)| (u.clone(), Verdict::from_phishing(p > 0.5))).collect()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(sigmoid(x))` without overflow.
fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Model parameters over a dense index.
#[derive(Debug, Clone, PartialEq)]
pub struct GladModel {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

/// Vote triples `(url index, verifier index, voted phishing)` for the
/// low-level functions below.
pub type VoteTriple = (usize, usize, bool);

fn triples(votes: &[IndexedVote]) -> Vec<VoteTriple> {
    votes.iter().map(|v| (v.item, v.worker, v.phishing)).collect()
}

/// E-step: P(Phishing) per URL under `model`, class prior 0.5.
pub fn posteriors(model: &GladModel, votes: &[VoteTriple], n_items: usize) -> Vec<f64> {
    let mut log_p = vec![[0.5f64.ln(); 2]; n_items];
    for &(i, j, phishing) in votes {
        let x = model.alpha[j] * model.beta[i].exp();
        let (right, wrong) = (log_sigmoid(x), log_sigmoid(-x));
        // class 0: truly phishing, class 1: not phishing
        if phishing {
            log_p[i][0] += right;
            log_p[i][1] += wrong;
        } else {
            log_p[i][0] += wrong;
            log_p[i][1] += right;
        }
    }
    log_p
        .into_iter()
        .map(|[a, b]| {
            let m = a.max(b);
            let (ea, eb) = ((a - m).exp(), (b - m).exp());
            ea / (ea + eb)
        })
        .collect()
}

/// Probability that the vote is correct, given the posterior on its item.
fn expected_correct(posterior: f64, phishing: bool) -> f64 {
    if phishing {
        posterior
    } else {
        1.0 - posterior
    }
}

/// Expected complete-data log-likelihood (the M-step objective), up to the
/// constant class-prior term.
pub fn expected_log_likelihood(model: &GladModel, votes: &[VoteTriple], post: &[f64]) -> f64 {
    votes
        .iter()
        .map(|&(i, j, phishing)| {
            let x = model.alpha[j] * model.beta[i].exp();
            let c = expected_correct(post[i], phishing);
            c * log_sigmoid(x) + (1.0 - c) * log_sigmoid(-x)
        })
        .sum()
}

/// Analytic gradient of [`expected_log_likelihood`] with respect to
/// `(alpha, beta)`.
pub fn gradient(model: &GladModel, votes: &[VoteTriple], post: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut g_alpha = vec![0.0; model.alpha.len()];
    let mut g_beta = vec![0.0; model.beta.len()];
    for &(i, j, phishing) in votes {
        let d = model.beta[i].exp();
        let x = model.alpha[j] * d;
        let residual = expected_correct(post[i], phishing) - sigmoid(x);
        g_alpha[j] += residual * d;
        g_beta[i] += residual * model.alpha[j] * d;
    }
    (g_alpha, g_beta)
}

/// Marginal log-likelihood of the observed votes.
pub fn marginal_log_likelihood(model: &GladModel, votes: &[VoteTriple], n_items: usize) -> f64 {
    let mut log_p = vec![[0.5f64.ln(); 2]; n_items];
    for &(i, j, phishing) in votes {
        let x = model.alpha[j] * model.beta[i].exp();
        let (right, wrong) = (log_sigmoid(x), log_sigmoid(-x));
        if phishing {
            log_p[i][0] += right;
            log_p[i][1] += wrong;
        } else {
            log_p[i][0] += wrong;
            log_p[i][1] += right;
        }
    }
    log_p
        .into_iter()
        .map(|[a, b]| {
            let m = a.max(b);
            m + ((a - m).exp() + (b - m).exp()).ln()
        })
        .sum()
}

pub fn glad(votes: &VoteMatrix, params: &GladParams) -> Result<GladResult, TruthError> {
    if votes.is_empty() {
        return Err(TruthError::EmptyInput);
    }
    if !(params.learning_rate > 0.0) || params.iters == 0 {
        return Err(TruthError::InvalidParams("glad needs learning_rate > 0 and iters >= 1".into()));
    }
    let Indexed { urls, verifiers, votes } = votes.indexed();
    let votes = triples(&votes);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut model = GladModel {
        alpha: (0..verifiers.len()).map(|_| 1.0 + rng.random_range(-JITTER..=JITTER)).collect(),
        beta: (0..urls.len()).map(|_| rng.random_range(-JITTER..=JITTER)).collect(),
    };

    // Per-parameter vote counts: steps use the mean gradient so the learning
    // rate does not depend on how many votes a verifier or URL has.
    let mut per_verifier = vec![0.0f64; verifiers.len()];
    let mut per_url = vec![0.0f64; urls.len()];
    for &(i, j, _) in &votes {
        per_verifier[j] += 1.0;
        per_url[i] += 1.0;
    }

    let mut trace = Vec::with_capacity(params.iters as usize);
    let mut post = posteriors(&model, &votes, urls.len());
    for _ in 0..params.iters {
        for _ in 0..INNER_STEPS {
            let (g_alpha, g_beta) = gradient(&model, &votes, &post);
            if g_alpha.iter().chain(&g_beta).any(|g| !g.is_finite()) {
                return Err(TruthError::NonFiniteGradient);
            }
            for (a, (g, n)) in model.alpha.iter_mut().zip(g_alpha.iter().zip(&per_verifier)) {
                *a += params.learning_rate * g / n.max(1.0);
            }
            for (b, (g, n)) in model.beta.iter_mut().zip(g_beta.iter().zip(&per_url)) {
                *b += params.learning_rate * g / n.max(1.0);
            }
        }
        post = posteriors(&model, &votes, urls.len());
        trace.push(marginal_log_likelihood(&model, &votes, urls.len()));
    }

    Ok(GladResult {
        posteriors: urls.iter().cloned().zip(post).collect(),
        abilities: verifiers.iter().cloned().zip(model.alpha).collect(),
        difficulties: urls.into_iter().zip(model.beta).collect(),
        log_likelihood: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_ability_gives_prior() {
        let model = GladModel { alpha: vec![0.0; 3], beta: vec![0.3, -1.0] };
        let votes = vec![(0, 0, true), (0, 1, true), (1, 2, false), (1, 0, true)];
        for p in posteriors(&model, &votes, 2) {
            assert!((p - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn log_sigmoid_is_stable() {
        assert!((log_sigmoid(0.0) - 0.5f64.ln()).abs() < 1e-15);
        assert!(log_sigmoid(800.0).abs() < 1e-300);
        assert!((log_sigmoid(-800.0) + 800.0).abs() < 1e-9);
        assert!((sigmoid(3.0) - 1.0 / (1.0 + (-3.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn bad_params() {
        assert_eq!(glad(&VoteMatrix::default(), &GladParams::default()), Err(TruthError::EmptyInput));
    }
}
