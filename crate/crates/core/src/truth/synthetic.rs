//! Seeded synthetic crowd-vote datasets with known ground truth.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::votes::{GeneratorParams, LabeledDataset, VoteEntry, VoteMatrix};
use super::TruthError;
use crate::ledger::Verdict;

/// Zipf exponent of verifier activity: verifier `i` (0-based) is picked with
/// weight `(i + 1)^-ACTIVITY_SKEW`.
const ACTIVITY_SKEW: f64 = 0.8;

impl Default for GeneratorParams {
    fn default() -> Self {
        GeneratorParams {
            n_urls: 2000,
            n_verifiers: 50,
            phish_fraction: 0.5,
            reliability_mean: 0.8,
            reliability_spread: 0.1,
            participation_exponent: 2.0,
            min_votes: 3,
            seed: 0,
        }
    }
}

impl GeneratorParams {
    pub fn validate(&self) -> Result<(), TruthError> {
        let bad = |m: &str| Err(TruthError::InvalidParams(m.to_string()));
        if self.n_urls == 0 || self.n_verifiers == 0 {
            return bad("n_urls and n_verifiers must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.phish_fraction) {
            return bad("phish_fraction must be in [0, 1]");
        }
        if !(self.reliability_mean > 0.5 && self.reliability_mean <= 1.0) {
            return bad("reliability_mean must be in (0.5, 1]");
        }
        if !(self.reliability_spread >= 0.0) || !self.reliability_spread.is_finite() {
            return bad("reliability_spread must be >= 0");
        }
        if !(self.participation_exponent > 0.0) || !self.participation_exponent.is_finite() {
            return bad("participation_exponent must be > 0");
        }
        if self.min_votes == 0 {
            return bad("min_votes must be >= 1");
        }
        Ok(())
    }
}

/// Generates a labeled dataset.
///
/// Reliabilities are normal around `reliability_mean` with standard
/// deviation `reliability_spread`, clipped to `[0, 1]`. Each URL gets
/// `floor(min_votes * U^(-1/exponent))` voters (a Pareto tail, capped at the
/// verifier count), drawn without replacement with Zipf-skewed activity, in
/// random order. Activity order follows reliability plus Gaussian noise, so
/// frequent verifiers are usually, but not always, the better ones. A vote
/// matches the truth with the voter's reliability.
pub fn generate_synthetic(params: &GeneratorParams) -> Result<LabeledDataset, TruthError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let verifier_ids: Vec<String> = (0..params.n_verifiers).map(|i| format!("v{i:04}")).collect();
    let reliability: Vec<f64> = if params.reliability_spread == 0.0 {
        vec![params.reliability_mean; params.n_verifiers]
    } else {
        let normal = Normal::new(params.reliability_mean, params.reliability_spread)
            .map_err(|e| TruthError::InvalidParams(e.to_string()))?;
        (0..params.n_verifiers).map(|_| normal.sample(&mut rng).clamp(0.0, 1.0)).collect()
    };
    // More reliable verifiers tend to be more active: activity order follows
    // reliability plus noise of the same spread.
    let experience: Vec<f64> = if params.reliability_spread == 0.0 {
        vec![0.0; params.n_verifiers]
    } else {
        let noise =
            Normal::new(0.0, params.reliability_spread).map_err(|e| TruthError::InvalidParams(e.to_string()))?;
        reliability.iter().map(|r| r + noise.sample(&mut rng)).collect()
    };
    let mut by_reliability: Vec<usize> = (0..params.n_verifiers).collect();
    by_reliability.shuffle(&mut rng);
    by_reliability.sort_by(|&a, &b| experience[b].total_cmp(&experience[a]));
    let mut activity_rank = vec![0usize; params.n_verifiers];
    for (r, &v) in by_reliability.iter().enumerate() {
        activity_rank[v] = r;
    }
    let activity: Vec<f64> = activity_rank.iter().map(|&r| ((r + 1) as f64).powf(-ACTIVITY_SKEW)).collect();

    let n_phish = (params.phish_fraction * params.n_urls as f64).round() as usize;
    let mut labels: Vec<bool> = (0..params.n_urls).map(|i| i < n_phish).collect();
    labels.shuffle(&mut rng);

    let mut entries = Vec::new();
    let mut truth = BTreeMap::new();
    let cap = params.n_verifiers;
    for (u, &is_phish) in labels.iter().enumerate() {
        let url_id = format!("u{u:06}");
        truth.insert(url_id.clone(), Verdict::from_phishing(is_phish));

        let uniform: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
        let k = (params.min_votes as f64 * uniform.powf(-1.0 / params.participation_exponent)).floor();
        let k = (k as usize).clamp(params.min_votes.min(cap), cap);

        let voters = weighted_sample(&mut rng, &activity, k);
        for (pos, &v) in voters.iter().enumerate() {
            let correct = rng.random::<f64>() < reliability[v];
            entries.push(VoteEntry {
                url_id: url_id.clone(),
                verifier_id: verifier_ids[v].clone(),
                verdict: Verdict::from_phishing(if correct { is_phish } else { !is_phish }),
                ordinal: pos as u32 + 1,
            });
        }
    }

    let mut ds = LabeledDataset::new(VoteMatrix::new(entries)?, truth)?;
    ds.generator_params = Some(params.clone());
    Ok(ds)
}

/// `k` distinct indices drawn proportionally to `weights`, in draw order
/// (which doubles as the random vote order).
fn weighted_sample(rng: &mut ChaCha8Rng, weights: &[f64], k: usize) -> Vec<usize> {
    let mut remaining: Vec<(usize, f64)> = weights.iter().copied().enumerate().collect();
    let mut out = Vec::with_capacity(k);
    while out.len() < k && !remaining.is_empty() {
        let total: f64 = remaining.iter().map(|(_, w)| w).sum();
        let mut target = rng.random::<f64>() * total;
        let mut pick = remaining.len() - 1;
        for (i, (_, w)) in remaining.iter().enumerate() {
            if target < *w {
                pick = i;
                break;
            }
            target -= w;
        }
        out.push(remaining.swap_remove(pick).0);
    }
    out
}
