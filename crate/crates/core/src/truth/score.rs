//! Rank-weighted phish scores and verifier skill points.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::TruthError;
use crate::ledger::{UrlId, Verdict, VerifierId, VOTE_THRESHOLD};

/// A URL's score, or `Insufficient` while it has fewer than three votes.
/// Serialized as a number or `null`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "Option<f64>", into = "Option<f64>")]
pub enum PhishScore {
    Insufficient,
    Scored(f64),
}

impl PhishScore {
    pub fn value(self) -> Option<f64> {
        match self {
            PhishScore::Insufficient => None,
            PhishScore::Scored(s) => Some(s),
        }
    }

    /// Phishing iff strictly positive.
    pub fn label(self) -> Option<Verdict> {
        self.value().map(|s| Verdict::from_phishing(s > 0.0))
    }
}

impl From<Option<f64>> for PhishScore {
    fn from(v: Option<f64>) -> Self {
        v.map_or(PhishScore::Insufficient, PhishScore::Scored)
    }
}

impl From<PhishScore> for Option<f64> {
    fn from(s: PhishScore) -> Self {
        s.value()
    }
}

/// `(sum of Phishing voter ranks - sum of NotPhishing voter ranks) / sum of all voter ranks`.
pub fn phish_score<'a, I>(ranks: &BTreeMap<VerifierId, f64>, votes: I) -> Result<PhishScore, TruthError>
where
    I: IntoIterator<Item = (&'a str, Verdict)>,
{
    let mut weighted = 0.0;
    let mut total = 0.0;
    let mut count = 0usize;
    for (verifier, verdict) in votes {
        let r = *ranks.get(verifier).ok_or_else(|| TruthError::MissingRank(verifier.to_string()))?;
        total += r;
        weighted += if verdict.is_phishing() { r } else { -r };
        count += 1;
    }
    if count < VOTE_THRESHOLD {
        return Ok(PhishScore::Insufficient);
    }
    Ok(PhishScore::Scored(ratio(weighted, total)))
}

/// Balances within this fraction of the total rank are rounding noise from
/// the power iteration and count as an exact tie.
const TIE_EPSILON: f64 = 1e-12;

fn ratio(weighted: f64, total: f64) -> f64 {
    if total <= 0.0 || weighted.abs() <= TIE_EPSILON * total {
        return 0.0;
    }
    (weighted / total).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimelinePoint {
    pub ordinal: u32,
    pub score: PhishScore,
}

/// Score after each prefix of the vote sequence, ranks held fixed.
pub fn score_timeline<'a, I>(ranks: &BTreeMap<VerifierId, f64>, votes: I) -> Result<Vec<TimelinePoint>, TruthError>
where
    I: IntoIterator<Item = (&'a str, Verdict)>,
{
    let mut out = Vec::new();
    let mut weighted = 0.0;
    let mut total = 0.0;
    for (k, (verifier, verdict)) in votes.into_iter().enumerate() {
        let r = *ranks.get(verifier).ok_or_else(|| TruthError::MissingRank(verifier.to_string()))?;
        total += r;
        weighted += if verdict.is_phishing() { r } else { -r };
        let count = k + 1;
        let score =
            if count < VOTE_THRESHOLD { PhishScore::Insufficient } else { PhishScore::Scored(ratio(weighted, total)) };
        out.push(TimelinePoint { ordinal: count as u32, score });
    }
    Ok(out)
}

/// `round(100 * (normalized_rank + accuracy))`, in `0..=200`.
pub fn skill_value(normalized_rank: f64, accuracy: f64) -> u32 {
    let v = 100.0 * (normalized_rank.clamp(0.0, 1.0) + accuracy.clamp(0.0, 1.0));
    v.round() as u32
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteTally {
    pub votes_cast: u32,
    pub votes_correct: u32,
}

impl VoteTally {
    pub fn accuracy(&self) -> f64 {
        if self.votes_cast == 0 {
            0.0
        } else {
            self.votes_correct as f64 / self.votes_cast as f64
        }
    }
}

/// Counts, per verifier, votes agreeing with the URL's final label. Votes on
/// URLs without a label count as cast but not correct.
pub fn tally_votes<'a, I>(votes: I, final_labels: &BTreeMap<UrlId, Verdict>) -> BTreeMap<VerifierId, VoteTally>
where
    I: IntoIterator<Item = (&'a str, &'a str, Verdict)>,
{
    let mut tallies: BTreeMap<VerifierId, VoteTally> = BTreeMap::new();
    for (url_id, verifier, verdict) in votes {
        let t = tallies.entry(verifier.to_string()).or_default();
        t.votes_cast += 1;
        if final_labels.get(url_id) == Some(&verdict) {
            t.votes_correct += 1;
        }
    }
    tallies
}

/// Skill points for every verifier in `tallies` (or in `ranks`, with a zero
/// tally, when absent from `tallies`).
pub fn skill_points(
    ranks: &BTreeMap<VerifierId, f64>,
    tallies: &BTreeMap<VerifierId, VoteTally>,
) -> BTreeMap<VerifierId, u32> {
    let max_rank = ranks.values().copied().fold(0.0, f64::max);
    let mut ids: Vec<&VerifierId> = ranks.keys().chain(tallies.keys()).collect();
    ids.sort();
    ids.dedup();
    ids.into_iter()
        .map(|id| {
            let r = ranks.get(id).copied().unwrap_or(0.0);
            let norm = if max_rank > 0.0 { r / max_rank } else { 0.0 };
            let acc = tallies.get(id).map_or(0.0, VoteTally::accuracy);
            (id.clone(), skill_value(norm, acc))
        })
        .collect()
}
