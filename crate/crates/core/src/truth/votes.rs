use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::TruthError;
use crate::ledger::{UrlId, UrlRecord, Verdict, VerifierId};

/// One crowd vote. Encoded on the wire as `[url_id, verifier_id, verdict, ordinal]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "(UrlId, VerifierId, Verdict, u32)", into = "(UrlId, VerifierId, Verdict, u32)")]
pub struct VoteEntry {
    pub url_id: UrlId,
    pub verifier_id: VerifierId,
    pub verdict: Verdict,
    pub ordinal: u32,
}

impl From<(UrlId, VerifierId, Verdict, u32)> for VoteEntry {
    fn from((url_id, verifier_id, verdict, ordinal): (UrlId, VerifierId, Verdict, u32)) -> Self {
        VoteEntry { url_id, verifier_id, verdict, ordinal }
    }
}

impl From<VoteEntry> for (UrlId, VerifierId, Verdict, u32) {
    fn from(v: VoteEntry) -> Self {
        (v.url_id, v.verifier_id, v.verdict, v.ordinal)
    }
}

/// All votes, with per-URL (ordinal order) and per-verifier indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VoteMatrix {
    entries: Vec<VoteEntry>,
    by_url: BTreeMap<UrlId, Vec<usize>>,
    by_verifier: BTreeMap<VerifierId, Vec<usize>>,
}

impl VoteMatrix {
    /// Checks that (url, verifier) pairs are unique and that ordinals run
    /// 1..k for every URL.
    pub fn new(entries: Vec<VoteEntry>) -> Result<Self, TruthError> {
        let mut by_url: BTreeMap<UrlId, Vec<usize>> = BTreeMap::new();
        let mut by_verifier: BTreeMap<VerifierId, Vec<usize>> = BTreeMap::new();
        let mut seen = BTreeSet::new();
        for (i, e) in entries.iter().enumerate() {
            if !seen.insert((e.url_id.as_str(), e.verifier_id.as_str())) {
                return Err(TruthError::DuplicateVote { url_id: e.url_id.clone(), verifier_id: e.verifier_id.clone() });
            }
            by_url.entry(e.url_id.clone()).or_default().push(i);
            by_verifier.entry(e.verifier_id.clone()).or_default().push(i);
        }
        for (url, idx) in by_url.iter_mut() {
            idx.sort_by_key(|&i| entries[i].ordinal);
            let contiguous = idx.iter().enumerate().all(|(k, &i)| entries[i].ordinal as usize == k + 1);
            if !contiguous {
                return Err(TruthError::NonContiguousOrdinals(url.clone()));
            }
        }
        Ok(VoteMatrix { entries, by_url, by_verifier })
    }

    /// Builds the matrix from ledger records (already ordered and unique).
    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a UrlRecord>) -> Self {
        let entries = records
            .into_iter()
            .flat_map(|r| {
                r.votes.iter().map(move |v| VoteEntry {
                    url_id: r.url_id.clone(),
                    verifier_id: v.verifier.clone(),
                    verdict: v.verdict,
                    ordinal: v.ordinal,
                })
            })
            .collect();
        VoteMatrix::new(entries).expect("ledger records hold unique, contiguous votes")
    }

    pub fn entries(&self) -> &[VoteEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn urls(&self) -> impl Iterator<Item = &UrlId> {
        self.by_url.keys()
    }

    pub fn verifiers(&self) -> impl Iterator<Item = &VerifierId> {
        self.by_verifier.keys()
    }

    /// Votes on one URL in ordinal order.
    pub fn url_votes(&self, url_id: &str) -> impl Iterator<Item = &VoteEntry> {
        self.by_url.get(url_id).into_iter().flatten().map(|&i| &self.entries[i])
    }

    pub fn verifier_votes(&self, verifier_id: &str) -> impl Iterator<Item = &VoteEntry> {
        self.by_verifier.get(verifier_id).into_iter().flatten().map(|&i| &self.entries[i])
    }

    /// Iterates URLs with their ordered vote sequences.
    pub fn sequences(&self) -> impl Iterator<Item = (&UrlId, Vec<&VoteEntry>)> {
        self.by_url.iter().map(|(u, idx)| (u, idx.iter().map(|&i| &self.entries[i]).collect()))
    }

    pub(crate) fn indexed(&self) -> Indexed {
        let urls: Vec<UrlId> = self.by_url.keys().cloned().collect();
        let verifiers: Vec<VerifierId> = self.by_verifier.keys().cloned().collect();
        let url_pos: BTreeMap<&str, usize> = urls.iter().enumerate().map(|(i, u)| (u.as_str(), i)).collect();
        let ver_pos: BTreeMap<&str, usize> = verifiers.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect();
        let mut votes: Vec<IndexedVote> = self
            .entries
            .iter()
            .map(|e| IndexedVote {
                item: url_pos[e.url_id.as_str()],
                worker: ver_pos[e.verifier_id.as_str()],
                phishing: e.verdict.is_phishing(),
            })
            .collect();
        votes.sort_by_key(|v| (v.item, v.worker));
        Indexed { urls, verifiers, votes }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct IndexedVote {
    pub item: usize,
    pub worker: usize,
    pub phishing: bool,
}

/// Dense integer view used by the iterative estimators.
#[derive(Debug, Clone)]
pub(crate) struct Indexed {
    pub urls: Vec<UrlId>,
    pub verifiers: Vec<VerifierId>,
    pub votes: Vec<IndexedVote>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorParams {
    pub n_urls: usize,
    pub n_verifiers: usize,
    pub phish_fraction: f64,
    pub reliability_mean: f64,
    pub reliability_spread: f64,
    pub participation_exponent: f64,
    pub min_votes: usize,
    pub seed: u64,
}

/// Votes plus ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub votes: VoteMatrix,
    pub truth: BTreeMap<UrlId, Verdict>,
    pub generator_params: Option<GeneratorParams>,
}

#[derive(Serialize, Deserialize)]
struct DatasetFile {
    votes: Vec<VoteEntry>,
    #[serde(default)]
    truth: BTreeMap<UrlId, Verdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    generator_params: Option<GeneratorParams>,
}

impl LabeledDataset {
    pub fn new(votes: VoteMatrix, truth: BTreeMap<UrlId, Verdict>) -> Result<Self, TruthError> {
        if let Some(missing) = votes.urls().find(|u| !truth.contains_key(*u)) {
            return Err(TruthError::MissingTruth(missing.clone()));
        }
        Ok(LabeledDataset { votes, truth, generator_params: None })
    }

    pub fn to_json(&self) -> String {
        let file = DatasetFile {
            votes: self.votes.entries().to_vec(),
            truth: self.truth.clone(),
            generator_params: self.generator_params.clone(),
        };
        serde_json::to_string(&file).expect("dataset encodes")
    }

    /// Parses `{votes: [[url_id, verifier_id, verdict, ordinal]...], truth: {...}}`.
    /// `truth` may be empty for unlabeled vote dumps.
    pub fn from_json(s: &str) -> Result<Self, TruthError> {
        let file: DatasetFile = serde_json::from_str(s).map_err(|e| TruthError::InvalidParams(e.to_string()))?;
        let votes = VoteMatrix::new(file.votes)?;
        if !file.truth.is_empty() {
            if let Some(missing) = votes.urls().find(|u| !file.truth.contains_key(*u)) {
                return Err(TruthError::MissingTruth(missing.clone()));
            }
        }
        Ok(LabeledDataset { votes, truth: file.truth, generator_params: file.generator_params })
    }
}
