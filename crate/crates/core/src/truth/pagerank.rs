//! Weighted PageRank by power iteration.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::graph::VerifierGraph;
use super::TruthError;
use crate::ledger::VerifierId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PageRankParams {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: u32,
}

impl Default for PageRankParams {
    fn default() -> Self {
        PageRankParams { damping: 0.85, tol: 1e-9, max_iter: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankVector {
    pub ranks: BTreeMap<VerifierId, f64>,
    pub damping: f64,
    pub iterations_used: u32,
    pub converged: bool,
}

impl RankVector {
    pub fn get(&self, id: &str) -> Option<f64> {
        self.ranks.get(id).copied()
    }

    pub fn max_rank(&self) -> f64 {
        self.ranks.values().copied().fold(0.0, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.ranks.values().sum()
    }
}

/// Power iteration of
/// `r'(v) = (1-d)/N + d * (sum_u r(u) * w(u,v) / W_out(u) + dangling/N)`,
/// where nodes with no out-edges spread their rank uniformly. Stops when the
/// L1 change drops below `tol` or after `max_iter` sweeps.
pub fn pagerank(graph: &VerifierGraph, damping: f64, tol: f64, max_iter: u32) -> Result<RankVector, TruthError> {
    if !(damping > 0.0 && damping < 1.0) || !(tol > 0.0) || max_iter == 0 {
        return Err(TruthError::InvalidParams(format!(
            "pagerank needs damping in (0,1), tol > 0, max_iter >= 1 (got {damping}, {tol}, {max_iter})"
        )));
    }
    let ids: Vec<&VerifierId> = graph.nodes().collect();
    let n = ids.len();
    if n == 0 {
        return Err(TruthError::EmptyGraph);
    }
    let pos: BTreeMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();

    let mut out_weight = vec![0.0f64; n];
    // incoming adjacency: (source, weight)
    let mut incoming: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for edge in graph.edges() {
        let (u, v) = (pos[edge.from.as_str()], pos[edge.to.as_str()]);
        out_weight[u] += edge.weight as f64;
        incoming[v].push((u, edge.weight as f64));
    }

    let nf = n as f64;
    let teleport = (1.0 - damping) / nf;
    let mut rank = vec![1.0 / nf; n];
    let mut next = vec![0.0f64; n];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iter {
        iterations += 1;
        let dangling: f64 = (0..n).filter(|&u| out_weight[u] == 0.0).map(|u| rank[u]).sum();
        let base = teleport + damping * dangling / nf;
        for v in 0..n {
            let flow: f64 = incoming[v].iter().map(|&(u, w)| rank[u] * w / out_weight[u]).sum();
            next[v] = base + damping * flow;
        }
        // keep the vector on the simplex despite rounding drift
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        let delta: f64 = rank.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut rank, &mut next);
        if delta < tol {
            converged = true;
            break;
        }
    }

    Ok(RankVector {
        ranks: ids.into_iter().cloned().zip(rank).collect(),
        damping,
        iterations_used: iterations,
        converged,
    })
}

pub fn pagerank_with(graph: &VerifierGraph, params: &PageRankParams) -> Result<RankVector, TruthError> {
    pagerank(graph, params.damping, params.tol, params.max_iter)
}
