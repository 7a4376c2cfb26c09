//! Ranking-quality and regret measurement.
//!
//! Three quantities drive the evaluation protocol:
//!
//! | Metric | Range | Meaning |
//! |--------|-------|---------|
//! | [`ndcg_at_k`] | [0, 1] | position-discounted relevance of the served list |
//! | [`cumulative_ndcg`] | [0, T] | discounted sum of per-round NDCG over a session horizon |
//! | [`kendall_regret`] | [0, V(V-1)/2] | number of strictly mis-ordered document pairs |
//!
//! Conventions: all-zero-label queries have NDCG 0, and pairs with equal
//! relevance labels never count as regret (either order is consistent with
//! an ideal ranking under ties).

use serde::{Deserialize, Serialize};

use crate::Ranking;

/// Per-round measurement emitted by the experiment loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 1-based online round index.
    pub round: usize,
    /// NDCG@k of the served list against the session's true labels.
    pub ndcg_at_k: f64,
    /// Mis-ordered strict-label pairs in the full served permutation.
    pub kendall_regret: usize,
    /// Fraction of top-k document pairs in a certain rank order.
    pub certain_ratio: f64,
    /// Number of independent click pairs harvested this round.
    pub n_pairs_harvested: usize,
    /// The full served permutation (document index per rank).
    pub served: Ranking,
}

/// Gain of a relevance grade: `2^grade - 1`.
#[inline]
fn gain(label: u8) -> f64 {
    (1u64 << label) as f64 - 1.0
}

/// Rank discount at 1-based rank `r`: `1 / log2(r + 1)`.
#[inline]
fn discount(rank: usize) -> f64 {
    1.0 / ((rank + 1) as f64).log2()
}

/// NDCG@k of `ranking` (document index per rank) under `labels`.
///
/// DCG truncates at `min(k, V)`; the ideal DCG sorts labels descending.
/// Queries whose labels are all zero return 0.
pub fn ndcg_at_k(ranking: &[usize], labels: &[u8], k: usize) -> f64 {
    let cut = k.min(ranking.len());
    let dcg: f64 = ranking[..cut]
        .iter()
        .enumerate()
        .map(|(pos, &doc)| gain(labels[doc]) * discount(pos + 1))
        .sum();

    let mut sorted = labels.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = sorted
        .iter()
        .take(k.min(labels.len()))
        .enumerate()
        .map(|(pos, &label)| gain(label) * discount(pos + 1))
        .sum();

    if idcg == 0.0 {
        0.0
    } else {
        dcg / idcg
    }
}

/// Discounted sum of per-round NDCG values: `sum_t v_t * gamma^(t-1)`.
///
/// `gamma` is the probability the user keeps searching after a query;
/// `gamma = 1` reduces to a plain sum.
pub fn cumulative_ndcg(per_round: &[f64], gamma: f64) -> f64 {
    let mut weight = 1.0;
    let mut total = 0.0;
    for &v in per_round {
        total += v * weight;
        weight *= gamma;
    }
    total
}

/// Number of document pairs served in the opposite order of their labels.
///
/// Counts pairs `(i, j)` with `labels[i] > labels[j]` placed so that `i`
/// ranks below `j`. Equal-label pairs never count.
pub fn kendall_regret(ranking: &[usize], labels: &[u8]) -> usize {
    let v = ranking.len();
    let mut position = vec![0usize; v];
    for (rank, &doc) in ranking.iter().enumerate() {
        position[doc] = rank;
    }
    let mut misordered = 0;
    for i in 0..v {
        for j in (i + 1)..v {
            let (hi, lo) = if labels[i] > labels[j] {
                (i, j)
            } else if labels[j] > labels[i] {
                (j, i)
            } else {
                continue;
            };
            if position[hi] > position[lo] {
                misordered += 1;
            }
        }
    }
    misordered
}
