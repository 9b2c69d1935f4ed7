//! Information-gain reinforced random walk.

use super::{CandidateSet, DecisionContext, Heuristic};
use crate::grid::{chebyshev_ring, CellCoord};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

/// Peers whose last known cell lies within this Chebyshev distance of a
/// candidate may compete for it.
pub const COMPETITION_RADIUS: i32 = 2;

/// `IG_k / Σ IG`, or uniform when every gain is zero.
pub fn normalize_gains(gains: &[f64]) -> Vec<f64> {
    let total: f64 = gains.iter().sum();
    if total > 0.0 {
        gains.iter().map(|g| g / total).collect()
    } else {
        vec![1.0 / gains.len() as f64; gains.len()]
    }
}

/// Selection probabilities of the agent's own candidates, proportional to
/// their information gain under the agent's map.
pub fn relative_ig_probabilities(ctx: &DecisionContext<'_>, candidates: &CandidateSet) -> Vec<f64> {
    let gains: Vec<f64> = candidates.cells.iter().map(|&c| ctx.gain(c)).collect();
    normalize_gains(&gains)
}

/// `u_k = p_k Π_j (1 - q_jk)`: each `q_j` row holds a competing peer's
/// selection probability for every candidate (0 where the peer cannot pick
/// it).
pub fn apply_peer_discount(own: &[f64], peers: &[Vec<f64>]) -> Vec<f64> {
    own.iter()
        .enumerate()
        .map(|(k, &p)| peers.iter().fold(p, |u, q| u * (1.0 - q[k])))
        .collect()
}

/// Estimate of a peer's own candidate set from this agent's map: the
/// unmapped ring-1 cells around where the peer will next decide (its
/// announced target, or its last position), minus other peers' targets.
pub fn estimated_peer_candidates(
    ctx: &DecisionContext<'_>,
    peer: usize,
    decision_cell: CellCoord,
) -> Vec<CellCoord> {
    let targeted = ctx.peer_targets(Some(peer));
    chebyshev_ring(decision_cell, 1, ctx.side())
        .into_iter()
        .filter(|c| !ctx.belief.is_mapped(*c) && !targeted.contains(c))
        .collect()
}

/// Social utility of each candidate.
///
/// Only non-stale peers whose last known cell is within
/// [`COMPETITION_RADIUS`] of a candidate discount it, and only if the
/// candidate is in that peer's estimated candidate set.
pub fn social_utility(ctx: &DecisionContext<'_>, candidates: &CandidateSet) -> Vec<f64> {
    let own = relative_ig_probabilities(ctx, candidates);
    let c = ctx.side();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (peer, info) in ctx.peers.active(ctx.now) {
        let peer_cell = clamp_to_field(info.position.nearest_cell(), c);
        let near_any = candidates
            .cells
            .iter()
            .any(|k| k.chebyshev(peer_cell) <= COMPETITION_RADIUS);
        if !near_any {
            continue;
        }
        let decision_cell = info.target.unwrap_or(peer_cell);
        let peer_set = estimated_peer_candidates(ctx, peer, decision_cell);
        if peer_set.is_empty() {
            continue;
        }
        let gains: Vec<f64> = peer_set.iter().map(|&z| ctx.gain(z)).collect();
        let probs = normalize_gains(&gains);
        let row = candidates
            .cells
            .iter()
            .map(|k| {
                if k.chebyshev(peer_cell) > COMPETITION_RADIUS {
                    return 0.0;
                }
                peer_set
                    .iter()
                    .position(|z| z == k)
                    .map_or(0.0, |i| probs[i])
            })
            .collect();
        rows.push(row);
    }
    apply_peer_discount(&own, &rows)
}

fn clamp_to_field(cell: CellCoord, c: usize) -> CellCoord {
    let max = c as i32 - 1;
    CellCoord::new(cell.x.clamp(0, max), cell.y.clamp(0, max))
}

/// Picks an index from non-negative utilities.
///
/// Greedy takes the maximum with a uniform tie-break, proportional samples
/// `∝ u` (uniform if all zero), softmax samples `∝ exp(γ u)`.
pub fn select_target<R: Rng + ?Sized>(utilities: &[f64], heuristic: Heuristic, rng: &mut R) -> usize {
    assert!(!utilities.is_empty(), "no candidates to select from");
    match heuristic {
        Heuristic::Greedy => {
            let best = utilities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let ties: Vec<usize> = (0..utilities.len()).filter(|&i| utilities[i] == best).collect();
            ties[rng.random_range(0..ties.len())]
        }
        Heuristic::Proportional => sample_weighted(utilities, rng),
        Heuristic::Softmax { gamma } => {
            let best = utilities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let weights: Vec<f64> = utilities.iter().map(|u| (gamma * (u - best)).exp()).collect();
            sample_weighted(&weights, rng)
        }
    }
}

/// Draws an index proportionally to `weights`, uniformly if they are all
/// zero.
pub fn sample_weighted<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    match WeightedIndex::new(weights.iter().copied()) {
        Ok(dist) => dist.sample(rng),
        Err(_) => rng.random_range(0..weights.len()),
    }
}
