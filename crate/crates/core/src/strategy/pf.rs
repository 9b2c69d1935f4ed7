//! Potential-field baseline: attraction towards recently seen weeds,
//! repulsion from nearby peers, turned into a directional bias over the
//! candidate cells through a wrapped Cauchy density.

use super::ig::sample_weighted;
use super::DecisionContext;
use crate::grid::{chebyshev_ring, CellCoord, Point};
use rand::Rng;
use std::f64::consts::PI;

/// Peers within this Chebyshev distance repel.
pub const REPULSION_RADIUS: i32 = 4;
/// Cells within this Chebyshev distance attract.
pub const ATTRACTION_RADIUS: i32 = 2;
/// Upper bound on the persistence parameter.
pub const MAX_PERSISTENCE: f64 = 0.9;

/// `2 v̂ exp(-|v| / (2σ²))`; zero for a zero vector or `σ = 0`.
pub fn gaussian_step(v: Point, sigma: f64) -> Point {
    let len = v.norm();
    if sigma <= 0.0 || len == 0.0 {
        return Point::ZERO;
    }
    v.scale(2.0 * (-len / (2.0 * sigma * sigma)).exp() / len)
}

/// Wrapped Cauchy density with persistence `p ∈ [0, 1)`.
pub fn wrapped_cauchy(theta: f64, p: f64) -> f64 {
    (1.0 - p * p) / (2.0 * PI * (1.0 + p * p - 2.0 * p * theta.cos()))
}

/// `0.9 (1 - exp(-β |v|))`, so a longer bias vector gives a sharper turn
/// distribution.
pub fn persistence(bias_len: f64, beta: f64) -> f64 {
    MAX_PERSISTENCE * (1.0 - (-beta * bias_len).exp())
}

/// Bias vector `v_i = r_i + a_i` in cell units.
pub fn pf_vectors(ctx: &DecisionContext<'_>, sigma_a: f64, sigma_r: f64) -> Point {
    let n_w = ctx.belief.n_w();
    let mut repulsion = Point::ZERO;
    for (_, peer) in ctx.peers.active(ctx.now) {
        if peer.position.nearest_cell().chebyshev(ctx.cell) <= REPULSION_RADIUS {
            repulsion = repulsion.add(gaussian_step(ctx.position.sub(peer.position), sigma_r));
        }
    }
    let mut attraction = Point::ZERO;
    for d in 1..=ATTRACTION_RADIUS {
        for cell in chebyshev_ring(ctx.cell, d, ctx.side()) {
            if ctx.belief.is_mapped(cell) {
                continue;
            }
            let Some(seen) = ctx.last_seen[cell.index(ctx.side())] else {
                continue;
            };
            let weight = (seen as usize).min(n_w) as f64 / n_w as f64;
            if weight > 0.0 {
                let step = gaussian_step(cell.center().sub(ctx.position), sigma_a);
                attraction = attraction.add(step.scale(weight));
            }
        }
    }
    repulsion.add(attraction)
}

/// Utility of each candidate: the wrapped Cauchy density at the angle
/// between the direction to the candidate and the bias vector.
pub fn pf_utilities(position: Point, candidates: &[CellCoord], bias: Point, beta: f64) -> Vec<f64> {
    let len = bias.norm();
    let p = persistence(len, beta);
    let heading = bias.angle();
    candidates
        .iter()
        .map(|c| {
            let theta = if len > 0.0 {
                c.center().sub(position).angle() - heading
            } else {
                0.0
            };
            wrapped_cauchy(theta, p)
        })
        .collect()
}

pub fn pf_select<R: Rng + ?Sized>(
    position: Point,
    candidates: &[CellCoord],
    bias: Point,
    beta: f64,
    rng: &mut R,
) -> usize {
    assert!(!candidates.is_empty(), "no candidates to select from");
    sample_weighted(&pf_utilities(position, candidates, bias, beta), rng)
}
