//! Target selection.
//!
//! Every spatial strategy first narrows the choice to a local candidate set
//! (ring 1, then ring 2, then a relocation move over already mapped cells)
//! and then scores the candidates: by information gain discounted by peers
//! for the `G`/`R`/`S_γ` heuristics, or by a wrapped-Cauchy directional bias
//! for the potential-field baseline. The pre-planned baseline has no spatial
//! component and lives in [`preplanned`].

pub mod ig;
pub mod pf;
pub mod preplanned;

use crate::belief::BeliefMap;
use crate::comms::{AgentId, PeerRegistry};
use crate::grid::{chebyshev_ring, CellCoord, Point};
use crate::sensor::SensorModel;
use serde::{Deserialize, Serialize};
use std::cell::Cell;
use std::fmt;

/// How an agent picks its next cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum StrategyConfig {
    /// Highest social utility, random tie-break.
    #[serde(rename = "G")]
    Greedy,
    /// Random, proportional to social utility.
    #[serde(rename = "R")]
    Proportional,
    /// Random, proportional to `exp(gamma * u)`.
    #[serde(rename = "S")]
    Softmax { gamma: f64 },
    /// Potential-field random walk.
    #[serde(rename = "PF")]
    PotentialField { sigma_a: f64, sigma_r: f64, beta: f64 },
    /// Idealised uniform coverage, `passes` sweeps of the whole field.
    #[serde(rename = "B")]
    Preplanned { passes: usize },
}

impl StrategyConfig {
    pub fn validate(&self) -> Result<(), String> {
        match *self {
            StrategyConfig::Softmax { gamma } if !(gamma > 0.0 && gamma.is_finite()) => {
                Err(format!("softmax gamma must be > 0, got {gamma}"))
            }
            StrategyConfig::PotentialField { sigma_a, sigma_r, beta } => {
                if !(sigma_a >= 0.0 && sigma_r >= 0.0) {
                    Err(format!("PF sigmas must be >= 0, got a={sigma_a}, r={sigma_r}"))
                } else if !(beta > 0.0 && beta.is_finite()) {
                    Err(format!("PF beta must be > 0, got {beta}"))
                } else {
                    Ok(())
                }
            }
            StrategyConfig::Preplanned { passes: 0 } => Err("baseline needs at least one pass".into()),
            _ => Ok(()),
        }
    }

    /// Short name used in run ids and CSV rows.
    pub fn label(&self) -> String {
        match *self {
            StrategyConfig::Greedy => "G".into(),
            StrategyConfig::Proportional => "R".into(),
            StrategyConfig::Softmax { gamma } => format!("S{gamma}"),
            StrategyConfig::PotentialField { sigma_a, sigma_r, beta } => {
                format!("PF_a{sigma_a}_r{sigma_r}_b{beta}")
            }
            StrategyConfig::Preplanned { .. } => "B".into(),
        }
    }

    pub fn heuristic(&self) -> Option<Heuristic> {
        match *self {
            StrategyConfig::Greedy => Some(Heuristic::Greedy),
            StrategyConfig::Proportional => Some(Heuristic::Proportional),
            StrategyConfig::Softmax { gamma } => Some(Heuristic::Softmax { gamma }),
            _ => None,
        }
    }
}

impl fmt::Display for StrategyConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Rule that turns utilities into a choice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Heuristic {
    Greedy,
    Proportional,
    Softmax { gamma: f64 },
}

/// Which step of the neighbourhood rule produced a candidate set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Ring1,
    Ring2,
    Relocation,
    /// Every ring-2 cell is unmapped but already targeted by a peer.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub cells: Vec<CellCoord>,
    pub provenance: Provenance,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn remove(&mut self, index: usize) -> CellCoord {
        self.cells.remove(index)
    }
}

/// Lazily computed information gain per cell, invalidated on every belief
/// update of that cell.
#[derive(Debug, Clone)]
pub struct GainCache {
    values: Vec<Cell<f64>>,
}

impl GainCache {
    pub fn new(cells: usize) -> Self {
        Self {
            values: vec![Cell::new(f64::NAN); cells],
        }
    }

    pub fn get(&self, belief: &BeliefMap, sensor: &SensorModel, cell: CellCoord) -> f64 {
        let slot = &self.values[cell.index(belief.side())];
        let cached = slot.get();
        if !cached.is_nan() {
            return cached;
        }
        let ig = belief.cell(cell).information_gain(sensor);
        slot.set(ig);
        ig
    }

    pub fn invalidate(&self, index: usize) {
        self.values[index].set(f64::NAN);
    }
}

/// Everything an agent knows when it has to pick a target.
pub struct DecisionContext<'a> {
    pub agent: AgentId,
    /// Cell the agent is deciding from.
    pub cell: CellCoord,
    pub position: Point,
    pub now: f64,
    pub belief: &'a BeliefMap,
    pub peers: &'a PeerRegistry,
    pub sensor: &'a SensorModel,
    pub gains: &'a GainCache,
    /// Most recent observed count per cell, own or relayed.
    pub last_seen: &'a [Option<u8>],
}

impl DecisionContext<'_> {
    pub fn side(&self) -> usize {
        self.belief.side()
    }

    pub fn gain(&self, cell: CellCoord) -> f64 {
        self.gains.get(self.belief, self.sensor, cell)
    }

    /// Targets announced by non-stale peers, excluding `except`.
    pub(crate) fn peer_targets(&self, except: Option<AgentId>) -> Vec<CellCoord> {
        self.peers
            .active(self.now)
            .filter(|&(id, _)| Some(id) != except)
            .filter_map(|(_, info)| info.target)
            .collect()
    }
}

/// The local candidate set `V_i`.
///
/// A cell is valid when it is in the field, not mapped in the agent's own
/// map and not the known target of a non-stale peer. Ring-1 valid cells win;
/// otherwise ring-2 valid cells; otherwise ring-2 cells that are already
/// mapped (a relocation move); otherwise every ring-2 cell.
pub fn candidate_cells(ctx: &DecisionContext<'_>) -> CandidateSet {
    let c = ctx.side();
    let targeted = ctx.peer_targets(None);
    let valid = |cell: &CellCoord| !ctx.belief.is_mapped(*cell) && !targeted.contains(cell);

    let ring1: Vec<CellCoord> = chebyshev_ring(ctx.cell, 1, c).into_iter().filter(valid).collect();
    if !ring1.is_empty() {
        return CandidateSet {
            cells: ring1,
            provenance: Provenance::Ring1,
        };
    }
    let ring2 = chebyshev_ring(ctx.cell, 2, c);
    let valid2: Vec<CellCoord> = ring2.iter().copied().filter(valid).collect();
    if !valid2.is_empty() {
        return CandidateSet {
            cells: valid2,
            provenance: Provenance::Ring2,
        };
    }
    let mapped2: Vec<CellCoord> = ring2
        .iter()
        .copied()
        .filter(|&cell| ctx.belief.is_mapped(cell))
        .collect();
    if !mapped2.is_empty() {
        return CandidateSet {
            cells: mapped2,
            provenance: Provenance::Relocation,
        };
    }
    CandidateSet {
        cells: ring2,
        provenance: Provenance::Degenerate,
    }
}

/// Scores the candidates and draws one, per the configured strategy.
/// Returns an index into `candidates`.
pub fn choose<R: rand::Rng + ?Sized>(
    strategy: &StrategyConfig,
    ctx: &DecisionContext<'_>,
    candidates: &CandidateSet,
    rng: &mut R,
) -> usize {
    match *strategy {
        StrategyConfig::PotentialField { sigma_a, sigma_r, beta } => {
            let bias = pf::pf_vectors(ctx, sigma_a, sigma_r);
            pf::pf_select(ctx.position, &candidates.cells, bias, beta, rng)
        }
        StrategyConfig::Preplanned { .. } => {
            panic!("the pre-planned baseline does not select targets")
        }
        _ => {
            let heuristic = strategy.heuristic().expect("IG heuristic");
            let utilities = ig::social_utility(ctx, candidates);
            ig::select_target(&utilities, heuristic, rng)
        }
    }
}
