//! Reference curve for an idealised pre-planned sweep.
//!
//! `N` agents partition the field perfectly, so one full pass takes
//! `T_N = C² l_c / (v N)`. Every pass gives each cell one independent
//! observation. No trajectories are simulated.

use crate::belief::BeliefMap;
use crate::grid::CellCoord;
use crate::metrics::estimates_mse;
use crate::sensor::SensorModel;
use crate::world::{FieldTruth, WorldConfig};
use rand::Rng;

/// `(time, mse)` at `t = m T_N` for `m = 0..=passes`; the `m = 0` entry is
/// the uniform-prior error.
pub fn preplanned_baseline_mse<R: Rng + ?Sized>(
    field: &FieldTruth,
    sensor: &SensorModel,
    world: &WorldConfig,
    passes: usize,
    n_agents: usize,
    rng: &mut R,
) -> Vec<(f64, f64)> {
    assert!(passes >= 1 && n_agents >= 1);
    let c = field.side();
    let t_n = world.cover_time(n_agents);
    let mut belief = BeliefMap::uniform(c, sensor.n_w());
    let mse = |b: &BeliefMap| estimates_mse(b.cells().iter().map(|kv| kv.estimate()), field);
    let mut curve = Vec::with_capacity(passes + 1);
    curve.push((0.0, mse(&belief)));
    for m in 1..=passes {
        for idx in 0..c * c {
            let cell = CellCoord::from_index(idx, c);
            let o = sensor.sample(field.weeds(cell), rng);
            let _ = belief.incorporate(cell, sensor, o);
        }
        curve.push((m as f64 * t_n, mse(&belief)));
    }
    curve
}
