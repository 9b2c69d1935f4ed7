//! Fixed-tick simulation loop.
//!
//! Each tick, in agent-id order: agents move towards their target at cruise
//! speed (abandoning targets they failed to reach in time), arriving agents
//! observe, share the observation and pick their next target, every agent
//! sends a position beacon, and the tick's transmissions are delivered.
//! Relays go out one tick after receipt.

use crate::belief::BeliefMap;
use crate::comms::{AgentId, CommRange, Message, MsgId, Payload, PeerRegistry, ReceiveAction, RelayState};
use crate::grid::{CellCoord, Point};
use crate::metrics::{self, MetricsRecord};
use crate::sensor::SensorModel;
use crate::strategy::{candidate_cells, choose, DecisionContext, GainCache, StrategyConfig};
use crate::world::{FieldTruth, WorldConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::{self, Write};
use thiserror::Error;

/// Seconds per tick.
pub const DT: f64 = 1.0;
/// A target not reached within this multiple of the nominal travel time is
/// abandoned.
pub const TIMEOUT_FACTOR: f64 = 5.0;

/// Independent random streams derived from one run seed.
pub mod streams {
    pub const FIELD: u64 = 0;
    pub const PLACEMENT: u64 = 1;
    pub const PREPLANNED: u64 = 2;
    /// Agent `i` uses stream `AGENT_BASE + i`.
    pub const AGENT_BASE: u64 = 100;
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("need at least one agent")]
    NoAgents,
    #[error("cannot place {n} agents on distinct cells of a {cells}-cell field")]
    TooManyAgents { n: usize, cells: usize },
    #[error("start cell {0} is outside the field or used twice")]
    BadStart(CellCoord),
    #[error("the pre-planned baseline is not simulated agent by agent")]
    Preplanned,
    #[error("field or sensor does not match the world configuration: {0}")]
    Mismatch(String),
}

/// Everything that defines one simulated run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub world: WorldConfig,
    pub strategy: StrategyConfig,
    pub n_agents: usize,
    pub range: CommRange,
    pub seed: u64,
}

impl SimConfig {
    pub fn t_n(&self) -> f64 {
        self.world.cover_time(self.n_agents)
    }
}

pub struct Agent {
    id: AgentId,
    position: Point,
    /// Last cell the agent observed (or started on).
    cell: CellCoord,
    target: Option<CellCoord>,
    deadline: f64,
    belief: BeliefMap,
    gains: GainCache,
    last_seen: Vec<Option<u8>>,
    relay: RelayState,
    peers: PeerRegistry,
    rng: ChaCha8Rng,
}

impl Agent {
    pub fn id(&self) -> AgentId {
        self.id
    }

    pub fn position(&self) -> Point {
        self.position
    }

    pub fn cell(&self) -> CellCoord {
        self.cell
    }

    pub fn target(&self) -> Option<CellCoord> {
        self.target
    }

    pub fn belief(&self) -> &BeliefMap {
        &self.belief
    }

    pub fn peers(&self) -> &PeerRegistry {
        &self.peers
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stats {
    pub observations: u64,
    pub observation_messages: u64,
    pub beacons: u64,
    /// Broadcasts, originals and relays.
    pub transmissions: u64,
    /// Receptions that were processed (not dropped as duplicates).
    pub deliveries: u64,
    pub timeouts: u64,
    pub blocked_arrivals: u64,
    pub reservation_conflicts: u64,
    pub hover_ticks: u64,
}

/// What happened in one tick, for invariant checks.
#[derive(Debug, Clone, PartialEq)]
pub struct TickReport {
    pub tick: u64,
    pub now: f64,
    pub observed: Vec<(AgentId, CellCoord)>,
    pub max_displacement: f64,
}

pub struct Simulation {
    config: SimConfig,
    field: FieldTruth,
    sensor: SensorModel,
    agents: Vec<Agent>,
    tick: u64,
    next_msg: u64,
    relays: Vec<(AgentId, Message)>,
    /// Global target table, consulted only under unbounded range.
    reservations: Vec<Option<AgentId>>,
    first_visit: Vec<Option<f64>>,
    observation_counts: Vec<u32>,
    stats: Stats,
    trace: Option<Box<dyn Write + Send>>,
}

impl Simulation {
    /// Places the agents on distinct random cells.
    pub fn new(config: SimConfig, field: FieldTruth, sensor: SensorModel) -> Result<Self, EngineError> {
        let cells = config.world.cells();
        if config.n_agents == 0 {
            return Err(EngineError::NoAgents);
        }
        if config.n_agents > cells {
            return Err(EngineError::TooManyAgents {
                n: config.n_agents,
                cells,
            });
        }
        let mut rng = stream_rng(config.seed, streams::PLACEMENT);
        let starts: Vec<CellCoord> = rand::seq::index::sample(&mut rng, cells, config.n_agents)
            .into_iter()
            .map(|i| CellCoord::from_index(i, config.world.c))
            .collect();
        Self::with_starts(config, field, sensor, &starts)
    }

    /// Places agent `i` on `starts[i]`.
    pub fn with_starts(
        config: SimConfig,
        field: FieldTruth,
        sensor: SensorModel,
        starts: &[CellCoord],
    ) -> Result<Self, EngineError> {
        if matches!(config.strategy, StrategyConfig::Preplanned { .. }) {
            return Err(EngineError::Preplanned);
        }
        let c = config.world.c;
        if field.side() != c || field.n_w() != config.world.n_w || sensor.n_w() != config.world.n_w {
            return Err(EngineError::Mismatch(format!(
                "world c={} n_w={}, field c={} n_w={}, sensor n_w={}",
                c,
                config.world.n_w,
                field.side(),
                field.n_w(),
                sensor.n_w()
            )));
        }
        let n = starts.len();
        if n == 0 {
            return Err(EngineError::NoAgents);
        }
        let mut reservations = vec![None; c * c];
        let mut agents = Vec::with_capacity(n);
        for (id, &start) in starts.iter().enumerate() {
            if !start.in_field(c) || reservations[start.index(c)].is_some() {
                return Err(EngineError::BadStart(start));
            }
            reservations[start.index(c)] = Some(id);
            agents.push(Agent {
                id,
                position: start.center(),
                cell: start,
                // Arrives on the spot at the first tick and observes.
                target: Some(start),
                deadline: TIMEOUT_FACTOR * DT,
                belief: BeliefMap::uniform(c, config.world.n_w),
                gains: GainCache::new(c * c),
                last_seen: vec![None; c * c],
                relay: RelayState::new(),
                peers: PeerRegistry::new(id, n),
                rng: stream_rng(config.seed, streams::AGENT_BASE + id as u64),
            });
        }
        let config = SimConfig { n_agents: n, ..config };
        Ok(Self {
            config,
            field,
            sensor,
            agents,
            tick: 0,
            next_msg: 0,
            relays: Vec::new(),
            reservations,
            first_visit: vec![None; c * c],
            observation_counts: vec![0; c * c],
            stats: Stats::default(),
            trace: None,
        })
    }

    /// Logs every processed delivery as `tick msg_id origin recipient kind`.
    pub fn set_trace(&mut self, out: Box<dyn Write + Send>) {
        self.trace = Some(out);
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn field(&self) -> &FieldTruth {
        &self.field
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn now(&self) -> f64 {
        self.tick as f64 * DT
    }

    pub fn stats(&self) -> &Stats {
        &self.stats
    }

    pub fn first_visits(&self) -> &[Option<f64>] {
        &self.first_visit
    }

    /// Distinct observations made of each cell by the whole swarm.
    pub fn observation_counts(&self) -> &[u32] {
        &self.observation_counts
    }

    pub fn coverage_time(&self) -> Option<f64> {
        metrics::coverage_time(&self.first_visit)
    }

    pub fn step(&mut self) -> TickReport {
        self.tick += 1;
        let now = self.now();
        let c = self.config.world.c;
        let step_len = self.config.world.speed_cells() * DT;
        let unbounded = self.config.range.is_unbounded();

        // Timeouts, then motion.
        let mut arrived = vec![false; self.agents.len()];
        let mut max_displacement: f64 = 0.0;
        for i in 0..self.agents.len() {
            if self.agents[i].target.is_some() && now > self.agents[i].deadline {
                self.stats.timeouts += 1;
                let from = self.agents[i].position.nearest_cell();
                self.release(i);
                self.decide(i, from, now);
            }
            let agent = &mut self.agents[i];
            let Some(target) = agent.target else { continue };
            let to = target.center();
            let delta = to.sub(agent.position);
            let dist = delta.norm();
            if dist <= step_len {
                agent.position = to;
                arrived[i] = true;
                max_displacement = max_displacement.max(dist);
            } else {
                agent.position = agent.position.add(delta.scale(step_len / dist));
                max_displacement = max_displacement.max(step_len);
            }
        }

        // Arrivals observe and choose; hovering agents retry.
        let mut outbox: Vec<(AgentId, Message)> = Vec::new();
        let mut observed: Vec<(AgentId, CellCoord)> = Vec::new();
        for i in 0..self.agents.len() {
            if arrived[i] {
                let cell = self.agents[i].target.expect("arrived without target");
                if observed.iter().any(|&(_, c)| c == cell) {
                    self.stats.blocked_arrivals += 1;
                    continue;
                }
                observed.push((i, cell));
                let msg = self.observe(i, cell, now);
                outbox.push((i, msg));
                self.release(i);
                self.decide(i, cell, now);
            } else if self.agents[i].target.is_none() {
                self.stats.hover_ticks += 1;
                let from = self.agents[i].cell;
                self.decide(i, from, now);
            }
        }

        for i in 0..self.agents.len() {
            let agent = &self.agents[i];
            let payload = Payload::Beacon {
                position: agent.position,
                target: agent.target,
                time: now,
            };
            let msg = self.originate(i, payload);
            self.stats.beacons += 1;
            outbox.push((i, msg));
        }

        // Last tick's relays first, then this tick's originals.
        let positions: Vec<Point> = self.agents.iter().map(|a| a.position).collect();
        let mut transmissions = std::mem::take(&mut self.relays);
        transmissions.extend(outbox);
        let mut next_relays = Vec::new();
        for (sender, msg) in transmissions {
            self.stats.transmissions += 1;
            let from = positions[sender];
            for r in 0..self.agents.len() {
                if r == sender || !self.config.range.reaches(from, positions[r]) {
                    continue;
                }
                let action = self.agents[r].relay.on_receive(&msg, !unbounded);
                if action == ReceiveAction::Drop {
                    continue;
                }
                self.stats.deliveries += 1;
                self.process(r, &msg);
                if action == ReceiveAction::ProcessAndRebroadcast {
                    next_relays.push((r, msg.clone()));
                }
            }
        }
        self.relays = next_relays;

        let horizon = self.agents.len() as u64 + 1;
        for agent in &mut self.agents {
            agent.relay.prune(self.tick, horizon);
        }
        debug_assert!(self.agents.iter().all(|a| {
            let p = a.position;
            p.x >= 0.0 && p.y >= 0.0 && p.x <= (c - 1) as f64 && p.y <= (c - 1) as f64
        }));

        TickReport {
            tick: self.tick,
            now,
            observed,
            max_displacement,
        }
    }

    fn originate(&mut self, origin: AgentId, payload: Payload) -> Message {
        let msg = Message {
            id: MsgId(self.next_msg),
            origin,
            origin_tick: self.tick,
            payload,
        };
        self.next_msg += 1;
        self.agents[origin].relay.originate(&msg);
        msg
    }

    fn observe(&mut self, i: AgentId, cell: CellCoord, now: f64) -> Message {
        let c = self.config.world.c;
        let idx = cell.index(c);
        let agent = &mut self.agents[i];
        let o = self.sensor.sample(self.field.weeds(cell), &mut agent.rng);
        let _ = agent.belief.incorporate(cell, &self.sensor, o);
        agent.gains.invalidate(idx);
        agent.last_seen[idx] = Some(o.min(u8::MAX as usize) as u8);
        agent.cell = cell;
        self.observation_counts[idx] += 1;
        self.first_visit[idx].get_or_insert(now);
        self.stats.observations += 1;
        self.stats.observation_messages += 1;
        self.originate(i, Payload::Observation { cell, o, time: now })
    }

    fn process(&mut self, r: AgentId, msg: &Message) {
        if let Some(trace) = &mut self.trace {
            let line = writeln!(
                trace,
                "{} {} {} {} {}",
                self.tick,
                msg.id.0,
                msg.origin,
                r,
                msg.payload.kind()
            );
            if let Err(err) = line {
                log::warn!("message trace disabled: {err}");
                self.trace = None;
            }
        }
        let c = self.config.world.c;
        let agent = &mut self.agents[r];
        match msg.payload {
            Payload::Observation { cell, o, .. } => {
                let idx = cell.index(c);
                let _ = agent.belief.incorporate(cell, &self.sensor, o);
                agent.gains.invalidate(idx);
                agent.last_seen[idx] = Some(o.min(u8::MAX as usize) as u8);
            }
            Payload::Beacon { position, target, time } => {
                agent.peers.record(msg.origin, position, target, time);
            }
        }
    }

    fn release(&mut self, i: AgentId) {
        if let Some(target) = self.agents[i].target.take() {
            let slot = &mut self.reservations[target.index(self.config.world.c)];
            if *slot == Some(i) {
                *slot = None;
            }
        }
    }

    /// Picks and reserves a target for agent `i` deciding from `from`.
    /// Candidates held by another agent are dropped and the choice redone;
    /// with none left the agent hovers until the next tick.
    fn decide(&mut self, i: AgentId, from: CellCoord, now: f64) {
        let c = self.config.world.c;
        let unbounded = self.config.range.is_unbounded();
        let strategy = self.config.strategy;
        let Agent {
            id,
            position,
            belief,
            gains,
            last_seen,
            peers,
            rng,
            ..
        } = &mut self.agents[i];
        let ctx = DecisionContext {
            agent: *id,
            cell: from,
            position: *position,
            now,
            belief,
            peers,
            sensor: &self.sensor,
            gains,
            last_seen,
        };
        let mut candidates = candidate_cells(&ctx);
        let mut chosen = None;
        while !candidates.is_empty() {
            let k = choose(&strategy, &ctx, &candidates, rng);
            let cell = candidates.cells[k];
            let taken = if unbounded {
                self.reservations[cell.index(c)].is_some_and(|holder| holder != i)
            } else {
                peers.is_targeted(cell, now, None)
            };
            if taken {
                self.stats.reservation_conflicts += 1;
                candidates.remove(k);
                continue;
            }
            chosen = Some(cell);
            break;
        }
        let Some(cell) = chosen else { return };
        let nominal = position.distance(cell.center()) / self.config.world.speed_cells();
        let agent = &mut self.agents[i];
        agent.target = Some(cell);
        agent.deadline = now + TIMEOUT_FACTOR * nominal.max(DT);
        self.reservations[cell.index(c)] = Some(i);
    }

    /// Metrics for the current state; `time_s` is the current time.
    pub fn metrics(&self) -> MetricsRecord {
        let aggregate = metrics::aggregate_map(self.agents.iter().map(|a| &a.belief));
        let now = self.now();
        MetricsRecord {
            time_s: now,
            time_over_tn: now / self.config.t_n(),
            mse: metrics::map_mse(&aggregate, &self.field),
            coverage_fraction: metrics::coverage_fraction(&self.first_visit),
            coverage_time_s: self.coverage_time(),
            pearson_r: metrics::weed_observation_correlation(&self.field, &self.observation_counts),
        }
    }

    /// Agent positions and targets followed by the swarm's mapped mask (a
    /// cell counts as mapped when any agent has mapped it).
    pub fn write_snapshot<W: Write>(&self, mut out: W) -> io::Result<()> {
        let c = self.config.world.c;
        writeln!(out, "# tick={} time_s={}", self.tick, self.now())?;
        writeln!(out, "# id x y target")?;
        for a in &self.agents {
            let target = a.target.map_or_else(|| "-".to_string(), |t| format!("{}:{}", t.x, t.y));
            writeln!(out, "{} {} {} {}", a.id, a.position.x, a.position.y, target)?;
        }
        writeln!(out, "# mapped")?;
        for y in 0..c {
            let row: String = (0..c)
                .map(|x| {
                    let cell = CellCoord::new(x as i32, y as i32);
                    if self.agents.iter().any(|a| a.belief.is_mapped(cell)) {
                        '1'
                    } else {
                        '0'
                    }
                })
                .collect();
            writeln!(out, "{row}")?;
        }
        Ok(())
    }
}
