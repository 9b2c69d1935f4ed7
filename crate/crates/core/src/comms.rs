//! Range-limited broadcast with a relay-once-then-blacklist flooding rule.
//!
//! Two kinds of messages travel on the bus: observations of a cell and
//! position/target beacons. Both are flooded the same way. Delivery is
//! instantaneous within a tick; a relayed copy leaves on the following tick.

use crate::grid::{CellCoord, Point};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use rustc_hash::FxHashSet;
use std::collections::VecDeque;
use std::fmt;

pub type AgentId = usize;

/// Peers not heard from for longer than this are ignored.
pub const PEER_STALENESS_S: f64 = 60.0;

/// Globally unique message identifier. Relayed copies keep the id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MsgId(pub u64);

impl fmt::Display for MsgId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Observation {
        cell: CellCoord,
        o: usize,
        time: f64,
    },
    Beacon {
        position: Point,
        target: Option<CellCoord>,
        time: f64,
    },
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::Observation { .. } => "obs",
            Payload::Beacon { .. } => "beacon",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub id: MsgId,
    pub origin: AgentId,
    /// Tick at which the origin first sent the message.
    pub origin_tick: u64,
    pub payload: Payload,
}

/// Radio range in cells; `Unbounded` reaches every agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CommRange {
    Unbounded,
    Cells(f64),
}

impl CommRange {
    pub fn is_unbounded(self) -> bool {
        matches!(self, CommRange::Unbounded)
    }

    /// Closed ball: a receiver exactly at the range boundary hears the sender.
    pub fn reaches(self, from: Point, to: Point) -> bool {
        match self {
            CommRange::Unbounded => true,
            CommRange::Cells(r) => {
                let d = from.sub(to);
                d.x * d.x + d.y * d.y <= r * r + 1e-9
            }
        }
    }

    pub fn label(self) -> String {
        match self {
            CommRange::Unbounded => "inf".to_string(),
            CommRange::Cells(r) => format!("{r}"),
        }
    }
}

impl fmt::Display for CommRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl std::str::FromStr for CommRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "unbounded" => Ok(CommRange::Unbounded),
            other => {
                let r: f64 = other
                    .parse()
                    .map_err(|_| format!("`{s}` is neither a number nor \"inf\""))?;
                if r.is_infinite() && r > 0.0 {
                    Ok(CommRange::Unbounded)
                } else if r >= 0.0 {
                    Ok(CommRange::Cells(r))
                } else {
                    Err(format!("range must be non-negative, got {r}"))
                }
            }
        }
    }
}

impl Serialize for CommRange {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            CommRange::Unbounded => s.serialize_str("inf"),
            CommRange::Cells(r) => s.serialize_f64(*r),
        }
    }
}

impl<'de> Deserialize<'de> for CommRange {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Number(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Number(r) if r >= 0.0 => Ok(CommRange::Cells(r)),
            Repr::Number(r) => Err(serde::de::Error::custom(format!(
                "range must be non-negative, got {r}"
            ))),
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Agents (other than `sender`) that hear a transmission from `from`.
pub fn deliver(sender: AgentId, from: Point, positions: &[Point], range: CommRange) -> Vec<AgentId> {
    positions
        .iter()
        .enumerate()
        .filter(|&(id, &p)| id != sender && range.reaches(from, p))
        .map(|(id, _)| id)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReceiveAction {
    ProcessAndRebroadcast,
    ProcessOnly,
    Drop,
}

/// Blacklist of message ids this agent has already seen.
///
/// A message is in flight for at most `n_agents` ticks after origination
/// (one hop per tick, each agent relays once), so ids older than that can
/// be forgotten without changing any receive decision.
#[derive(Debug, Clone, Default)]
pub struct RelayState {
    blacklist: FxHashSet<MsgId>,
    by_age: VecDeque<(u64, MsgId)>,
}

impl RelayState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a message this agent originates, so echoes are dropped.
    pub fn originate(&mut self, msg: &Message) {
        if self.blacklist.insert(msg.id) {
            self.by_age.push_back((msg.origin_tick, msg.id));
        }
    }

    /// First sight: process and (if `relay`) rebroadcast once. Seen before:
    /// drop.
    pub fn on_receive(&mut self, msg: &Message, relay: bool) -> ReceiveAction {
        if !self.blacklist.insert(msg.id) {
            return ReceiveAction::Drop;
        }
        self.by_age.push_back((msg.origin_tick, msg.id));
        if relay {
            ReceiveAction::ProcessAndRebroadcast
        } else {
            ReceiveAction::ProcessOnly
        }
    }

    pub fn has_seen(&self, id: MsgId) -> bool {
        self.blacklist.contains(&id)
    }

    pub fn len(&self) -> usize {
        self.blacklist.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blacklist.is_empty()
    }

    /// Forgets ids originated more than `horizon` ticks before `tick`.
    pub fn prune(&mut self, tick: u64, horizon: u64) {
        while let Some(&(t, id)) = self.by_age.front() {
            if t + horizon >= tick {
                break;
            }
            self.blacklist.remove(&id);
            self.by_age.pop_front();
        }
    }
}

/// Last beacon heard from a peer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeerInfo {
    pub position: Point,
    pub target: Option<CellCoord>,
    pub heard_at: f64,
}

/// What an agent knows about the other agents' whereabouts.
#[derive(Debug, Clone)]
pub struct PeerRegistry {
    owner: AgentId,
    entries: Vec<Option<PeerInfo>>,
}

impl PeerRegistry {
    pub fn new(owner: AgentId, n_agents: usize) -> Self {
        Self {
            owner,
            entries: vec![None; n_agents],
        }
    }

    /// Records a beacon unless a fresher one from the same peer is known.
    pub fn record(&mut self, peer: AgentId, position: Point, target: Option<CellCoord>, time: f64) {
        if peer == self.owner {
            return;
        }
        let slot = &mut self.entries[peer];
        if slot.is_some_and(|known| known.heard_at > time) {
            return;
        }
        *slot = Some(PeerInfo {
            position,
            target,
            heard_at: time,
        });
    }

    pub fn get(&self, peer: AgentId) -> Option<&PeerInfo> {
        self.entries.get(peer).and_then(Option::as_ref)
    }

    /// Peers heard from within the staleness window, in id order.
    pub fn active(&self, now: f64) -> impl Iterator<Item = (AgentId, &PeerInfo)> + '_ {
        self.entries
            .iter()
            .enumerate()
            .filter_map(move |(id, e)| e.as_ref().map(|info| (id, info)))
            .filter(move |(_, info)| now - info.heard_at <= PEER_STALENESS_S)
    }

    /// Is `cell` the announced target of some non-stale peer (other than
    /// `except`)?
    pub fn is_targeted(&self, cell: CellCoord, now: f64, except: Option<AgentId>) -> bool {
        self.active(now)
            .any(|(id, info)| Some(id) != except && info.target == Some(cell))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn msg(id: u64, origin: AgentId, tick: u64) -> Message {
        Message {
            id: MsgId(id),
            origin,
            origin_tick: tick,
            payload: Payload::Observation {
                cell: CellCoord::new(0, 0),
                o: 1,
                time: tick as f64,
            },
        }
    }

    #[test]
    fn unbounded_reaches_everyone_else() {
        let positions: Vec<Point> = (0..50).map(|i| Point::new(i as f64, 0.0)).collect();
        let r = deliver(7, positions[7], &positions, CommRange::Unbounded);
        assert_eq!(r.len(), 49);
        assert!(!r.contains(&7));
    }

    #[test]
    fn range_boundary_is_inclusive() {
        let positions = vec![Point::new(0.0, 0.0), Point::new(11.0, 0.0)];
        assert!(deliver(0, positions[0], &positions, CommRange::Cells(10.0)).is_empty());
        let positions = vec![Point::new(0.0, 0.0), Point::new(6.0, 8.0)];
        assert_eq!(deliver(0, positions[0], &positions, CommRange::Cells(10.0)), vec![1]);
    }

    #[test]
    fn relay_once_then_drop() {
        let mut relay = RelayState::new();
        let m = msg(1, 3, 0);
        assert_eq!(relay.on_receive(&m, true), ReceiveAction::ProcessAndRebroadcast);
        assert_eq!(relay.len(), 1);
        assert_eq!(relay.on_receive(&m, true), ReceiveAction::Drop);
        assert_eq!(relay.len(), 1);
        assert_eq!(relay.on_receive(&msg(2, 3, 0), false), ReceiveAction::ProcessOnly);
    }

    #[test]
    fn own_echo_is_dropped() {
        let mut relay = RelayState::new();
        let m = msg(5, 0, 0);
        relay.originate(&m);
        assert_eq!(relay.on_receive(&m, true), ReceiveAction::Drop);
    }

    #[test]
    fn prune_forgets_only_old_ids() {
        let mut relay = RelayState::new();
        relay.on_receive(&msg(1, 0, 0), true);
        relay.on_receive(&msg(2, 0, 5), true);
        relay.prune(10, 5);
        assert!(!relay.has_seen(MsgId(1)));
        assert!(relay.has_seen(MsgId(2)));
    }

    #[test]
    fn registry_keeps_freshest_and_expires() {
        let mut reg = PeerRegistry::new(0, 3);
        reg.record(1, Point::new(1.0, 1.0), Some(CellCoord::new(2, 2)), 10.0);
        reg.record(1, Point::new(9.0, 9.0), None, 5.0);
        assert_eq!(reg.get(1).unwrap().position, Point::new(1.0, 1.0));
        assert!(reg.is_targeted(CellCoord::new(2, 2), 20.0, None));
        assert!(!reg.is_targeted(CellCoord::new(2, 2), 20.0, Some(1)));
        assert_eq!(reg.active(70.0).count(), 1);
        assert_eq!(reg.active(70.1).count(), 0);
        reg.record(0, Point::ZERO, None, 1.0);
        assert!(reg.get(0).is_none());
    }

    #[test]
    fn range_parsing() {
        assert_eq!("inf".parse::<CommRange>().unwrap(), CommRange::Unbounded);
        assert_eq!("10".parse::<CommRange>().unwrap(), CommRange::Cells(10.0));
        assert!("-1".parse::<CommRange>().is_err());
        let r: CommRange = serde_json::from_str("\"inf\"").unwrap();
        assert!(r.is_unbounded());
        let r: CommRange = serde_json::from_str("10").unwrap();
        assert_eq!(r, CommRange::Cells(10.0));
        assert_eq!(serde_json::to_string(&CommRange::Unbounded).unwrap(), "\"inf\"");
    }
}
