//! Deterministic simulator for a swarm of UAVs mapping weed density over a
//! field of square cells.
//!
//! Each agent keeps a Bayesian belief over the weed count of every cell,
//! picks its next cell by a reinforced random walk driven by information
//! gain, and shares its observations with the rest of the swarm over a
//! range-limited flooding protocol.

pub mod belief;
pub mod comms;
pub mod config;
pub mod engine;
pub mod grid;
pub mod metrics;
pub mod runner;
pub mod sensor;
pub mod strategy;
pub mod world;
