//! Discrete-event simulator for gradient-broadcast routing in wireless sensor
//! networks.
//!
//! A replication builds a sink-rooted cost field by ADV flooding, optionally
//! exchanges neighbor counts, then injects data messages that roll down the
//! field under one of five forwarding policies. The radio uses log-distance
//! pathloss and SINR decoding over the full packet; the MAC is CSMA with a
//! single uniform backoff and no acknowledgements.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod costfield;
pub mod engine;
pub mod error;
pub mod mac;
pub mod metrics;
pub mod network;
pub mod phys;
pub mod policies;
pub mod report;
pub mod scenario;

pub use config::{FailureSide, PGrabParams, ScenarioConfig, ScenarioParams, SinkPlacement};
pub use costfield::{CostFieldParams, CostState};
pub use engine::{Engine, EventKind, NodeId, RngStream, SimTime, StreamPurpose};
pub use error::{Error, Result};
pub use mac::{MacParams, MessageId};
pub use metrics::{aggregate, CellAggregate, CellKey, RunMetrics, Summary};
pub use network::{NodeSummary, RunOutput};
pub use phys::{Position, RadioParams};
pub use policies::{Decision, EnergyParams, GrabParams, Protocol, UGrabParams};
pub use scenario::{
    expand_cells, generate_topology, generate_traffic, run_cells, run_replication,
    run_replication_with, Axis, Cell, Topology, TrafficEvent,
};
