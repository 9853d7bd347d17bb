//! Message flow graphs: typed, duration-weighted edges traced forward and backward
//! from a seed, with end-to-end latency.

mod export;
mod graph;
mod kinds;
mod seed;

pub use export::{export_flow, FlowFormat};
pub use graph::{
    build_flow, EdgeRef, FlowContext, FlowEdge, FlowGraph, IntegrityError, LatencyRow, FLOW_VERSION, TF_TOPIC,
};
pub use kinds::{edge_key, FlowEdgeKind};
pub use seed::{resolve_owner, resolve_seed, Direction, SeedError, SeedSelector, SeedTarget};
