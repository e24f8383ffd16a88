//! Communication graphs and their gossip matrices.

mod gossip;
mod graph;
mod schedule;

pub use gossip::{GossipMatrix, WeightScheme};
pub use graph::{squarest_rows, Topology, TopologyKind};
pub use schedule::GossipSchedule;
