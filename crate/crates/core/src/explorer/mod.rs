//! Explicit-state exploration of a [`System`](crate::kernel::System).

pub mod dot;
pub mod program;
pub mod search;
pub mod trace;

pub use dot::{export_dot, GraphNotRetained};
pub use program::{FullState, Node, Program, Successor, TaskProgram, END};
pub use search::{
    explore, CheckReport, Edge, ExploreOptions, Graph, Invariant, LimitKind, Limits, ModelError, Violation,
};
pub use trace::{config_digest, random_walk, replay, replays, state_digest, ReplayError, Trace, TraceStep};
