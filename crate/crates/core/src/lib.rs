//! Leader-follower consensus under prescribed performance control.
//!
//! Agents on a tree run the first-order consensus protocol; only the leaders
//! receive the prescribed-performance input that keeps every relative state
//! inside an exponentially shrinking funnel. The crate
//!
//! - builds tree topologies and their incidence / Laplacian matrices ([`graph`]),
//! - evaluates the per-edge funnel transformation ([`performance`]),
//! - simulates the closed loop with funnel and Lyapunov monitoring ([`sim`]),
//! - certifies decay rates before simulation ([`certify`]),
//! - loads, runs and serialises scenarios ([`scenario`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certify;
pub mod graph;
pub mod performance;
pub mod scenario;
pub mod sim;

pub use certify::{certify, FeasibilityReport, GammaBar, Method};
pub use graph::{build_topology, derive_matrices, make_chain, make_star, DerivedMatrices, GraphError, Topology};
pub use performance::{EdgeChannel, FunnelError, PerformanceSpec};
pub use scenario::{load_scenario, preset, run, RunSummary, Scenario, ScenarioError};
pub use sim::{integrate, Mode, SimConfig, SimError, SimTrace};
