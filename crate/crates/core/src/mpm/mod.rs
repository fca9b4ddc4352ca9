//! Explicit MLS-MPM engine for hard-magnetic elastomers.

pub mod constitutive;
pub mod grid;
pub mod kernel;
pub mod settle;
pub mod snapshot;
pub mod transfer;

pub use constitutive::{elastic_stress, magnetic_couple, magnetic_stress, Material};
pub use grid::{BackgroundGrid, GridNode, NodeFlag};
pub use kernel::Stencil;
pub use settle::{
    settle, stable_dt, ClampRegion, EquilibriumState, SettleFailure, SimConfig, TimeStep,
};
pub use snapshot::{read_snapshot, write_snapshot, Snapshot};
pub use transfer::{g2p, grid_update, p2g, particle_momentum, Loads, Parallelism, MASS_EPSILON};
