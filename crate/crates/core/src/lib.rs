//! Iterative hierarchical optimization for misspecified problems: learn one
//! option per partition class, stitch them with an inter-option policy, and
//! optionally relearn the partition through value-based option
//! interruption.

pub mod env;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod ihomp;
pub mod io;
pub mod learning;
pub mod mdp;
pub mod options;
pub mod partition;
pub mod rng;
pub mod state;

pub use error::{Error, Result};
pub use grid::Grid;
pub use mdp::{EnvModel, TabularMdp, Trajectory, Transition};
pub use partition::{grid_partition, Partition};
pub use state::{Bounds, EnvState};
