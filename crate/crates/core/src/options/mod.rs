//! Options, the stitched hierarchical policy, option execution and
//! Local-MDP construction.

mod exec;
mod hier;
mod policy;

pub use exec::{
    build_local_mdp, execute_option, run_hierarchical, EpisodeStats, HierTrajectory, LocalMdp, LocalStep, OptionOutcome,
    Segment, DEFAULT_OPTION_CAP,
};
pub(crate) use exec::{hier_episode, option_segment};
pub use hier::{roi_beta, HierPolicy, OptionDef, Termination};
pub use policy::{softmax, PolicyParams};
