//! Policy evaluation (SMDP-LSTD, nearest-neighbour rollouts, SMDP-LSTDQ)
//! and intra-option policy learners (actor-critic, UCB random policy
//! search).

mod actor_critic;
pub(crate) mod features;
mod lstd;
mod refresh;
mod ucb;
pub(crate) mod value;

pub use actor_critic::{actor_critic_solve, ActorCriticConfig};
pub use features::FeatureMap;
pub use lstd::{
    smdp_lstd, smdp_lstdq, LstdqOptions, LstdqResult, SmdpSample, DEFAULT_LSTDQ_SWEEPS, DEFAULT_LSTDQ_TOL, DEFAULT_RIDGE,
};
pub use refresh::refresh_nn_values;
pub use ucb::{ucb_rps_solve, Ucb1, UcbRpsConfig};
pub use value::{nn_value, KdTree, NnValue, QEstimate, ValueEstimate};

use crate::options::PolicyParams;

/// A Local-MDP solution with the solver's own estimate of its quality.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveOutcome {
    pub policy: PolicyParams,
    pub score: f64,
    pub warning: Option<String>,
}
