use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mdp::EnvModel;
use crate::options::{hier_episode, HierPolicy};
use crate::rng::{self, tag};
use crate::state::EnvState;

use super::value::{NnValue, ValueEstimate};

/// Nearest-neighbour evaluation of `hier`: each anchor's value is the mean
/// discounted return of `rollouts` hierarchical episodes started there.
#[allow(clippy::too_many_arguments)]
pub fn refresh_nn_values<E: EnvModel + ?Sized>(
    env: &E,
    hier: &HierPolicy,
    anchors: &[EnvState],
    rollouts: usize,
    step_cap: usize,
    option_cap: usize,
    gamma: f64,
    seed: u64,
) -> Result<ValueEstimate> {
    if rollouts == 0 {
        return Err(Error::Domain("rollouts per anchor must be at least 1".into()));
    }
    let values = anchors
        .par_iter()
        .enumerate()
        .map(|(k, s)| {
            let mut total = 0.0;
            for r in 0..rollouts {
                let mut rng = rng::stream(seed, tag::NN_REFRESH, (k * rollouts + r) as u64);
                total += hier_episode(env, hier, s, step_cap, option_cap, gamma, &mut rng, None)?.discounted;
            }
            Ok(total / rollouts as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(ValueEstimate::NearestNeighbor(NnValue::new(anchors.to_vec(), values)?))
}
