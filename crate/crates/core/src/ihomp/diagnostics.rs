use crate::env::discretize_local;
use crate::error::{Error, Result};
use crate::learning::ValueEstimate;
use crate::mdp::{evaluate_policy_exact, value_iteration, EnvModel, PolicyTable};
use crate::options::HierPolicy;

use super::tabular::TabularProblem;

/// Lattice used by the continuous misspecification oracle.
pub const ETA_GRID: [usize; 2] = [100, 100];

/// Smallest `K >= log_gamma(epsilon (1 - gamma))`.
pub fn required_iterations(gamma: f64, epsilon: f64) -> Result<usize> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Domain(format!("gamma = {gamma} must lie in (0, 1)")));
    }
    let target = epsilon * (1.0 - gamma);
    if !(epsilon > 0.0 && target < 1.0) {
        return Err(Error::Domain(format!(
            "epsilon = {epsilon} must lie in (0, 1/(1 - gamma))"
        )));
    }
    let k = (target.ln() / gamma.ln()).ceil();
    Ok((k as usize).max(1))
}

/// `reward_span * (m eta / (1 - gamma)^2 + epsilon)`.
pub fn theorem_bound(m: usize, eta: f64, gamma: f64, epsilon: f64, reward_span: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&gamma) || eta < 0.0 || epsilon < 0.0 || reward_span < 0.0 {
        return Err(Error::Domain("bound arguments must be non-negative with gamma < 1".into()));
    }
    Ok(reward_span * (m as f64 * eta / (1.0 - gamma).powi(2) + epsilon))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Misspecification {
    pub per_class: Vec<f64>,
    pub eta: f64,
}

impl Misspecification {
    fn from_classes(per_class: Vec<f64>) -> Self {
        let eta = per_class.iter().copied().fold(0.0, f64::max);
        Misspecification { per_class, eta }
    }
}

pub enum MisspecTarget<'a> {
    /// Exact Local-MDPs of a tabular problem, with the exact value of the
    /// policy as exit value.
    Tabular(&'a TabularProblem),
    /// Two-dimensional continuous environment: each Local-MDP is
    /// approximated on an [`ETA_GRID`] lattice with `samples` draws per
    /// cell and action, using `value` as exit value.
    Continuous {
        env: &'a dyn EnvModel,
        value: &'a ValueEstimate,
        gamma: f64,
        samples: usize,
        seed: u64,
    },
}

/// Per-class `eta_i = max_s V*_{M_i'}(s) - V^{pi_i}_{M_i'}(s)` over the
/// class's probe states, and `eta = max_i eta_i`.
pub fn misspecification_error(target: MisspecTarget<'_>, hier: &HierPolicy) -> Result<Misspecification> {
    match target {
        MisspecTarget::Tabular(problem) => Ok(Misspecification::from_classes(problem.misspecification(hier)?)),
        MisspecTarget::Continuous {
            env,
            value,
            gamma,
            samples,
            seed,
        } => {
            if env.dim() != 2 {
                return Err(Error::Unsupported(format!(
                    "no misspecification oracle for {}-dimensional states",
                    env.dim()
                )));
            }
            let exit = |s: &crate::state::EnvState| value.value(s);
            let per_class = (0..hier.option_count())
                .map(|i| {
                    let d = discretize_local(env, hier.partition(), i, &exit, &ETA_GRID, samples, gamma, seed)?;
                    let (best, _) = value_iteration(&d.mdp, 1e-8)?;
                    let n_actions = env.action_count();
                    let policy: PolicyTable = (0..d.mdp.n_states())
                        .map(|c| {
                            if c < d.grid.n_cells() && d.active[c] {
                                hier.option(i).policy.action_distribution(&d.grid.cell_center(c))
                            } else {
                                vec![1.0 / n_actions as f64; n_actions]
                            }
                        })
                        .collect();
                    let own = evaluate_policy_exact(&d.mdp, &policy)?;
                    Ok((0..d.grid.n_cells())
                        .filter(|&c| d.active[c])
                        .map(|c| best[c] - own[c])
                        .fold(0.0, f64::max))
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(Misspecification::from_classes(per_class))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iteration_counts() {
        assert_eq!(required_iterations(0.9, 0.01).unwrap(), 66);
        assert_eq!(required_iterations(0.99, 0.1).unwrap(), 688);
        assert_eq!(required_iterations(1e-9, 0.5).unwrap(), 1);
        assert!(required_iterations(1.0, 0.1).is_err());
        assert!(required_iterations(0.9, 20.0).is_err());
        assert!(required_iterations(0.9, 0.0).is_err());
    }

    #[test]
    fn bound_examples() {
        assert!((theorem_bound(4, 0.0, 0.9, 0.01, 2.0).unwrap() - 0.02).abs() < 1e-15);
        assert!((theorem_bound(4, 0.01, 0.9, 0.0, 1.0).unwrap() - 4.0).abs() < 1e-9);
        let one = theorem_bound(3, 0.02, 0.8, 0.0, 1.0).unwrap();
        let two = theorem_bound(6, 0.02, 0.8, 0.0, 1.0).unwrap();
        assert!((two - 2.0 * one).abs() < 1e-12);
    }
}
