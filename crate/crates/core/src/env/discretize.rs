//! Sampled lattice approximations of continuous environments, used by the
//! value-iteration baseline and by the misspecification-error oracle.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::mdp::{EnvModel, TabularMdp};
use crate::partition::Partition;
use crate::rng::{self, tag};
use crate::state::EnvState;

/// Tabular model over the cells of `grid`, plus one absorbing end state
/// (index `grid.n_cells()`) that collects terminal and exit transitions.
#[derive(Clone, Debug)]
pub struct Discretized {
    pub grid: Grid,
    pub mdp: TabularMdp,
    /// Cells the model actually represents; others self-loop with zero reward.
    pub active: Vec<bool>,
}

impl Discretized {
    pub fn end_state(&self) -> usize {
        self.grid.n_cells()
    }

    pub fn state_of(&self, s: &[f64]) -> usize {
        self.grid.cell_of(s)
    }

    pub fn value_at(&self, v: &[f64], s: &[f64]) -> f64 {
        v[self.state_of(s)]
    }
}

enum Outcome {
    Cell(usize),
    End(f64),
}

fn build<E, F>(env: &E, grid: Grid, samples: usize, gamma: f64, seed: u64, active: Vec<bool>, classify: F) -> Result<Discretized>
where
    E: EnvModel + ?Sized,
    F: Fn(usize, &EnvState, bool) -> Outcome + Sync,
{
    if samples == 0 {
        return Err(Error::Domain("discretization needs at least one sample per cell".into()));
    }
    let n_cells = grid.n_cells();
    let n_actions = env.action_count();
    let end = n_cells;
    let rows: Vec<(Vec<Vec<(usize, f64)>>, Vec<f64>)> = (0..n_cells)
        .into_par_iter()
        .map(|cell| {
            if !active[cell] {
                return (vec![vec![(cell, 1.0)]; n_actions], vec![0.0; n_actions]);
            }
            let centre = grid.cell_center(cell);
            if env.is_terminal(&centre) {
                return (vec![vec![(end, 1.0)]; n_actions], vec![0.0; n_actions]);
            }
            let mut rng = rng::stream(seed, tag::DISCRETIZE, cell as u64);
            let w = 1.0 / samples as f64;
            let mut kernel = Vec::with_capacity(n_actions);
            let mut rewards = Vec::with_capacity(n_actions);
            for a in 0..n_actions {
                let mut row = Vec::with_capacity(samples);
                let mut reward = 0.0;
                for _ in 0..samples {
                    let t = env.step(&centre, a, &mut rng);
                    reward += w * t.reward;
                    match classify(cell, &t.next, t.terminal) {
                        Outcome::Cell(c) => row.push((c, w)),
                        Outcome::End(bonus) => {
                            reward += w * bonus;
                            row.push((end, w));
                        }
                    }
                }
                kernel.push(row);
                rewards.push(reward);
            }
            (kernel, rewards)
        })
        .collect();
    let mut kernel = Vec::with_capacity((n_cells + 1) * n_actions);
    let mut rewards = Vec::with_capacity((n_cells + 1) * n_actions);
    for (k, r) in rows {
        kernel.extend(k);
        rewards.extend(r);
    }
    kernel.extend(std::iter::repeat_n(vec![(end, 1.0)], n_actions));
    rewards.extend(std::iter::repeat_n(0.0, n_actions));
    // Sample weights are 1/samples each; renormalize rows against round-off.
    for row in &mut kernel {
        let total: f64 = row.iter().map(|e| e.1).sum();
        for e in row.iter_mut() {
            e.1 /= total;
        }
    }
    let mdp = TabularMdp::new(n_cells + 1, n_actions, gamma, kernel, rewards)?;
    Ok(Discretized { grid, mdp, active })
}

/// Lattice model of `env` with `counts` cells per dimension, estimating each
/// cell's dynamics from `samples` steps taken at the cell centre.
pub fn discretize<E: EnvModel + ?Sized>(env: &E, counts: &[usize], samples: usize, gamma: f64, seed: u64) -> Result<Discretized> {
    let grid = Grid::new(env.bounds().clone(), counts.to_vec())?;
    let active: Vec<bool> = (0..grid.n_cells())
        .map(|c| env.is_admissible(&grid.cell_center(c)))
        .collect();
    let lookup = grid.clone();
    let act = active.clone();
    build(env, grid, samples, gamma, seed, active, move |cell, next, terminal| {
        if terminal {
            return Outcome::End(0.0);
        }
        let c = lookup.cell_of(next);
        Outcome::Cell(if act[c] { c } else { cell })
    })
}

/// Lattice model of the Local-MDP for `class`: cells whose centre lies in the
/// class are modelled; leaving the class ends the episode with bonus
/// `gamma * exit_value(s')`, reaching an environment terminal ends it with no
/// bonus.
#[allow(clippy::too_many_arguments)]
pub fn discretize_local<E, V>(
    env: &E,
    partition: &Partition,
    class: usize,
    exit_value: &V,
    counts: &[usize],
    samples: usize,
    gamma: f64,
    seed: u64,
) -> Result<Discretized>
where
    E: EnvModel + ?Sized,
    V: Fn(&EnvState) -> f64 + Sync + ?Sized,
{
    if class >= partition.class_count() {
        return Err(Error::OutOfRange {
            index: class,
            len: partition.class_count(),
        });
    }
    let grid = Grid::new(env.bounds().clone(), counts.to_vec())?;
    let active: Vec<bool> = (0..grid.n_cells())
        .map(|c| {
            let centre = grid.cell_center(c);
            env.is_admissible(&centre) && partition.class_index(&centre) == class
        })
        .collect();
    let lookup = grid.clone();
    let act = active.clone();
    build(env, grid, samples, gamma, seed, active, move |cell, next, terminal| {
        if terminal {
            return Outcome::End(0.0);
        }
        if partition.class_index(next) != class {
            return Outcome::End(gamma * exit_value(next));
        }
        let c = lookup.cell_of(next);
        Outcome::Cell(if act[c] { c } else { cell })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{make_puddle_world, PuddleSpec};
    use crate::mdp::value_iteration;
    use crate::partition::grid_partition;
    use crate::state::Bounds;

    #[test]
    fn rows_are_stochastic_and_goal_cells_are_worth_nothing() {
        let env = make_puddle_world(PuddleSpec::default()).unwrap();
        let d = discretize(&env, &[20, 20], 4, 0.95, 3).unwrap();
        assert_eq!(d.mdp.n_states(), 401);
        let (v, _) = value_iteration(&d.mdp, 1e-8).unwrap();
        assert_eq!(d.value_at(&v, &[0.99, 0.99]), 0.0);
        assert!(d.value_at(&v, &[0.1, 0.1]) < d.value_at(&v, &[0.9, 0.9]));
    }

    #[test]
    fn local_model_pays_exit_bonus() {
        let env = make_puddle_world(PuddleSpec::default()).unwrap();
        let p = grid_partition(Bounds::unit(2), &[2, 1]).unwrap();
        let bonus = |_: &EnvState| 100.0;
        let d = discretize_local(&env, &p, 0, &bonus, &[20, 20], 2, 0.9, 0).unwrap();
        // Right half is outside the class and never modelled.
        assert!(!d.active[19]);
        assert!(d.active[0]);
        let (v, _) = value_iteration(&d.mdp, 1e-8).unwrap();
        // Next to the boundary, stepping east exits at once: -1 + 0.9 * 100.
        let s = d.state_of(&[0.475, 0.05]);
        assert!((v[s] - 89.0).abs() < 1.0, "{}", v[s]);
    }
}
