use std::sync::Arc;

use crate::env::{gridworld_grid, make_gridworld};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::learning::{FeatureMap, QEstimate, SolveOutcome, ValueEstimate};
use crate::mdp::{evaluate_policy_exact, policy_iteration, solve_markov_chain, PolicyTable, TabularMdp};
use crate::options::{HierPolicy, PolicyParams};
use crate::partition::{grid_partition, Partition};
use crate::state::EnvState;

use super::{Backend, CurvePoint};

/// A tabular MDP laid out on a lattice so that the geometric partition and
/// the policy families apply to it; state `s` sits at the centre of cell `s`.
#[derive(Clone, Debug)]
pub struct TabularProblem {
    pub mdp: TabularMdp,
    pub lattice: Grid,
    pub start: usize,
    pub partition: Arc<Partition>,
    classes: Vec<usize>,
}

impl TabularProblem {
    pub fn new(mdp: TabularMdp, lattice: Grid, start: usize, partition: Arc<Partition>) -> Result<Self> {
        if lattice.n_cells() != mdp.n_states() {
            return Err(Error::InvalidSpec(format!(
                "lattice has {} cells for {} states",
                lattice.n_cells(),
                mdp.n_states()
            )));
        }
        if start >= mdp.n_states() {
            return Err(Error::OutOfRange {
                index: start,
                len: mdp.n_states(),
            });
        }
        let classes = (0..mdp.n_states())
            .map(|s| partition.class_index(&lattice.cell_center(s)))
            .collect();
        Ok(TabularProblem {
            mdp,
            lattice,
            start,
            partition,
            classes,
        })
    }

    /// Gridworld with a grid partition of `counts` classes over its lattice.
    pub fn gridworld(
        width: usize,
        height: usize,
        goal: (usize, usize),
        noise: f64,
        gamma: f64,
        counts: &[usize],
        start: usize,
    ) -> Result<Self> {
        let mdp = make_gridworld(width, height, goal, noise, gamma)?;
        let lattice = gridworld_grid(width, height)?;
        let partition = Arc::new(grid_partition(lattice.bounds().clone(), counts)?);
        TabularProblem::new(mdp, lattice, start, partition)
    }

    pub fn class_of(&self, s: usize) -> usize {
        self.classes[s]
    }

    pub fn center(&self, s: usize) -> EnvState {
        self.lattice.cell_center(s)
    }

    pub fn features(&self) -> FeatureMap {
        FeatureMap::BinaryGrid(self.lattice.clone())
    }

    pub fn value_estimate(&self, v: Vec<f64>) -> ValueEstimate {
        ValueEstimate::Linear {
            features: self.features(),
            weights: v,
        }
    }

    pub fn states_in(&self, class: usize) -> Vec<usize> {
        (0..self.mdp.n_states()).filter(|&s| self.classes[s] == class).collect()
    }

    /// Local-MDP of `class` with exit value `v` (one entry per state): class
    /// states in ascending order, then an absorbing end state. Leaving the
    /// class pays `gamma * v(s')` on top of `R(s, a)`.
    pub fn local_mdp(&self, class: usize, v: &[f64]) -> Result<(TabularMdp, Vec<usize>)> {
        let states = self.states_in(class);
        if states.is_empty() {
            return Err(Error::Domain(format!("class {class} contains no states")));
        }
        let n = states.len();
        let mut local = vec![usize::MAX; self.mdp.n_states()];
        for (k, &s) in states.iter().enumerate() {
            local[s] = k;
        }
        let n_actions = self.mdp.n_actions();
        let gamma = self.mdp.gamma();
        let mut kernel = Vec::with_capacity((n + 1) * n_actions);
        let mut rewards = Vec::with_capacity((n + 1) * n_actions);
        for &s in &states {
            for a in 0..n_actions {
                let mut row = Vec::new();
                let mut exit_mass = 0.0;
                let mut r = self.mdp.reward(s, a);
                for &(t, p) in self.mdp.transitions(s, a) {
                    if local[t] == usize::MAX {
                        exit_mass += p;
                        r += gamma * p * v[t];
                    } else {
                        row.push((local[t], p));
                    }
                }
                if exit_mass > 0.0 {
                    row.push((n, exit_mass));
                }
                kernel.push(row);
                rewards.push(r);
            }
        }
        for _ in 0..n_actions {
            kernel.push(vec![(n, 1.0)]);
            rewards.push(0.0);
        }
        Ok((TabularMdp::new(n + 1, n_actions, gamma, kernel, rewards)?, states))
    }

    /// `policy` restricted to `states`, with a row for the end state.
    fn local_policy(&self, policy: &PolicyParams, states: &[usize]) -> PolicyTable {
        let mut table: PolicyTable = states.iter().map(|&s| policy.action_distribution(&self.center(s))).collect();
        table.push(vec![1.0 / self.mdp.n_actions() as f64; self.mdp.n_actions()]);
        table
    }

    /// Exact optimum of the Local-MDP of `class`, written into a lattice
    /// table that keeps `current`'s behaviour outside the class.
    pub fn solve_local(&self, class: usize, v: &[f64], current: &PolicyParams) -> Result<(PolicyParams, Vec<f64>)> {
        let (local, states) = self.local_mdp(class, v)?;
        let (lv, actions) = policy_iteration(&local);
        let n_actions = self.mdp.n_actions();
        let mut probs = Vec::with_capacity(self.mdp.n_states() * n_actions);
        for s in 0..self.mdp.n_states() {
            if self.classes[s] == class {
                let k = states.binary_search(&s).expect("class state");
                probs.extend((0..n_actions).map(|a| f64::from(u8::from(a == actions[k]))));
            } else {
                probs.extend(current.action_distribution(&self.center(s)));
            }
        }
        let policy = PolicyParams::table(self.lattice.clone(), n_actions, probs)?;
        Ok((policy, lv[..states.len()].to_vec()))
    }

    /// Per-class suboptimality of the options in their own Local-MDPs
    /// built from the exact value of `hier`.
    pub fn misspecification(&self, hier: &HierPolicy) -> Result<Vec<f64>> {
        let v = exact_hier_values(self, hier)?;
        (0..hier.option_count())
            .map(|i| {
                let (local, states) = self.local_mdp(i, &v)?;
                let (best, _) = policy_iteration(&local);
                let own = evaluate_policy_exact(&local, &self.local_policy(&hier.option(i).policy, &states))?;
                Ok((0..states.len()).map(|k| best[k] - own[k]).fold(0.0, f64::max))
            })
            .collect()
    }
}

/// Exact value of executing `hier` from every state, via the Markov chain
/// over (state, running option) pairs.
pub fn exact_hier_values(problem: &TabularProblem, hier: &HierPolicy) -> Result<Vec<f64>> {
    let mdp = &problem.mdp;
    let (n, m) = (mdp.n_states(), hier.option_count());
    let centers: Vec<EnvState> = (0..n).map(|s| problem.center(s)).collect();
    let selected: Vec<usize> = centers.iter().map(|c| hier.select(c)).collect();
    // next[j][s']: option running after arriving at s' with option j.
    let next: Vec<Vec<usize>> = (0..m)
        .map(|j| {
            (0..n)
                .map(|t| if hier.terminates(j, &centers[t]) { selected[t] } else { j })
                .collect()
        })
        .collect();
    let mut rows = Vec::with_capacity(n * m);
    let mut rewards = Vec::with_capacity(n * m);
    for (s, c) in centers.iter().enumerate() {
        for j in 0..m {
            let dist = hier.action_distribution(j, c);
            let mut row = Vec::new();
            let mut r = 0.0;
            for (a, &pa) in dist.iter().enumerate() {
                if pa == 0.0 {
                    continue;
                }
                r += pa * mdp.reward(s, a);
                for &(t, p) in mdp.transitions(s, a) {
                    row.push((t * m + next[j][t], pa * p));
                }
            }
            rows.push(row);
            rewards.push(r);
        }
    }
    let w = solve_markov_chain(&rows, &rewards, mdp.gamma());
    Ok((0..n).map(|s| w[s * m + selected[s]]).collect())
}

/// Exact action values over option indices where each option acts for one
/// step and the successor value is `max_j' Q(s', j')`.
pub fn exact_option_q(problem: &TabularProblem, hier: &HierPolicy) -> Result<QEstimate> {
    let mdp = &problem.mdp;
    let (n, m) = (mdp.n_states(), hier.option_count());
    let mut kernel = Vec::with_capacity(n * m);
    let mut rewards = Vec::with_capacity(n * m);
    for s in 0..n {
        let c = problem.center(s);
        for j in 0..m {
            let dist = hier.action_distribution(j, &c);
            let mut row = Vec::new();
            let mut r = 0.0;
            for (a, &pa) in dist.iter().enumerate() {
                if pa == 0.0 {
                    continue;
                }
                r += pa * mdp.reward(s, a);
                row.extend(mdp.transitions(s, a).iter().map(|&(t, p)| (t, pa * p)));
            }
            kernel.push(row);
            rewards.push(r);
        }
    }
    let option_mdp = TabularMdp::new(n, m, mdp.gamma(), kernel, rewards)?;
    let (v, _) = policy_iteration(&option_mdp);
    let weights = (0..m).map(|j| (0..n).map(|s| option_mdp.backup(&v, s, j)).collect()).collect();
    QEstimate::new(problem.features(), weights)
}

/// Exact evaluation, exact per-class solves, exact action values.
#[derive(Clone, Debug)]
pub struct TabularBackend {
    pub problem: TabularProblem,
    pub optimal: Vec<f64>,
    /// `||V* - V||_inf` recorded at every assessment.
    pub sup_errors: Vec<f64>,
}

impl TabularBackend {
    pub fn new(problem: TabularProblem) -> Self {
        let (optimal, _) = policy_iteration(&problem.mdp);
        TabularBackend {
            problem,
            optimal,
            sup_errors: Vec::new(),
        }
    }
}

impl Backend for TabularBackend {
    fn evaluate(&mut self, hier: &HierPolicy, _call: usize) -> Result<Arc<ValueEstimate>> {
        Ok(Arc::new(self.problem.value_estimate(exact_hier_values(&self.problem, hier)?)))
    }

    fn solve(&mut self, hier: &HierPolicy, class: usize, v: Arc<ValueEstimate>, _call: usize) -> Result<SolveOutcome> {
        let values: Vec<f64> = (0..self.problem.mdp.n_states())
            .map(|s| v.value(&self.problem.center(s)))
            .collect();
        let (policy, local) = self.problem.solve_local(class, &values, &hier.option(class).policy)?;
        Ok(SolveOutcome {
            policy,
            score: local.iter().sum::<f64>() / local.len() as f64,
            warning: None,
        })
    }

    fn assess(&mut self, hier: &HierPolicy, iteration: usize) -> Result<CurvePoint> {
        let v = exact_hier_values(&self.problem, hier)?;
        let err = v.iter().zip(&self.optimal).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        self.sup_errors.push(err);
        Ok(CurvePoint {
            iteration,
            mean_return: v[self.problem.start],
            std: 0.0,
            episodes: 0,
            success_rate: f64::NAN,
        })
    }

    fn estimate_q(&mut self, hier: &HierPolicy, _sweep: usize) -> Result<QEstimate> {
        exact_option_q(&self.problem, hier)
    }
}
