//! Tabular gridworlds and an [`EnvModel`] view of any tabular MDP laid out
//! on a lattice.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::mdp::{sample_action, EnvModel, TabularMdp, Transition};
use crate::rng::Rng;
use crate::state::{Bounds, EnvState};

use super::planar::DIRECTIONS;

const MAX_CELLS: usize = 10_000;

/// Lattice whose cell `row * width + col` is state `row * width + col`,
/// spanning `[0, width] x [0, height]` so cell centres sit at half-integers.
pub fn gridworld_grid(width: usize, height: usize) -> Result<Grid> {
    Grid::new(
        Bounds::new(vec![0.0, 0.0], vec![width as f64, height as f64])?,
        vec![width, height],
    )
}

/// Four-action gridworld (north, south, east, west). With probability
/// `noise` the move goes in a uniformly random direction instead; moves off
/// the grid stay put. The goal cell is absorbing and pays 1 per step.
pub fn make_gridworld(width: usize, height: usize, goal: (usize, usize), noise: f64, gamma: f64) -> Result<TabularMdp> {
    if width == 0 || height == 0 || width * height > MAX_CELLS {
        return Err(Error::InvalidSpec(format!(
            "gridworld {width}x{height} must have between 1 and {MAX_CELLS} cells"
        )));
    }
    let (gc, gr) = goal;
    if gc >= width || gr >= height {
        return Err(Error::InvalidSpec(format!(
            "goal cell ({gc}, {gr}) is outside the {width}x{height} grid"
        )));
    }
    if !(0.0..=1.0).contains(&noise) {
        return Err(Error::InvalidSpec(format!("slip probability {noise} is outside [0, 1]")));
    }
    let n = width * height;
    let goal_state = gr * width + gc;
    let target = |s: usize, dir: usize| -> usize {
        let (c, r) = ((s % width) as i64, (s / width) as i64);
        let [dx, dy] = DIRECTIONS[dir];
        let (nc, nr) = (c + dx as i64, r + dy as i64);
        if nc < 0 || nr < 0 || nc >= width as i64 || nr >= height as i64 {
            s
        } else {
            nr as usize * width + nc as usize
        }
    };
    let mut kernel = Vec::with_capacity(n * 4);
    let mut rewards = Vec::with_capacity(n * 4);
    for s in 0..n {
        for a in 0..4 {
            if s == goal_state {
                kernel.push(vec![(s, 1.0)]);
                rewards.push(1.0);
                continue;
            }
            let mut row = vec![(target(s, a), 1.0 - noise)];
            row.extend((0..4).map(|d| (target(s, d), noise / 4.0)));
            kernel.push(row);
            rewards.push(0.0);
        }
    }
    TabularMdp::new(n, 4, gamma, kernel, rewards)
}

/// Samples a [`TabularMdp`] as a continuous-state environment: the state is
/// the centre of the lattice cell for each tabular state.
#[derive(Clone, Debug)]
pub struct TabularEnv {
    mdp: TabularMdp,
    grid: Grid,
    start: usize,
    reward_range: (f64, f64),
}

impl TabularEnv {
    pub fn new(mdp: TabularMdp, grid: Grid, start: usize) -> Result<Self> {
        if grid.n_cells() != mdp.n_states() {
            return Err(Error::InvalidSpec(format!(
                "lattice has {} cells for {} states",
                grid.n_cells(),
                mdp.n_states()
            )));
        }
        if start >= mdp.n_states() {
            return Err(Error::OutOfRange {
                index: start,
                len: mdp.n_states(),
            });
        }
        let reward_range = mdp.reward_range();
        Ok(TabularEnv {
            mdp,
            grid,
            start,
            reward_range,
        })
    }

    pub fn mdp(&self) -> &TabularMdp {
        &self.mdp
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn state_of(&self, s: &[f64]) -> usize {
        self.grid.cell_of(s)
    }

    pub fn coords(&self, state: usize) -> EnvState {
        self.grid.cell_center(state)
    }
}

impl EnvModel for TabularEnv {
    fn name(&self) -> &str {
        "tabular"
    }

    fn action_count(&self) -> usize {
        self.mdp.n_actions()
    }

    fn bounds(&self) -> &Bounds {
        self.grid.bounds()
    }

    fn reward_range(&self) -> (f64, f64) {
        self.reward_range
    }

    fn is_terminal(&self, _s: &EnvState) -> bool {
        false
    }

    fn step(&self, s: &EnvState, action: usize, rng: &mut Rng) -> Transition {
        let i = self.state_of(s);
        let row = self.mdp.transitions(i, action);
        let probs: Vec<f64> = row.iter().map(|e| e.1).collect();
        let next = row[sample_action(&probs, rng)].0;
        Transition {
            next: self.coords(next),
            reward: self.mdp.reward(i, action),
            terminal: false,
        }
    }

    fn initial_state(&self, _rng: &mut Rng) -> EnvState {
        self.coords(self.start)
    }

    fn sample_state(&self, rng: &mut Rng) -> EnvState {
        use rand::Rng as _;
        self.coords(rng.random_range(0..self.mdp.n_states()))
    }
}
