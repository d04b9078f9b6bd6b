use crate::error::{Error, Result};
use crate::mdp::{EnvModel, Transition};
use crate::rng::Rng;
use crate::state::{Bounds, EnvState};

use super::planar::{propose, sample_start, validate_motion, AxisBox, StartDistribution};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WallAxis {
    /// The wall lies on the line `x = at`.
    Vertical { at: f64 },
    /// The wall lies on the line `y = at`.
    Horizontal { at: f64 },
}

/// Axis-aligned wall spanning `[from, to]` along its line, with openings.
#[derive(Clone, Debug, PartialEq)]
pub struct Wall {
    pub axis: WallAxis,
    pub from: f64,
    pub to: f64,
    pub gaps: Vec<(f64, f64)>,
}

impl Wall {
    /// Does the straight move `s -> t` pass through solid wall?
    pub fn blocks(&self, s: &[f64], t: &[f64]) -> bool {
        let (across, along, at) = match self.axis {
            WallAxis::Vertical { at } => (0, 1, at),
            WallAxis::Horizontal { at } => (1, 0, at),
        };
        if (s[across] < at) == (t[across] < at) {
            return false;
        }
        let frac = (at - s[across]) / (t[across] - s[across]);
        let hit = s[along] + frac * (t[along] - s[along]);
        if hit < self.from || hit > self.to {
            return false;
        }
        !self.gaps.iter().any(|&(g0, g1)| hit > g0 && hit < g1)
    }

    fn validate(&self) -> Result<()> {
        let at = match self.axis {
            WallAxis::Vertical { at } | WallAxis::Horizontal { at } => at,
        };
        if !(0.0..=1.0).contains(&at) || !(self.from < self.to) {
            return Err(Error::InvalidSpec(format!("wall {self:?} is degenerate")));
        }
        for &(g0, g1) in &self.gaps {
            if !(g0 >= self.from && g1 <= self.to && g0 < g1) {
                return Err(Error::InvalidSpec(format!(
                    "gap ({g0}, {g1}) is not inside wall extent [{}, {}]",
                    self.from, self.to
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoomsSpec {
    pub walls: Vec<Wall>,
    pub goal: AxisBox,
    pub step_size: f64,
    pub noise_std: f64,
    pub step_cost: f64,
    pub start: StartDistribution,
}

impl Default for RoomsSpec {
    /// Left and right rooms split by a wall at `x = 0.5` with a single
    /// opening near the floor; the agent starts in the upper-left corner
    /// and the goal sits in the upper-right corner.
    fn default() -> Self {
        RoomsSpec {
            walls: vec![Wall {
                axis: WallAxis::Vertical { at: 0.5 },
                from: 0.0,
                to: 1.0,
                gaps: vec![(0.0, 0.25)],
            }],
            goal: AxisBox::new(0.85, 1.0, 0.85, 1.0),
            step_size: 0.05,
            noise_std: 0.01,
            step_cost: 1.0,
            start: StartDistribution::Fixed(vec![0.1, 0.9]),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TwoRooms {
    spec: RoomsSpec,
    bounds: Bounds,
}

pub fn make_two_rooms(spec: RoomsSpec) -> Result<TwoRooms> {
    validate_motion(spec.step_size, spec.noise_std)?;
    for w in &spec.walls {
        w.validate()?;
    }
    spec.goal.validate("goal")?;
    Ok(TwoRooms {
        spec,
        bounds: Bounds::unit(2),
    })
}

impl TwoRooms {
    pub fn spec(&self) -> &RoomsSpec {
        &self.spec
    }
}

impl EnvModel for TwoRooms {
    fn name(&self) -> &str {
        "two-rooms"
    }

    fn action_count(&self) -> usize {
        4
    }

    fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    fn reward_range(&self) -> (f64, f64) {
        (-self.spec.step_cost, 0.0)
    }

    fn is_terminal(&self, s: &EnvState) -> bool {
        self.spec.goal.contains(s)
    }

    fn step(&self, s: &EnvState, action: usize, rng: &mut Rng) -> Transition {
        let proposed = propose(s, action, self.spec.step_size, self.spec.noise_std, rng);
        let next = if self.spec.walls.iter().any(|w| w.blocks(s, &proposed)) {
            s.clone()
        } else {
            proposed
        };
        let terminal = self.is_terminal(&next);
        Transition {
            next,
            reward: -self.spec.step_cost,
            terminal,
        }
    }

    fn initial_state(&self, rng: &mut Rng) -> EnvState {
        sample_start(&self.spec.start, rng, |s| !self.is_terminal(s))
    }
}
