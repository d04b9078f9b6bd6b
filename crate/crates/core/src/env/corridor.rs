use crate::error::{Error, Result};
use crate::mdp::{EnvModel, Transition};
use crate::rng::Rng;
use crate::state::{Bounds, EnvState};

use super::planar::{propose, sample_start, validate_motion, AxisBox, StartDistribution};

/// Point mass confined to a union of rectangles; moves that would leave the
/// union are rejected.
#[derive(Clone, Debug, PartialEq)]
pub struct CorridorSpec {
    pub rects: Vec<AxisBox>,
    pub goal: AxisBox,
    pub step_size: f64,
    pub noise_std: f64,
    pub step_cost: f64,
    pub start: StartDistribution,
}

#[derive(Clone, Debug)]
pub struct CorridorWorld {
    spec: CorridorSpec,
    bounds: Bounds,
}

pub fn make_corridor(spec: CorridorSpec) -> Result<CorridorWorld> {
    validate_motion(spec.step_size, spec.noise_std)?;
    if spec.rects.is_empty() {
        return Err(Error::InvalidSpec("corridor needs at least one rectangle".into()));
    }
    for r in &spec.rects {
        r.validate("corridor rectangle")?;
    }
    spec.goal.validate("goal")?;
    let world = CorridorWorld {
        spec,
        bounds: Bounds::unit(2),
    };
    if let StartDistribution::Fixed(p) = &world.spec.start {
        if !world.inside(p) {
            return Err(Error::InvalidSpec(format!("start {p:?} is outside the corridor")));
        }
    }
    Ok(world)
}

/// S-shaped corridor: three horizontal bars joined by a connector on the
/// right (bottom to middle) and one on the left (middle to top). Reaching
/// the goal needs east, north, west, north and east legs in turn.
pub fn make_s_corridor() -> CorridorWorld {
    make_corridor(CorridorSpec {
        rects: vec![
            AxisBox::new(0.0, 1.0, 0.0, 0.2),
            AxisBox::new(0.8, 1.0, 0.2, 0.4),
            AxisBox::new(0.0, 1.0, 0.4, 0.6),
            AxisBox::new(0.0, 0.2, 0.6, 0.8),
            AxisBox::new(0.0, 1.0, 0.8, 1.0),
        ],
        goal: AxisBox::new(0.85, 1.0, 0.85, 1.0),
        step_size: 0.05,
        noise_std: 0.005,
        step_cost: 1.0,
        start: StartDistribution::Fixed(vec![0.1, 0.1]),
    })
    .expect("built-in corridor is valid")
}

impl CorridorWorld {
    pub fn spec(&self) -> &CorridorSpec {
        &self.spec
    }

    pub fn inside(&self, s: &[f64]) -> bool {
        self.spec.rects.iter().any(|r| r.contains(s))
    }
}

impl EnvModel for CorridorWorld {
    fn name(&self) -> &str {
        "corridor"
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

    fn is_admissible(&self, s: &EnvState) -> bool {
        self.inside(s)
    }

    fn step(&self, s: &EnvState, action: usize, rng: &mut Rng) -> Transition {
        let proposed = propose(s, action, self.spec.step_size, self.spec.noise_std, rng);
        let mid = [0.5 * (s[0] + proposed[0]), 0.5 * (s[1] + proposed[1])];
        let next = if self.inside(&proposed) && self.inside(&mid) {
            proposed
        } else {
            s.clone()
        };
        let terminal = self.is_terminal(&next);
        Transition {
            next,
            reward: -self.spec.step_cost,
            terminal,
        }
    }

    fn initial_state(&self, rng: &mut Rng) -> EnvState {
        sample_start(&self.spec.start, rng, |s| self.inside(s) && !self.is_terminal(s))
    }
}
