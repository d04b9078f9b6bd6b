use rand::Rng as _;

use crate::error::{Error, Result};
use crate::mdp::{EnvModel, Transition};
use crate::rng::Rng;
use crate::state::{Bounds, EnvState};

/// Classic under-powered car constants.
#[derive(Clone, Debug, PartialEq)]
pub struct MountainCarSpec {
    pub min_position: f64,
    pub max_position: f64,
    pub max_speed: f64,
    pub goal_position: f64,
    pub force: f64,
    pub gravity: f64,
    pub start_position: (f64, f64),
}

impl Default for MountainCarSpec {
    fn default() -> Self {
        MountainCarSpec {
            min_position: -1.2,
            max_position: 0.6,
            max_speed: 0.07,
            goal_position: 0.5,
            force: 0.001,
            gravity: 0.0025,
            start_position: (-0.6, -0.4),
        }
    }
}

#[derive(Clone, Debug)]
pub struct MountainCar {
    spec: MountainCarSpec,
    bounds: Bounds,
}

pub fn make_mountain_car(spec: MountainCarSpec) -> Result<MountainCar> {
    let bounds = Bounds::new(
        vec![spec.min_position, -spec.max_speed],
        vec![spec.max_position, spec.max_speed],
    )?;
    let (lo, hi) = spec.start_position;
    if !(spec.min_position <= lo && lo <= hi && hi < spec.goal_position && spec.goal_position <= spec.max_position) {
        return Err(Error::InvalidSpec(format!("mountain car positions are inconsistent: {spec:?}")));
    }
    Ok(MountainCar { spec, bounds })
}

impl MountainCar {
    pub fn spec(&self) -> &MountainCarSpec {
        &self.spec
    }
}

impl EnvModel for MountainCar {
    fn name(&self) -> &str {
        "mountain-car"
    }

    /// 0: push left, 1: coast, 2: push right.
    fn action_count(&self) -> usize {
        3
    }

    fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    fn reward_range(&self) -> (f64, f64) {
        (-1.0, 0.0)
    }

    fn is_terminal(&self, s: &EnvState) -> bool {
        s[0] >= self.spec.goal_position
    }

    fn step(&self, s: &EnvState, action: usize, _rng: &mut Rng) -> Transition {
        let sp = &self.spec;
        let mut velocity = s[1] + (action as f64 - 1.0) * sp.force - sp.gravity * (3.0 * s[0]).cos();
        velocity = velocity.clamp(-sp.max_speed, sp.max_speed);
        let mut position = (s[0] + velocity).clamp(sp.min_position, sp.max_position);
        if position <= sp.min_position && velocity < 0.0 {
            position = sp.min_position;
            velocity = 0.0;
        }
        let next = EnvState::new(vec![position, velocity]);
        let terminal = self.is_terminal(&next);
        Transition {
            next,
            reward: -1.0,
            terminal,
        }
    }

    fn initial_state(&self, rng: &mut Rng) -> EnvState {
        let (lo, hi) = self.spec.start_position;
        EnvState::new(vec![rng.random_range(lo..=hi), 0.0])
    }
}
