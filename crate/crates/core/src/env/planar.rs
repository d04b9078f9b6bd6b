//! Shared pieces of the 2-D point-mass navigation tasks.

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::state::{Bounds, EnvState};

pub const ACTION_NORTH: usize = 0;
pub const ACTION_SOUTH: usize = 1;
pub const ACTION_EAST: usize = 2;
pub const ACTION_WEST: usize = 3;

pub(crate) const DIRECTIONS: [[f64; 2]; 4] = [[0.0, 1.0], [0.0, -1.0], [1.0, 0.0], [-1.0, 0.0]];

/// Closed axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisBox {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl AxisBox {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        AxisBox { x0, x1, y0, y1 }
    }

    pub fn contains(&self, s: &[f64]) -> bool {
        s[0] >= self.x0 && s[0] <= self.x1 && s[1] >= self.y0 && s[1] <= self.y1
    }

    pub(crate) fn validate(&self, what: &str) -> Result<()> {
        let ok = [self.x0, self.x1, self.y0, self.y1]
            .iter()
            .all(|v| v.is_finite() && (0.0..=1.0).contains(v))
            && self.x0 < self.x1
            && self.y0 < self.y1;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!("{what} {self:?} is not a box inside the unit square")))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum StartDistribution {
    Fixed(Vec<f64>),
    /// Uniform over a box, rejecting inadmissible and terminal states.
    Uniform(AxisBox),
}

/// Displacement of one step in direction `action` plus isotropic noise.
pub(crate) fn propose(s: &EnvState, action: usize, step: f64, noise_std: f64, rng: &mut Rng) -> EnvState {
    let dir = DIRECTIONS[action];
    let mut next = s.clone();
    for d in 0..2 {
        let eps: f64 = if noise_std > 0.0 {
            noise_std * rng.sample::<f64, _>(StandardNormal)
        } else {
            0.0
        };
        next[d] += step * dir[d] + eps;
    }
    Bounds::unit(2).clamp(&mut next);
    next
}

pub(crate) fn validate_motion(step_size: f64, noise_std: f64) -> Result<()> {
    if !(step_size > 0.0 && step_size.is_finite()) {
        return Err(Error::InvalidSpec(format!("step_size {step_size} must be positive")));
    }
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(Error::InvalidSpec(format!("noise_std {noise_std} must be non-negative")));
    }
    Ok(())
}

pub(crate) fn sample_start<F>(start: &StartDistribution, rng: &mut Rng, accept: F) -> EnvState
where
    F: Fn(&EnvState) -> bool,
{
    match start {
        StartDistribution::Fixed(p) => EnvState::new(p.clone()),
        StartDistribution::Uniform(b) => loop {
            let s = EnvState::new(vec![rng.random_range(b.x0..=b.x1), rng.random_range(b.y0..=b.y1)]);
            if accept(&s) {
                return s;
            }
        },
    }
}
