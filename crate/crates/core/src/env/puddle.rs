use crate::error::{Error, Result};
use crate::mdp::{EnvModel, Transition};
use crate::rng::Rng;
use crate::state::{Bounds, EnvState};

use super::planar::{propose, sample_start, validate_motion, AxisBox, StartDistribution};

/// Segment `a`-`b` thickened by `radius`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Capsule {
    pub a: [f64; 2],
    pub b: [f64; 2],
    pub radius: f64,
}

impl Capsule {
    pub fn distance(&self, p: &[f64]) -> f64 {
        let (ax, ay) = (self.a[0], self.a[1]);
        let (dx, dy) = (self.b[0] - ax, self.b[1] - ay);
        let len2 = dx * dx + dy * dy;
        let t = if len2 == 0.0 {
            0.0
        } else {
            (((p[0] - ax) * dx + (p[1] - ay) * dy) / len2).clamp(0.0, 1.0)
        };
        let (cx, cy) = (ax + t * dx, ay + t * dy);
        ((p[0] - cx).powi(2) + (p[1] - cy).powi(2)).sqrt()
    }

    pub fn depth(&self, p: &[f64]) -> f64 {
        (self.radius - self.distance(p)).max(0.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PuddleSpec {
    pub puddles: Vec<Capsule>,
    pub puddle_cost_scale: f64,
    pub step_size: f64,
    pub noise_std: f64,
    pub goal: AxisBox,
    pub step_cost: f64,
    pub start: StartDistribution,
}

impl Default for PuddleSpec {
    fn default() -> Self {
        PuddleSpec {
            puddles: vec![
                Capsule {
                    a: [0.1, 0.75],
                    b: [0.45, 0.75],
                    radius: 0.1,
                },
                Capsule {
                    a: [0.45, 0.4],
                    b: [0.45, 0.8],
                    radius: 0.1,
                },
            ],
            puddle_cost_scale: 400.0,
            step_size: 0.05,
            noise_std: 0.01,
            goal: AxisBox::new(0.95, 1.0, 0.95, 1.0),
            step_cost: 1.0,
            start: StartDistribution::Fixed(vec![0.25, 0.6]),
        }
    }
}

impl PuddleSpec {
    pub fn validate(&self) -> Result<()> {
        validate_motion(self.step_size, self.noise_std)?;
        for p in &self.puddles {
            let inside = p.a.iter().chain(&p.b).all(|v| (0.0..=1.0).contains(v));
            if !inside || !(p.radius > 0.0) {
                return Err(Error::InvalidSpec(format!(
                    "puddle {p:?} must lie in the unit square with positive radius"
                )));
            }
        }
        if !(self.puddle_cost_scale >= 0.0 && self.step_cost >= 0.0) {
            return Err(Error::InvalidSpec("puddle costs must be non-negative".into()));
        }
        self.goal.validate("goal")?;
        if let StartDistribution::Uniform(b) = &self.start {
            b.validate("start box")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct PuddleWorld {
    spec: PuddleSpec,
    bounds: Bounds,
}

pub fn make_puddle_world(spec: PuddleSpec) -> Result<PuddleWorld> {
    spec.validate()?;
    Ok(PuddleWorld {
        spec,
        bounds: Bounds::unit(2),
    })
}

impl PuddleWorld {
    pub fn spec(&self) -> &PuddleSpec {
        &self.spec
    }

    /// Penetration into the deepest puddle; 1-Lipschitz in the state.
    pub fn penetration(&self, s: &[f64]) -> f64 {
        self.spec.puddles.iter().map(|p| p.depth(s)).fold(0.0, f64::max)
    }

    /// Reward for acting in `s`; independent of the action and the noise.
    pub fn reward_at(&self, s: &[f64]) -> f64 {
        -self.spec.step_cost - self.spec.puddle_cost_scale * self.penetration(s)
    }
}

impl EnvModel for PuddleWorld {
    fn name(&self) -> &str {
        "puddle"
    }

    fn action_count(&self) -> usize {
        4
    }

    fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    fn reward_range(&self) -> (f64, f64) {
        let deepest = self.spec.puddles.iter().map(|p| p.radius).fold(0.0, f64::max);
        (
            -self.spec.step_cost - self.spec.puddle_cost_scale * deepest,
            -self.spec.step_cost,
        )
    }

    fn is_terminal(&self, s: &EnvState) -> bool {
        self.spec.goal.contains(s)
    }

    fn step(&self, s: &EnvState, action: usize, rng: &mut Rng) -> Transition {
        let reward = self.reward_at(s);
        let next = propose(s, action, self.spec.step_size, self.spec.noise_std, rng);
        let terminal = self.is_terminal(&next);
        Transition {
            next,
            reward,
            terminal,
        }
    }

    fn initial_state(&self, rng: &mut Rng) -> EnvState {
        sample_start(&self.spec.start, rng, |s| !self.is_terminal(s))
    }
}
