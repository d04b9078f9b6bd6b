use std::ops::{Deref, DerefMut};

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;

/// A point in an environment's continuous state space.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvState(pub Vec<f64>);

impl EnvState {
    pub fn new(coords: impl Into<Vec<f64>>) -> Self {
        EnvState(coords.into())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn distance(&self, other: &EnvState) -> f64 {
        self.iter()
            .zip(other.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

impl Deref for EnvState {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for EnvState {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for EnvState {
    fn from(v: Vec<f64>) -> Self {
        EnvState(v)
    }
}

/// Axis-aligned box `[low_d, high_d]` per dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct Bounds {
    low: Vec<f64>,
    high: Vec<f64>,
}

impl Bounds {
    pub fn new(low: Vec<f64>, high: Vec<f64>) -> Result<Self> {
        if low.is_empty() || low.len() != high.len() {
            return Err(Error::InvalidSpec(format!(
                "bounds need matching non-empty low/high, got {} and {}",
                low.len(),
                high.len()
            )));
        }
        for (d, (l, h)) in low.iter().zip(&high).enumerate() {
            if !(l.is_finite() && h.is_finite() && l < h) {
                return Err(Error::InvalidSpec(format!(
                    "dimension {d}: bounds [{l}, {h}] are not well ordered"
                )));
            }
        }
        Ok(Bounds { low, high })
    }

    pub fn unit(dim: usize) -> Self {
        Bounds {
            low: vec![0.0; dim],
            high: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.low.len()
    }

    pub fn low(&self) -> &[f64] {
        &self.low
    }

    pub fn high(&self) -> &[f64] {
        &self.high
    }

    pub fn width(&self, d: usize) -> f64 {
        self.high[d] - self.low[d]
    }

    pub fn contains(&self, s: &[f64]) -> bool {
        s.len() == self.dim()
            && s
                .iter()
                .enumerate()
                .all(|(d, &x)| x >= self.low[d] && x <= self.high[d])
    }

    pub fn clamp(&self, s: &mut [f64]) {
        for (d, x) in s.iter_mut().enumerate() {
            *x = x.clamp(self.low[d], self.high[d]);
        }
    }

    pub fn center(&self) -> EnvState {
        EnvState(
            self.low
                .iter()
                .zip(&self.high)
                .map(|(l, h)| 0.5 * (l + h))
                .collect(),
        )
    }

    pub fn sample(&self, rng: &mut Rng) -> EnvState {
        EnvState(
            self.low
                .iter()
                .zip(&self.high)
                .map(|(&l, &h)| rng.random_range(l..h))
                .collect(),
        )
    }
}
