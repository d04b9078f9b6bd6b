use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::mdp::EnvModel;
use crate::options::{LocalMdp, PolicyParams};
use crate::rng::{self, tag};

use super::SolveOutcome;

/// UCB1 over arms with rewards min-max normalized by the range seen so far.
#[derive(Clone, Debug, PartialEq)]
pub struct Ucb1 {
    c: f64,
    counts: Vec<usize>,
    sums: Vec<f64>,
    lo: f64,
    hi: f64,
    pulls: usize,
}

impl Ucb1 {
    pub fn new(arms: usize, c: f64) -> Self {
        Ucb1 {
            c,
            counts: vec![0; arms],
            sums: vec![0.0; arms],
            lo: f64::INFINITY,
            hi: f64::NEG_INFINITY,
            pulls: 0,
        }
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn mean(&self, arm: usize) -> f64 {
        if self.counts[arm] == 0 {
            f64::NEG_INFINITY
        } else {
            self.sums[arm] / self.counts[arm] as f64
        }
    }

    /// Untried arms first (lowest index), then the highest upper bound.
    pub fn select(&self) -> usize {
        if let Some(arm) = self.counts.iter().position(|&n| n == 0) {
            return arm;
        }
        let span = self.hi - self.lo;
        let ln_t = (self.pulls as f64).ln();
        let mut best = (f64::NEG_INFINITY, 0);
        for arm in 0..self.counts.len() {
            let mean = self.mean(arm);
            let norm = if span > 0.0 { (mean - self.lo) / span } else { 0.0 };
            let ucb = norm + self.c * (2.0 * ln_t / self.counts[arm] as f64).sqrt();
            if ucb > best.0 {
                best = (ucb, arm);
            }
        }
        best.1
    }

    pub fn update(&mut self, arm: usize, reward: f64) {
        self.counts[arm] += 1;
        self.sums[arm] += reward;
        self.lo = self.lo.min(reward);
        self.hi = self.hi.max(reward);
        self.pulls += 1;
    }

    /// Arm with the highest empirical mean, lowest index on ties.
    pub fn best(&self) -> usize {
        let mut best = (f64::NEG_INFINITY, 0);
        for arm in 0..self.counts.len() {
            if self.mean(arm) > best.0 {
                best = (self.mean(arm), arm);
            }
        }
        best.1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UcbRpsConfig {
    pub candidates: usize,
    /// Total episodes across all arms.
    pub pulls: usize,
    pub exploration: f64,
    /// Standard deviation of the Gaussian prior over parameters.
    pub prior_sigma: f64,
    /// Arm 0 is the incumbent policy instead of a fresh draw.
    pub keep_incumbent: bool,
}

impl Default for UcbRpsConfig {
    fn default() -> Self {
        UcbRpsConfig {
            candidates: 64,
            pulls: 64 * 20,
            exploration: 1.0,
            prior_sigma: 1.0,
            keep_incumbent: true,
        }
    }
}

/// Random policy search: draw candidate parameter vectors, treat each as a
/// bandit arm whose pull is one Local-MDP episode, and return the arm with
/// the best empirical mean.
pub fn ucb_rps_solve<E: EnvModel + ?Sized>(
    lm: &LocalMdp<'_, E>,
    template: &PolicyParams,
    cfg: &UcbRpsConfig,
    seed: u64,
) -> Result<SolveOutcome> {
    if cfg.candidates == 0 || cfg.pulls < cfg.candidates {
        return Err(Error::Domain(format!(
            "UCB-RPS needs candidates >= 1 and pulls >= candidates (got {} and {})",
            cfg.candidates, cfg.pulls
        )));
    }
    let prior = Normal::new(0.0, cfg.prior_sigma).map_err(|e| Error::Domain(e.to_string()))?;
    let mut draw = rng::stream(seed, tag::LOCAL_SOLVER, u64::MAX);
    let arms: Vec<PolicyParams> = (0..cfg.candidates)
        .map(|k| {
            if k == 0 && cfg.keep_incumbent {
                Ok(template.clone())
            } else {
                let theta = (0..template.theta().len()).map(|_| prior.sample(&mut draw)).collect();
                template.with_theta(theta)
            }
        })
        .collect::<Result<_>>()?;
    let mut bandit = Ucb1::new(arms.len(), cfg.exploration);
    for pull in 0..cfg.pulls {
        let arm = bandit.select();
        let mut rng = rng::stream(seed, tag::LOCAL_SOLVER, pull as u64);
        let ret = lm.episode(&arms[arm], &mut rng)?;
        bandit.update(arm, ret);
    }
    let best = bandit.best();
    Ok(SolveOutcome {
        policy: arms[best].clone(),
        score: bandit.mean(best),
        warning: None,
    })
}
