use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::mdp::ActionPolicy;
use crate::state::EnvState;

/// Intra-option policy parameterizations. The softmax families are the ones
/// the learners optimize; `Table` holds exact tabular solutions.
#[derive(Clone, Debug, PartialEq)]
pub enum PolicyParams {
    /// Softmax over per-action logits, ignoring the state.
    StateIndependent { logits: Vec<f64> },
    /// Softmax of `theta_a . <1, s_1, ..., s_d>`; `weights` holds one row of
    /// `state_dim + 1` entries per action.
    Linear {
        n_actions: usize,
        state_dim: usize,
        weights: Vec<f64>,
    },
    /// Explicit action distribution per lattice cell, row-major.
    Table {
        grid: Grid,
        n_actions: usize,
        probs: Vec<f64>,
    },
}

pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|&x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

impl PolicyParams {
    pub fn uniform(n_actions: usize) -> Self {
        PolicyParams::StateIndependent {
            logits: vec![0.0; n_actions],
        }
    }

    pub fn uniform_linear(n_actions: usize, state_dim: usize) -> Self {
        PolicyParams::Linear {
            n_actions,
            state_dim,
            weights: vec![0.0; n_actions * (state_dim + 1)],
        }
    }

    pub fn table(grid: Grid, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != grid.n_cells() * n_actions {
            return Err(Error::InvalidPolicy(format!(
                "table has {} entries for {} cells x {n_actions} actions",
                probs.len(),
                grid.n_cells()
            )));
        }
        for row in probs.chunks(n_actions) {
            crate::mdp::check_distribution(row, n_actions)?;
        }
        Ok(PolicyParams::Table { grid, n_actions, probs })
    }

    pub fn family(&self) -> &'static str {
        match self {
            PolicyParams::StateIndependent { .. } => "state-independent",
            PolicyParams::Linear { .. } => "linear",
            PolicyParams::Table { .. } => "table",
        }
    }

    pub fn n_actions(&self) -> usize {
        match self {
            PolicyParams::StateIndependent { logits } => logits.len(),
            PolicyParams::Linear { n_actions, .. } | PolicyParams::Table { n_actions, .. } => *n_actions,
        }
    }

    /// Flat parameter vector.
    pub fn theta(&self) -> &[f64] {
        match self {
            PolicyParams::StateIndependent { logits } => logits,
            PolicyParams::Linear { weights, .. } => weights,
            PolicyParams::Table { probs, .. } => probs,
        }
    }

    pub fn theta_mut(&mut self) -> &mut [f64] {
        match self {
            PolicyParams::StateIndependent { logits } => logits,
            PolicyParams::Linear { weights, .. } => weights,
            PolicyParams::Table { probs, .. } => probs,
        }
    }

    /// Same family and shape with a new parameter vector.
    pub fn with_theta(&self, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != self.theta().len() {
            return Err(Error::InvalidPolicy(format!(
                "parameter vector has {} entries, expected {}",
                theta.len(),
                self.theta().len()
            )));
        }
        Ok(match self {
            PolicyParams::StateIndependent { .. } => PolicyParams::StateIndependent { logits: theta },
            PolicyParams::Linear { n_actions, state_dim, .. } => PolicyParams::Linear {
                n_actions: *n_actions,
                state_dim: *state_dim,
                weights: theta,
            },
            PolicyParams::Table { grid, n_actions, .. } => PolicyParams::table(grid.clone(), *n_actions, theta)?,
        })
    }

    pub fn is_differentiable(&self) -> bool {
        !matches!(self, PolicyParams::Table { .. })
    }

    /// Per-action scores before the softmax. For tables these are the
    /// probabilities themselves.
    pub fn scores(&self, s: &[f64]) -> Vec<f64> {
        match self {
            PolicyParams::StateIndependent { logits } => logits.clone(),
            PolicyParams::Linear { n_actions, state_dim, weights } => {
                let k = state_dim + 1;
                (0..*n_actions)
                    .map(|a| {
                        let w = &weights[a * k..(a + 1) * k];
                        w[0] + w[1..].iter().zip(s).map(|(x, y)| x * y).sum::<f64>()
                    })
                    .collect()
            }
            PolicyParams::Table { grid, n_actions, probs } => {
                let c = grid.cell_of(s);
                probs[c * n_actions..(c + 1) * n_actions].to_vec()
            }
        }
    }

    pub fn action_distribution(&self, s: &[f64]) -> Vec<f64> {
        match self {
            PolicyParams::Table { .. } => self.scores(s),
            _ => softmax(&self.scores(s)),
        }
    }

    pub fn log_prob(&self, s: &[f64], a: usize) -> f64 {
        self.action_distribution(s)[a].ln()
    }

    /// `grad_theta log pi(a|s) = (onehot(a) - pi(.|s)) (x) phi(s)`.
    pub fn grad_log_prob(&self, s: &[f64], a: usize) -> Result<Vec<f64>> {
        let pi = self.action_distribution(s);
        match self {
            PolicyParams::StateIndependent { .. } => Ok(pi
                .iter()
                .enumerate()
                .map(|(b, p)| f64::from(u8::from(a == b)) - p)
                .collect()),
            PolicyParams::Linear { n_actions, state_dim, .. } => {
                let k = state_dim + 1;
                let mut g = vec![0.0; n_actions * k];
                for b in 0..*n_actions {
                    let coef = f64::from(u8::from(a == b)) - pi[b];
                    g[b * k] = coef;
                    for d in 0..*state_dim {
                        g[b * k + 1 + d] = coef * s[d];
                    }
                }
                Ok(g)
            }
            PolicyParams::Table { .. } => Err(Error::Unsupported(
                "tabular policies have no softmax gradient".into(),
            )),
        }
    }
}

impl ActionPolicy for PolicyParams {
    fn distribution(&self, s: &EnvState) -> Vec<f64> {
        self.action_distribution(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::state::Bounds;
    use rand::Rng as _;

    #[test]
    fn zero_logits_are_uniform() {
        let p = PolicyParams::uniform(4);
        assert_eq!(p.action_distribution(&[0.3, 0.2]), vec![0.25; 4]);
    }

    #[test]
    fn dominant_logit_takes_almost_all_mass() {
        let p = PolicyParams::StateIndependent {
            logits: vec![10.0, 0.0, 0.0, 0.0],
        };
        let expected = 1.0 / (1.0 + 3.0 * (-10.0f64).exp());
        assert!((p.action_distribution(&[0.0])[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn scaling_features_keeps_the_argmax() {
        let p = PolicyParams::Linear {
            n_actions: 3,
            state_dim: 2,
            weights: vec![0.1, 1.0, -0.5, 0.0, 0.2, 0.3, -0.2, -1.0, 0.4],
        };
        let s = [0.7, 0.4];
        let scores = p.scores(&s);
        let doubled: Vec<f64> = scores.iter().map(|x| 2.0 * x).collect();
        let (a, b) = (softmax(&scores), softmax(&doubled));
        assert_ne!(a, b);
        let argmax = |v: &[f64]| (0..v.len()).max_by(|&i, &j| v[i].total_cmp(&v[j])).unwrap();
        assert_eq!(argmax(&a), argmax(&b));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut r = rng::stream(5, 0, 0);
        let h = 1e-5;
        for trial in 0..100 {
            let template = if trial % 2 == 0 {
                PolicyParams::uniform(4)
            } else {
                PolicyParams::uniform_linear(5, 4)
            };
            let theta: Vec<f64> = (0..template.theta().len()).map(|_| r.random_range(-2.0..2.0)).collect();
            let p = template.with_theta(theta.clone()).unwrap();
            let s = Bounds::new(vec![0.0, 0.0, -1.0, -1.0], vec![1.0; 4]).unwrap().sample(&mut r);
            let a = r.random_range(0..p.n_actions());
            let g = p.grad_log_prob(&s, a).unwrap();
            for k in 0..theta.len() {
                let mut up = theta.clone();
                let mut down = theta.clone();
                up[k] += h;
                down[k] -= h;
                let fd = (p.with_theta(up).unwrap().log_prob(&s, a) - p.with_theta(down).unwrap().log_prob(&s, a)) / (2.0 * h);
                let err = (fd - g[k]).abs() / g[k].abs().max(1e-3);
                assert!(err <= 1e-4, "trial {trial} component {k}: {fd} vs {}", g[k]);
            }
        }
    }
}
