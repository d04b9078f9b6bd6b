use crate::error::{Error, Result};
use crate::mdp::{sample_action, EnvModel};
use crate::options::{LocalMdp, PolicyParams};
use crate::rng::{self, tag};

use super::features::FeatureMap;
use super::SolveOutcome;

#[derive(Clone, Debug, PartialEq)]
pub struct ActorCriticConfig {
    pub episodes: usize,
    pub alpha_actor: f64,
    pub alpha_critic: f64,
    /// Parameter snapshots kept for recovery after divergence.
    pub checkpoint_every: usize,
    pub checkpoint_eval_episodes: usize,
}

impl Default for ActorCriticConfig {
    fn default() -> Self {
        ActorCriticConfig {
            episodes: 2000,
            alpha_actor: 0.01,
            alpha_critic: 0.1,
            checkpoint_every: 100,
            checkpoint_eval_episodes: 10,
        }
    }
}

const DIVERGENCE_LIMIT: f64 = 1e6;

/// Episodic actor-critic on a Local-MDP. The critic is linear TD(0) over
/// `critic`; the actor follows `delta * grad log pi`. Both step sizes decay
/// as `1 / sqrt(episode)`.
pub fn actor_critic_solve<E: EnvModel + ?Sized>(
    lm: &LocalMdp<'_, E>,
    template: &PolicyParams,
    critic: &FeatureMap,
    cfg: &ActorCriticConfig,
    seed: u64,
) -> Result<SolveOutcome> {
    if cfg.episodes == 0 {
        return Err(Error::Domain("actor-critic budget must be at least one episode".into()));
    }
    if !template.is_differentiable() {
        return Err(Error::Unsupported("actor-critic needs a softmax policy family".into()));
    }
    let gamma = lm.gamma();
    let n_actions = template.n_actions();
    let mut policy = template.clone();
    let mut w = vec![0.0; critic.len()];
    let mut checkpoints = vec![policy.clone()];
    let mut recent = Vec::new();
    let tail = (cfg.episodes / 10).max(1);
    for e in 1..=cfg.episodes {
        let mut rng = rng::stream(seed, tag::LOCAL_SOLVER, e as u64);
        let decay = 1.0 / (e as f64).sqrt();
        let (a_actor, a_critic) = (cfg.alpha_actor * decay, cfg.alpha_critic * decay);
        let mut s = lm.start_state(&mut rng)?;
        let mut ret = 0.0;
        let mut discount = 1.0;
        for _ in 0..lm.cap() {
            let dist = policy.action_distribution(&s);
            let a = sample_action(&dist, &mut rng);
            let st = lm.step(&s, a, &mut rng);
            ret += discount * st.reward;
            discount *= gamma;
            let v_next = if st.done { 0.0 } else { critic.dot(&w, &st.next) };
            let delta = st.reward + gamma * v_next - critic.dot(&w, &s);
            critic.add_scaled(&mut w, &s, a_critic * delta);
            let grad = policy.grad_log_prob(&s, a)?;
            for (t, g) in policy.theta_mut().iter_mut().zip(&grad) {
                *t += a_actor * delta * g;
            }
            if policy.theta().iter().any(|t| !t.is_finite() || t.abs() > DIVERGENCE_LIMIT) {
                log::warn!("actor-critic diverged in class {} at episode {e}", lm.class());
                return recover(lm, &checkpoints, cfg, seed, n_actions);
            }
            if st.done {
                break;
            }
            s = st.next;
        }
        if e + tail > cfg.episodes {
            recent.push(ret);
        }
        if cfg.checkpoint_every > 0 && e % cfg.checkpoint_every == 0 {
            checkpoints.push(policy.clone());
        }
    }
    let score = recent.iter().sum::<f64>() / recent.len() as f64;
    Ok(SolveOutcome {
        policy,
        score,
        warning: None,
    })
}

/// Best checkpoint by Monte-Carlo return on the Local-MDP.
fn recover<E: EnvModel + ?Sized>(
    lm: &LocalMdp<'_, E>,
    checkpoints: &[PolicyParams],
    cfg: &ActorCriticConfig,
    seed: u64,
    _n_actions: usize,
) -> Result<SolveOutcome> {
    let episodes = cfg.checkpoint_eval_episodes.max(1);
    let mut best: Option<(f64, &PolicyParams)> = None;
    for p in checkpoints {
        let mut total = 0.0;
        for k in 0..episodes {
            let mut rng = rng::stream(seed, tag::VALIDATION, k as u64);
            total += lm.episode(p, &mut rng)?;
        }
        let mean = total / episodes as f64;
        if best.is_none_or(|(b, _)| mean > b) {
            best = Some((mean, p));
        }
    }
    let (score, policy) = best.expect("at least the initial checkpoint");
    Ok(SolveOutcome {
        policy: policy.clone(),
        score,
        warning: Some("actor-critic diverged; returned the best checkpoint".into()),
    })
}
