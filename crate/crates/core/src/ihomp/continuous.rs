use std::sync::Arc;

use crate::error::Result;
use crate::learning::{
    actor_critic_solve, refresh_nn_values, smdp_lstd, smdp_lstdq, ucb_rps_solve, ActorCriticConfig, FeatureMap,
    LstdqOptions, QEstimate, SmdpSample, SolveOutcome, UcbRpsConfig, ValueEstimate,
};
use crate::mdp::{sample_action, EnvModel};
use crate::options::{build_local_mdp, hier_episode, option_segment, HierPolicy, PolicyParams};
use crate::partition::Partition;
use crate::rng::{self, tag};
use crate::state::EnvState;

use super::{run_ihomp, Backend, CurvePoint, IhompConfig, RoiConfig, RunRecord};

#[derive(Clone, Debug, PartialEq)]
pub enum Solver {
    ActorCritic { config: ActorCriticConfig, critic: FeatureMap },
    UcbRps(UcbRpsConfig),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Evaluator {
    /// SMDP-LSTD on option segments started from uniformly drawn states.
    Lstd { features: FeatureMap, samples: usize, ridge: f64 },
    /// Nearest-neighbour values over fixed uniformly drawn anchors, refreshed
    /// by hierarchical rollouts truncated at `horizon` steps.
    NearestNeighbor { anchors: usize, rollouts: usize, horizon: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContinuousSettings {
    pub gamma: f64,
    pub solver: Solver,
    pub evaluator: Evaluator,
    /// Features and sample count for the action values used by interruption.
    pub q_features: FeatureMap,
    pub q_samples: usize,
    pub lstdq: LstdqOptions,
    pub option_cap: usize,
    pub eval_episodes: usize,
    pub episode_cap: usize,
    pub seed: u64,
}

/// Sampling-based backend for environments given only as simulators.
pub struct ContinuousBackend<'a, E: ?Sized> {
    env: &'a E,
    settings: ContinuousSettings,
    anchors: Vec<EnvState>,
}

impl<'a, E: EnvModel + ?Sized> ContinuousBackend<'a, E> {
    pub fn new(env: &'a E, settings: ContinuousSettings) -> Self {
        let anchors = match settings.evaluator {
            Evaluator::NearestNeighbor { anchors, .. } => {
                let mut rng = rng::stream(settings.seed, tag::ANCHORS, 0);
                (0..anchors).map(|_| env.sample_state(&mut rng)).collect()
            }
            Evaluator::Lstd { .. } => Vec::new(),
        };
        ContinuousBackend { env, settings, anchors }
    }

    pub fn settings(&self) -> &ContinuousSettings {
        &self.settings
    }

    /// Return statistics of `hier` from the start distribution, always on the
    /// same evaluation streams.
    pub fn episode_returns(&self, hier: &HierPolicy) -> Result<Vec<(f64, bool)>> {
        let s = &self.settings;
        (0..s.eval_episodes)
            .map(|e| {
                let mut rng = rng::stream(s.seed, tag::EVALUATION, e as u64);
                let s0 = self.env.initial_state(&mut rng);
                let stats = hier_episode(self.env, hier, &s0, s.episode_cap, s.option_cap, s.gamma, &mut rng, None)?;
                Ok((stats.total, stats.reached_terminal))
            })
            .collect()
    }
}

pub fn summarize_returns(iteration: usize, results: &[(f64, bool)]) -> CurvePoint {
    let n = results.len();
    let mean = results.iter().map(|r| r.0).sum::<f64>() / n.max(1) as f64;
    let var = if n > 1 {
        results.iter().map(|r| (r.0 - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    CurvePoint {
        iteration,
        mean_return: mean,
        std: var.sqrt(),
        episodes: n,
        success_rate: results.iter().filter(|r| r.1).count() as f64 / n.max(1) as f64,
    }
}

impl<E: EnvModel + ?Sized> Backend for ContinuousBackend<'_, E> {
    fn evaluate(&mut self, hier: &HierPolicy, call: usize) -> Result<Arc<ValueEstimate>> {
        let s = &self.settings;
        let seed = rng::derive(s.seed, call as u64);
        let v = match &s.evaluator {
            Evaluator::Lstd { features, samples, ridge } => {
                let mut rng = rng::stream(seed, tag::LSTD_SAMPLES, 0);
                let mut data = Vec::with_capacity(*samples);
                for _ in 0..*samples {
                    let state = self.env.sample_state(&mut rng);
                    if self.env.is_terminal(&state) {
                        data.push(SmdpSample {
                            next: state.clone(),
                            state,
                            option: 0,
                            reward: 0.0,
                            duration: 0,
                            terminal: true,
                        });
                        continue;
                    }
                    let j = hier.select(&state);
                    let (reward, duration, next, terminal) =
                        option_segment(self.env, hier, j, &state, s.option_cap, s.gamma, &mut rng)?;
                    data.push(SmdpSample {
                        state,
                        option: j,
                        reward,
                        duration,
                        next,
                        terminal,
                    });
                }
                smdp_lstd(&data, features, s.gamma, *ridge)?
            }
            Evaluator::NearestNeighbor { rollouts, horizon, .. } => {
                refresh_nn_values(self.env, hier, &self.anchors, *rollouts, *horizon, s.option_cap, s.gamma, seed)?
            }
        };
        Ok(Arc::new(v))
    }

    fn solve(&mut self, hier: &HierPolicy, class: usize, v: Arc<ValueEstimate>, call: usize) -> Result<SolveOutcome> {
        let s = &self.settings;
        let seed = rng::derive(s.seed ^ 0x5eed_0f_c1a55, call as u64);
        let lm = build_local_mdp(self.env, hier, class, v, s.gamma, s.option_cap)?;
        let template = &hier.option(class).policy;
        match &s.solver {
            // A saturated incumbent has vanishing gradients, so every solve
            // starts over from the uniform member of the family.
            Solver::ActorCritic { config, critic } => {
                let fresh = template.with_theta(vec![0.0; template.theta().len()])?;
                actor_critic_solve(&lm, &fresh, critic, config, seed)
            }
            Solver::UcbRps(config) => ucb_rps_solve(&lm, template, config, seed),
        }
    }

    fn assess(&mut self, hier: &HierPolicy, iteration: usize) -> Result<CurvePoint> {
        Ok(summarize_returns(iteration, &self.episode_returns(hier)?))
    }

    fn estimate_q(&mut self, hier: &HierPolicy, sweep: usize) -> Result<QEstimate> {
        let s = &self.settings;
        let m = hier.option_count();
        let mut rng = rng::stream(rng::derive(s.seed, sweep as u64), tag::Q_SAMPLES, 0);
        let mut data = Vec::with_capacity(s.q_samples * m);
        for _ in 0..s.q_samples {
            let state = self.env.sample_state(&mut rng);
            let terminal = self.env.is_terminal(&state);
            for j in 0..m {
                if terminal {
                    data.push(SmdpSample {
                        state: state.clone(),
                        option: j,
                        reward: 0.0,
                        duration: 0,
                        next: state.clone(),
                        terminal: true,
                    });
                    continue;
                }
                let a = sample_action(&hier.action_distribution(j, &state), &mut rng);
                let tr = self.env.step(&state, a, &mut rng);
                data.push(SmdpSample {
                    state: state.clone(),
                    option: j,
                    reward: tr.reward,
                    duration: 1,
                    next: tr.next,
                    terminal: tr.terminal,
                });
            }
        }
        let partition = hier.partition().clone();
        let result = smdp_lstdq(&data, &s.q_features, s.gamma, m, s.lstdq, |x| partition.class_index(x))?;
        Ok(result.q)
    }
}

/// Option learning over `partition` from copies of `template`.
pub fn ihomp<E: EnvModel + ?Sized>(
    env: &E,
    partition: Arc<Partition>,
    template: &PolicyParams,
    settings: ContinuousSettings,
    cfg: &IhompConfig,
) -> Result<(HierPolicy, RunRecord)> {
    let mut backend = ContinuousBackend::new(env, settings);
    run_ihomp(&mut backend, HierPolicy::uniform(partition, template), cfg, None)
}

/// As [`ihomp`], with value-based interruption after every sweep.
pub fn ihomp_roi<E: EnvModel + ?Sized>(
    env: &E,
    partition: Arc<Partition>,
    template: &PolicyParams,
    settings: ContinuousSettings,
    cfg: &IhompConfig,
    roi: &RoiConfig,
) -> Result<(HierPolicy, QEstimate, RunRecord)> {
    let mut backend = ContinuousBackend::new(env, settings);
    let (hier, record) = run_ihomp(&mut backend, HierPolicy::uniform(partition, template), cfg, Some(roi))?;
    let q = record.final_q.as_deref().cloned().expect("interruption estimates Q every sweep");
    Ok((hier, q, record))
}
