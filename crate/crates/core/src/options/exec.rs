use std::sync::Arc;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::learning::ValueEstimate;
use crate::mdp::{check_distribution, sample_action, ActionPolicy, EnvModel, Step, Trajectory};
use crate::partition::Partition;
use crate::rng::{self, Rng};
use crate::state::{Bounds, EnvState};

use super::hier::HierPolicy;

pub const DEFAULT_OPTION_CAP: usize = 300;

/// Result of running one option from a state.
#[derive(Clone, Debug, PartialEq)]
pub struct OptionOutcome {
    pub exit_state: EnvState,
    /// `sum_k gamma^k r_k` over the option's own steps.
    pub reward: f64,
    pub duration: usize,
    pub terminal: bool,
    pub hit_cap: bool,
    pub steps: Vec<Step>,
}

/// One option execution inside a hierarchical episode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Segment {
    pub option: usize,
    /// Index of the segment's first step in the trajectory.
    pub start: usize,
    pub duration: usize,
    /// The option was cut by the per-option step cap.
    pub cut: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HierTrajectory {
    pub trajectory: Trajectory,
    pub segments: Vec<Segment>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EpisodeStats {
    pub discounted: f64,
    pub total: f64,
    pub steps: usize,
    pub reached_terminal: bool,
    pub hit_cap: bool,
}

/// Running discounted sum, accumulated in the same order as
/// [`crate::mdp::discounted_sum`].
pub(crate) struct Accum {
    discount: f64,
    discounted: f64,
    total: f64,
}

impl Accum {
    fn new() -> Self {
        Accum {
            discount: 1.0,
            discounted: 0.0,
            total: 0.0,
        }
    }

    fn add(&mut self, r: f64, gamma: f64) {
        self.discounted += self.discount * r;
        self.discount *= gamma;
        self.total += r;
    }
}

pub(crate) struct OptionRun {
    pub exit: EnvState,
    pub duration: usize,
    pub terminal: bool,
    pub hit_cap: bool,
}

/// Run option `j` from `s0` for at most `cap` steps. With `force_first`
/// the option takes at least one step even if its termination condition
/// already holds at `s0`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn run_option<E: EnvModel + ?Sized>(
    env: &E,
    hier: &HierPolicy,
    j: usize,
    s0: EnvState,
    cap: usize,
    gamma: f64,
    rng: &mut Rng,
    acc: &mut Accum,
    mut record: Option<&mut Vec<Step>>,
    force_first: bool,
) -> Result<OptionRun> {
    let mut s = s0;
    if env.is_terminal(&s) {
        return Ok(OptionRun {
            exit: s,
            duration: 0,
            terminal: true,
            hit_cap: false,
        });
    }
    if !force_first && hier.terminates(j, &s) {
        return Ok(OptionRun {
            exit: s,
            duration: 0,
            terminal: false,
            hit_cap: false,
        });
    }
    let n_actions = env.action_count();
    let mut duration = 0;
    while duration < cap {
        let dist = hier.action_distribution(j, &s);
        check_distribution(&dist, n_actions)?;
        let a = sample_action(&dist, rng);
        let tr = env.step(&s, a, rng);
        acc.add(tr.reward, gamma);
        duration += 1;
        if let Some(steps) = record.as_deref_mut() {
            steps.push(Step {
                state: s,
                action: a,
                reward: tr.reward,
                next_state: tr.next.clone(),
                terminal: tr.terminal,
            });
        }
        s = tr.next;
        if tr.terminal {
            return Ok(OptionRun {
                exit: s,
                duration,
                terminal: true,
                hit_cap: false,
            });
        }
        if hier.terminates(j, &s) {
            return Ok(OptionRun {
                exit: s,
                duration,
                terminal: false,
                hit_cap: false,
            });
        }
    }
    Ok(OptionRun {
        exit: s,
        duration,
        terminal: false,
        hit_cap: true,
    })
}

/// Run option `j` of `hier` from `s0` until it terminates, the environment
/// terminates, or `cap` steps elapse.
pub fn execute_option<E: EnvModel + ?Sized>(
    env: &E,
    hier: &HierPolicy,
    j: usize,
    s0: &EnvState,
    cap: usize,
    gamma: f64,
    seed: u64,
) -> Result<OptionOutcome> {
    if cap == 0 {
        return Err(Error::Domain("option cap must be at least 1".into()));
    }
    if j >= hier.option_count() {
        return Err(Error::OutOfRange {
            index: j,
            len: hier.option_count(),
        });
    }
    let mut rng = rng::stream(seed, rng::tag::ROLLOUT, 0);
    let mut acc = Accum::new();
    let mut steps = Vec::new();
    let run = run_option(env, hier, j, s0.clone(), cap, gamma, &mut rng, &mut acc, Some(&mut steps), false)?;
    Ok(OptionOutcome {
        exit_state: run.exit,
        reward: acc.discounted,
        duration: run.duration,
        terminal: run.terminal,
        hit_cap: run.hit_cap,
        steps,
    })
}

/// One option segment as an SMDP transition, drawing from `rng`.
pub(crate) fn option_segment<E: EnvModel + ?Sized>(
    env: &E,
    hier: &HierPolicy,
    j: usize,
    s0: &EnvState,
    cap: usize,
    gamma: f64,
    rng: &mut Rng,
) -> Result<(f64, usize, EnvState, bool)> {
    let mut acc = Accum::new();
    let run = run_option(env, hier, j, s0.clone(), cap, gamma, rng, &mut acc, None, true)?;
    Ok((acc.discounted, run.duration, run.exit, run.terminal))
}

/// Hierarchical episode: select `mu(s)`, run that option to termination,
/// repeat until the environment terminates or `step_cap` steps elapse.
#[allow(clippy::too_many_arguments)]
pub(crate) fn hier_episode<E: EnvModel + ?Sized>(
    env: &E,
    hier: &HierPolicy,
    s0: &EnvState,
    step_cap: usize,
    option_cap: usize,
    gamma: f64,
    rng: &mut Rng,
    mut record: Option<(&mut Vec<Step>, &mut Vec<Segment>)>,
) -> Result<EpisodeStats> {
    if step_cap == 0 || option_cap == 0 {
        return Err(Error::Domain("step caps must be at least 1".into()));
    }
    let mut acc = Accum::new();
    let mut s = s0.clone();
    let mut t = 0;
    let mut reached_terminal = env.is_terminal(&s);
    while !reached_terminal && t < step_cap {
        let j = hier.select(&s);
        let cap = option_cap.min(step_cap - t);
        let steps = record.as_mut().map(|(steps, _)| &mut **steps);
        let run = run_option(env, hier, j, s, cap, gamma, rng, &mut acc, steps, true)?;
        if let Some((_, segments)) = record.as_mut() {
            segments.push(Segment {
                option: j,
                start: t,
                duration: run.duration,
                cut: run.hit_cap && run.duration == option_cap,
            });
        }
        t += run.duration;
        s = run.exit;
        reached_terminal = run.terminal;
    }
    Ok(EpisodeStats {
        discounted: acc.discounted,
        total: acc.total,
        steps: t,
        reached_terminal,
        hit_cap: !reached_terminal,
    })
}

/// Execute the stitched policy from `s0`, recording every step and the
/// option segments. Consumes randomness exactly like [`crate::mdp::rollout`],
/// so a single-option policy reproduces the flat trajectory.
pub fn run_hierarchical<E: EnvModel + ?Sized>(
    env: &E,
    hier: &HierPolicy,
    s0: &EnvState,
    step_cap: usize,
    option_cap: usize,
    seed: u64,
) -> Result<HierTrajectory> {
    let mut rng = rng::stream(seed, rng::tag::ROLLOUT, 0);
    let mut steps = Vec::new();
    let mut segments = Vec::new();
    let stats = hier_episode(env, hier, s0, step_cap, option_cap, 0.0, &mut rng, Some((&mut steps, &mut segments)))?;
    Ok(HierTrajectory {
        trajectory: Trajectory {
            steps,
            seed,
            hit_cap: stats.hit_cap,
        },
        segments,
    })
}

/// One step of a Local-MDP.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalStep {
    pub next: EnvState,
    pub reward: f64,
    /// The episode is over (exit or environment terminal).
    pub done: bool,
    pub exited: bool,
    pub env_terminal: bool,
}

/// Episodic MDP for class `i`: start uniformly inside the class, follow the
/// base dynamics, and on leaving the class collect `R(s,a) + gamma v(s')`
/// from a frozen value snapshot.
#[derive(Clone)]
pub struct LocalMdp<'a, E: ?Sized> {
    env: &'a E,
    partition: Arc<Partition>,
    class: usize,
    exit_value: Arc<ValueEstimate>,
    gamma: f64,
    cap: usize,
    /// Class boxes clipped to the environment bounds, with cumulative volume.
    boxes: Vec<(Bounds, f64)>,
}

pub fn build_local_mdp<'a, E: EnvModel + ?Sized>(
    env: &'a E,
    hier: &HierPolicy,
    i: usize,
    exit_value: Arc<ValueEstimate>,
    gamma: f64,
    cap: usize,
) -> Result<LocalMdp<'a, E>> {
    LocalMdp::new(env, hier.partition().clone(), i, exit_value, gamma, cap)
}

impl<'a, E: EnvModel + ?Sized> LocalMdp<'a, E> {
    pub fn new(
        env: &'a E,
        partition: Arc<Partition>,
        class: usize,
        exit_value: Arc<ValueEstimate>,
        gamma: f64,
        cap: usize,
    ) -> Result<Self> {
        let class_boxes = partition.class_boxes(class)?;
        if cap == 0 {
            return Err(Error::Domain("Local-MDP episode cap must be at least 1".into()));
        }
        let eb = env.bounds();
        let mut boxes = Vec::new();
        let mut total = 0.0;
        for b in class_boxes {
            let low: Vec<f64> = b.low().iter().zip(eb.low()).map(|(a, c)| a.max(*c)).collect();
            let high: Vec<f64> = b.high().iter().zip(eb.high()).map(|(a, c)| a.min(*c)).collect();
            if low.iter().zip(&high).any(|(l, h)| l > h) {
                continue;
            }
            let clipped = Bounds::new(low, high)?;
            let volume: f64 = (0..clipped.dim()).map(|d| clipped.width(d).max(f64::MIN_POSITIVE)).product();
            total += volume;
            boxes.push((clipped, total));
        }
        if boxes.is_empty() {
            return Err(Error::Domain(format!("class {class} does not intersect the state space")));
        }
        Ok(LocalMdp {
            env,
            partition,
            class,
            exit_value,
            gamma,
            cap,
            boxes,
        })
    }

    pub fn env(&self) -> &'a E {
        self.env
    }

    pub fn class(&self) -> usize {
        self.class
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn exit_value(&self) -> &Arc<ValueEstimate> {
        &self.exit_value
    }

    pub fn contains(&self, s: &[f64]) -> bool {
        self.partition.class_index(s) == self.class
    }

    /// Uniform draw over the admissible, non-terminal part of the class.
    pub fn start_state(&self, rng: &mut Rng) -> Result<EnvState> {
        let total = self.boxes.last().map(|b| b.1).unwrap_or(0.0);
        for _ in 0..100_000 {
            let u = rng.random::<f64>() * total;
            let b = self.boxes.iter().find(|b| u < b.1).unwrap_or(&self.boxes[self.boxes.len() - 1]);
            let s = b.0.sample(rng);
            if self.contains(&s) && self.env.is_admissible(&s) && !self.env.is_terminal(&s) {
                return Ok(s);
            }
        }
        Err(Error::Domain(format!("no admissible start state found in class {}", self.class)))
    }

    pub fn step(&self, s: &EnvState, a: usize, rng: &mut Rng) -> LocalStep {
        let tr = self.env.step(s, a, rng);
        if tr.terminal {
            return LocalStep {
                next: tr.next,
                reward: tr.reward,
                done: true,
                exited: false,
                env_terminal: true,
            };
        }
        if !self.contains(&tr.next) {
            let reward = tr.reward + self.gamma * self.exit_value.value(&tr.next);
            return LocalStep {
                next: tr.next,
                reward,
                done: true,
                exited: true,
                env_terminal: false,
            };
        }
        LocalStep {
            next: tr.next,
            reward: tr.reward,
            done: false,
            exited: false,
            env_terminal: false,
        }
    }

    /// Discounted return of one episode of `policy` from `s0`, capped at
    /// the Local-MDP episode cap.
    pub fn episode_from<P: ActionPolicy + ?Sized>(&self, policy: &P, s0: EnvState, rng: &mut Rng) -> Result<f64> {
        let mut s = s0;
        let mut acc = Accum::new();
        for _ in 0..self.cap {
            let dist = policy.distribution(&s);
            check_distribution(&dist, self.env.action_count())?;
            let a = sample_action(&dist, rng);
            let st = self.step(&s, a, rng);
            acc.add(st.reward, self.gamma);
            if st.done {
                break;
            }
            s = st.next;
        }
        Ok(acc.discounted)
    }

    pub fn episode<P: ActionPolicy + ?Sized>(&self, policy: &P, rng: &mut Rng) -> Result<f64> {
        let s0 = self.start_state(rng)?;
        self.episode_from(policy, s0, rng)
    }
}
