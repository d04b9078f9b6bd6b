use std::sync::Arc;

use ihomp::env::{gridworld_grid, make_gridworld, TabularEnv};
use ihomp::learning::{
    actor_critic_solve, nn_value, refresh_nn_values, smdp_lstdq, ucb_rps_solve, ActorCriticConfig, FeatureMap,
    LstdqOptions, SmdpSample, UcbRpsConfig, ValueEstimate,
};
use ihomp::mdp::{evaluate_policy_exact, EnvModel, Transition};
use ihomp::options::{build_local_mdp, HierPolicy, PolicyParams};
use ihomp::rng::{self, Rng};
use ihomp::{grid_partition, Bounds, EnvState, TabularMdp};

/// A point on [0, 1] that moves right by `shift` per step at cost 1, and
/// terminates at or beyond `goal`. Action 0 earns `bonus` on top.
struct Line {
    bounds: Bounds,
    shift: f64,
    goal: f64,
    bonus: f64,
}

impl Line {
    fn new(shift: f64, goal: f64, bonus: f64) -> Self {
        Line {
            bounds: Bounds::unit(1),
            shift,
            goal,
            bonus,
        }
    }
}

impl EnvModel for Line {
    fn name(&self) -> &str {
        "line"
    }

    fn action_count(&self) -> usize {
        4
    }

    fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    fn reward_range(&self) -> (f64, f64) {
        (-1.0, self.bonus - 1.0)
    }

    fn is_terminal(&self, s: &EnvState) -> bool {
        s[0] >= self.goal
    }

    fn step(&self, s: &EnvState, action: usize, _rng: &mut Rng) -> Transition {
        let next = EnvState::new(vec![(s[0] + self.shift).min(1.0)]);
        let terminal = self.is_terminal(&next);
        let bonus = if action == 0 { self.bonus } else { 0.0 };
        Transition {
            next,
            reward: bonus - 1.0,
            terminal,
        }
    }

    fn initial_state(&self, _rng: &mut Rng) -> EnvState {
        EnvState::new(vec![0.0])
    }
}

fn halves() -> HierPolicy {
    let p = Arc::new(grid_partition(Bounds::unit(1), &[2]).unwrap());
    HierPolicy::uniform(p, &PolicyParams::uniform(4))
}

fn constant(v: f64) -> Arc<ValueEstimate> {
    Arc::new(nn_value(vec![(EnvState::new(vec![0.5]), v)]).unwrap())
}

#[test]
fn zero_exit_value_keeps_base_rewards() {
    let env = Line::new(0.3, 2.0, 0.0);
    let lm = build_local_mdp(&env, &halves(), 0, constant(0.0), 0.9, 100).unwrap();
    let mut r = rng::stream(0, 0, 0);
    let inside = lm.step(&EnvState::new(vec![0.1]), 1, &mut r);
    let exit = lm.step(&EnvState::new(vec![0.4]), 1, &mut r);
    assert_eq!((inside.reward, inside.done), (-1.0, false));
    assert_eq!((exit.reward, exit.exited), (-1.0, true));
}

#[test]
fn exit_pays_the_discounted_successor_value() {
    let env = Line::new(0.3, 2.0, 0.0);
    let lm = build_local_mdp(&env, &halves(), 0, constant(10.0), 0.9, 100).unwrap();
    let st = lm.step(&EnvState::new(vec![0.4]), 1, &mut rng::stream(0, 0, 0));
    assert!(st.exited && st.done);
    assert!((st.reward - 8.0).abs() < 1e-12);
}

#[test]
fn entering_the_goal_pays_the_base_reward_only() {
    let env = Line::new(0.3, 0.9, 0.0);
    let lm = build_local_mdp(&env, &halves(), 1, constant(10.0), 0.9, 100).unwrap();
    let st = lm.step(&EnvState::new(vec![0.8]), 1, &mut rng::stream(0, 0, 0));
    assert!(st.env_terminal && !st.exited);
    assert_eq!(st.reward, -1.0);
}

fn single_state() -> (Line, HierPolicy) {
    let env = Line::new(0.0, 2.0, 1.0);
    let p = Arc::new(grid_partition(Bounds::unit(1), &[1]).unwrap());
    (env, HierPolicy::uniform(p, &PolicyParams::uniform(4)))
}

#[test]
fn actor_critic_finds_the_rewarding_action() {
    let (env, hier) = single_state();
    let lm = build_local_mdp(&env, &hier, 0, constant(0.0), 0.9, 300).unwrap();
    let critic = FeatureMap::binary_grid(Bounds::unit(1), vec![1]).unwrap();
    let out = actor_critic_solve(&lm, &PolicyParams::uniform(4), &critic, &ActorCriticConfig::default(), 1).unwrap();
    assert!(out.policy.action_distribution(&[0.5])[0] >= 0.9);
}

#[test]
fn actor_critic_without_reward_signal_stays_uniform() {
    // every action costs the same, so delta is zero at the fixed point
    let env = Line::new(0.0, 2.0, 0.0);
    let p = Arc::new(grid_partition(Bounds::unit(1), &[1]).unwrap());
    let hier = HierPolicy::uniform(p, &PolicyParams::uniform(4));
    let lm = build_local_mdp(&env, &hier, 0, constant(0.0), 0.9, 50).unwrap();
    let critic = FeatureMap::binary_grid(Bounds::unit(1), vec![1]).unwrap();
    let out = actor_critic_solve(&lm, &PolicyParams::uniform(4), &critic, &ActorCriticConfig::default(), 1).unwrap();
    let tv: f64 = out.policy.action_distribution(&[0.5]).iter().map(|p| (p - 0.25).abs()).sum::<f64>() / 2.0;
    assert!(tv <= 0.05, "total variation {tv}");
}

#[test]
fn single_candidate_is_returned() {
    let (env, hier) = single_state();
    let lm = build_local_mdp(&env, &hier, 0, constant(0.0), 0.9, 20).unwrap();
    let incumbent = PolicyParams::StateIndependent {
        logits: vec![0.2, -0.1, 0.4, 0.0],
    };
    let cfg = UcbRpsConfig {
        candidates: 1,
        pulls: 10,
        ..Default::default()
    };
    let out = ucb_rps_solve(&lm, &incumbent, &cfg, 3).unwrap();
    assert_eq!(out.policy, incumbent);
}

fn grid_setup(noise: f64) -> (TabularMdp, TabularEnv) {
    let mdp = make_gridworld(4, 4, (3, 3), noise, 0.9).unwrap();
    let env = TabularEnv::new(mdp.clone(), gridworld_grid(4, 4).unwrap(), 0).unwrap();
    (mdp, env)
}

#[test]
fn refreshed_values_at_goal_and_in_deterministic_worlds() {
    let (mdp, env) = grid_setup(0.0);
    let hier = HierPolicy::uniform(
        Arc::new(grid_partition(env.bounds().clone(), &[1, 1]).unwrap()),
        &PolicyParams::StateIndependent {
            logits: vec![0.0, 0.0, 40.0, 0.0],
        },
    );
    let grid = gridworld_grid(4, 4).unwrap();
    let anchors: Vec<EnvState> = (0..16).map(|s| grid.cell_center(s)).collect();
    let v = refresh_nn_values(&env, &hier, &anchors, 1, 200, 200, 0.9, 0).unwrap();
    let policy: Vec<Vec<f64>> = anchors.iter().map(|s| hier.action_distribution(0, s)).collect();
    let exact = evaluate_policy_exact(&mdp, &policy).unwrap();
    for (s, a) in anchors.iter().enumerate() {
        if env.is_terminal(a) {
            assert_eq!(v.value(a), 0.0);
        } else {
            // the 200-step cap truncates the tail by 0.9^200
            assert!((v.value(a) - exact[s]).abs() < 1e-6, "state {s}");
        }
    }
}

#[test]
fn goal_anchors_are_worth_nothing() {
    let env = Line::new(0.1, 0.9, 0.0);
    let anchors = vec![EnvState::new(vec![0.95]), EnvState::new(vec![0.65])];
    let v = refresh_nn_values(&env, &halves(), &anchors, 3, 100, 100, 0.9, 0).unwrap();
    assert_eq!(v.value(&anchors[0]), 0.0);
    // three deterministic steps to the goal
    assert!((v.value(&anchors[1]) + 1.0 + 0.9 + 0.81).abs() < 1e-12);
}

#[test]
fn more_rollouts_shrink_the_refresh_error() {
    let (mdp, env) = grid_setup(0.3);
    let hier = HierPolicy::uniform(
        Arc::new(grid_partition(env.bounds().clone(), &[1, 1]).unwrap()),
        &PolicyParams::uniform(4),
    );
    let grid = gridworld_grid(4, 4).unwrap();
    let anchors: Vec<EnvState> = (0..16).map(|s| grid.cell_center(s)).collect();
    let exact = evaluate_policy_exact(&mdp, &vec![vec![0.25; 4]; 16]).unwrap();
    let error = |rollouts| {
        let v = refresh_nn_values(&env, &hier, &anchors, rollouts, 300, 300, 0.9, 5).unwrap();
        anchors
            .iter()
            .enumerate()
            .filter(|(_, a)| !env.is_terminal(a))
            .map(|(s, a)| (v.value(a) - exact[s]).abs())
            .sum::<f64>()
            / 15.0
    };
    assert!(error(64) < error(1));
}

/// Options that each repeat one action; samples enumerate every
/// transition with its probability as a multiple of 1/40.
#[test]
fn lstdq_matches_option_value_iteration() {
    let (mdp, _) = grid_setup(0.1);
    let grid = gridworld_grid(4, 4).unwrap();
    let features = FeatureMap::binary_grid(grid.bounds().clone(), vec![4, 4]).unwrap();
    let (n, m, gamma) = (16, 4, 0.9);
    let mut samples = Vec::new();
    for s in 0..n {
        for j in 0..m {
            let mut total = 0;
            for &(t, p) in mdp.transitions(s, j) {
                let copies = (p * 40.0).round() as usize;
                assert!((copies as f64 - p * 40.0).abs() < 1e-9);
                total += copies;
                for _ in 0..copies {
                    samples.push(SmdpSample {
                        state: grid.cell_center(s),
                        option: j,
                        reward: mdp.reward(s, j),
                        duration: 1,
                        next: grid.cell_center(t),
                        terminal: false,
                    });
                }
            }
            assert_eq!(total, 40);
        }
    }
    let fit = smdp_lstdq(&samples, &features, gamma, m, LstdqOptions::default(), |_| 0).unwrap();
    assert!(fit.converged);
    // Q iteration over the option-level model
    let mut q = vec![vec![0.0; m]; n];
    for _ in 0..2000 {
        let v: Vec<f64> = q.iter().map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect();
        q = (0..n)
            .map(|s| {
                (0..m)
                    .map(|j| mdp.reward(s, j) + gamma * mdp.transitions(s, j).iter().map(|&(t, p)| p * v[t]).sum::<f64>())
                    .collect()
            })
            .collect();
    }
    for s in 0..n {
        for j in 0..m {
            let err = (fit.q.q(&grid.cell_center(s), j) - q[s][j]).abs();
            assert!(err <= 1e-4, "state {s} option {j}: {err}");
        }
    }
}
