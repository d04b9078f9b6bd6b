use std::sync::Arc;

use ihomp::env::{
    make_corridor, make_s_corridor, AxisBox, CorridorSpec, StartDistribution, ACTION_EAST, ACTION_NORTH, ACTION_WEST,
};
use ihomp::learning::{nn_value, QEstimate};
use ihomp::mdp::{discounted_return, rollout, EnvModel, Transition};
use ihomp::options::{execute_option, run_hierarchical, HierPolicy, PolicyParams, Termination};
use ihomp::rng::Rng;
use ihomp::{grid_partition, Bounds, EnvState};

/// One state that loops onto itself with reward 1.
struct SelfLoop {
    bounds: Bounds,
}

impl EnvModel for SelfLoop {
    fn name(&self) -> &str {
        "self-loop"
    }

    fn action_count(&self) -> usize {
        2
    }

    fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    fn reward_range(&self) -> (f64, f64) {
        (1.0, 1.0)
    }

    fn is_terminal(&self, _s: &EnvState) -> bool {
        false
    }

    fn step(&self, s: &EnvState, _action: usize, _rng: &mut Rng) -> Transition {
        Transition {
            next: s.clone(),
            reward: 1.0,
            terminal: false,
        }
    }

    fn initial_state(&self, _rng: &mut Rng) -> EnvState {
        EnvState::new(vec![0.5])
    }
}

fn deterministic(action: usize) -> PolicyParams {
    mixed(&[action])
}

/// Even mixture over `actions`.
fn mixed(actions: &[usize]) -> PolicyParams {
    let mut logits = vec![0.0; 4];
    for &a in actions {
        logits[a] = 60.0;
    }
    PolicyParams::StateIndependent { logits }
}

fn strip(start: f64) -> ihomp::env::CorridorWorld {
    make_corridor(CorridorSpec {
        rects: vec![AxisBox::new(0.0, 1.0, 0.0, 0.2)],
        goal: AxisBox::new(0.95, 1.0, 0.0, 0.2),
        step_size: 0.05,
        noise_std: 0.0,
        step_cost: 1.0,
        start: StartDistribution::Fixed(vec![start, 0.1]),
    })
    .unwrap()
}

#[test]
fn self_loop_rollout_repeats_the_same_step() {
    let env = SelfLoop {
        bounds: Bounds::unit(1),
    };
    let s0 = EnvState::new(vec![0.5]);
    let traj = rollout(&env, &PolicyParams::uniform(2), &s0, 5, 3).unwrap();
    assert_eq!(traj.len(), 5);
    assert!(traj.hit_cap);
    assert!(traj.steps.iter().all(|st| st.state == s0 && st.next_state == s0 && st.reward == 1.0));
    assert!((discounted_return(&traj, 0.5) - 1.9375).abs() < 1e-12);
}

#[test]
fn rollouts_are_reproducible() {
    let env = make_s_corridor();
    let s0 = EnvState::new(vec![0.1, 0.1]);
    let a = rollout(&env, &PolicyParams::uniform(4), &s0, 200, 11).unwrap();
    let b = rollout(&env, &PolicyParams::uniform(4), &s0, 200, 11).unwrap();
    let c = rollout(&env, &PolicyParams::uniform(4), &s0, 200, 12).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.steps, c.steps);
}

#[test]
fn option_outside_its_class_stops_at_once() {
    let env = strip(0.1);
    let partition = Arc::new(grid_partition(env.bounds().clone(), &[2, 1]).unwrap());
    let hier = HierPolicy::uniform(partition, &deterministic(ACTION_EAST));
    let s0 = EnvState::new(vec![0.1, 0.1]);
    let out = execute_option(&env, &hier, 1, &s0, 50, 0.9, 0).unwrap();
    assert_eq!((out.duration, out.reward, out.hit_cap), (0, 0.0, false));
    assert_eq!(out.exit_state, s0);
}

#[test]
fn eastward_option_crosses_the_cell_edge_in_three_steps() {
    let env = strip(0.37);
    let partition = Arc::new(grid_partition(env.bounds().clone(), &[2, 1]).unwrap());
    let hier = HierPolicy::uniform(partition, &deterministic(ACTION_EAST));
    let out = execute_option(&env, &hier, 0, &EnvState::new(vec![0.37, 0.1]), 50, 0.9, 0).unwrap();
    assert_eq!(out.duration, 3);
    assert!(!out.terminal && !out.hit_cap);
    assert!((out.exit_state[0] - 0.52).abs() < 1e-9);
    // reward -1 per step, discounted
    assert!((out.reward + 1.0 + 0.9 + 0.81).abs() < 1e-12);
}

#[test]
fn option_cap_is_reported() {
    let env = strip(0.1);
    let partition = Arc::new(grid_partition(env.bounds().clone(), &[1, 1]).unwrap());
    let hier = HierPolicy::uniform(partition, &deterministic(ACTION_WEST));
    let out = execute_option(&env, &hier, 0, &EnvState::new(vec![0.1, 0.1]), 7, 0.9, 0).unwrap();
    assert_eq!(out.duration, 7);
    assert!(out.hit_cap);
}

#[test]
fn single_class_hierarchy_reproduces_the_flat_rollout() {
    let env = make_s_corridor();
    let partition = Arc::new(grid_partition(env.bounds().clone(), &[1, 1]).unwrap());
    let policy = PolicyParams::StateIndependent {
        logits: vec![0.3, -0.2, 0.5, 0.0],
    };
    let hier = HierPolicy::uniform(partition, &policy);
    let s0 = EnvState::new(vec![0.1, 0.1]);
    let h = run_hierarchical(&env, &hier, &s0, 150, 150, 4).unwrap();
    let flat = rollout(&env, &policy, &s0, 150, 4).unwrap();
    assert_eq!(h.trajectory.steps, flat.steps);
    assert_eq!(h.segments.len(), 1);
}

fn corridor_options() -> HierPolicy {
    let env = make_s_corridor();
    let partition = Arc::new(grid_partition(env.bounds().clone(), &[1, 5]).unwrap());
    // Bars push along the bar and north; north moves are blocked until the
    // connector is reached.
    let policies = vec![
        mixed(&[ACTION_EAST, ACTION_NORTH]),
        deterministic(ACTION_NORTH),
        mixed(&[ACTION_WEST, ACTION_NORTH]),
        deterministic(ACTION_NORTH),
        deterministic(ACTION_EAST),
    ];
    HierPolicy::new(partition, policies).unwrap()
}

#[test]
fn per_band_directions_follow_the_s_corridor() {
    let env = make_s_corridor();
    let hier = corridor_options();
    let s0 = EnvState::new(vec![0.1, 0.1]);
    for seed in 0..5 {
        let h = run_hierarchical(&env, &hier, &s0, 500, 500, seed).unwrap();
        assert!(h.trajectory.reached_terminal(), "seed {seed}");
        // every state of a segment lies in the running option's class
        for seg in &h.segments {
            for st in &h.trajectory.steps[seg.start..seg.start + seg.duration] {
                assert_eq!(hier.partition().class_index(&st.state), seg.option);
            }
        }
    }
    for action in 0..4 {
        let flat = rollout(&env, &deterministic(action), &s0, 500, 0).unwrap();
        assert!(!flat.reached_terminal());
    }
}

#[test]
fn unreachable_threshold_never_interrupts() {
    let env = make_s_corridor();
    let hier = corridor_options();
    let features = ihomp::learning::FeatureMap::binary_grid(env.bounds().clone(), vec![2, 2]).unwrap();
    let weights = (0..5).map(|j| vec![j as f64; 4]).collect();
    let q = Arc::new(QEstimate::new(features, weights).unwrap());
    let never = hier
        .with_termination(Termination::Interrupt { q, rho: f64::INFINITY })
        .unwrap();
    let s0 = EnvState::new(vec![0.1, 0.1]);
    let h = run_hierarchical(&env, &never, &s0, 300, 300, 2).unwrap();
    // option 4 has the largest value everywhere, so it starts and never stops
    assert_eq!(h.segments.len(), 1);
    assert_eq!(h.segments[0].option, 4);
    let flat = rollout(&env, &deterministic(ACTION_EAST), &s0, 300, 2).unwrap();
    assert_eq!(h.trajectory.steps, flat.steps);
}

#[test]
fn nearest_anchor_wins() {
    let v = nn_value(vec![(EnvState::new(vec![0.0]), 0.0), (EnvState::new(vec![1.0]), 10.0)]).unwrap();
    assert_eq!(v.value(&[0.4]), 0.0);
    assert_eq!(v.value(&[0.6]), 10.0);
    let single = nn_value(vec![(EnvState::new(vec![0.3, 0.3]), -4.0)]).unwrap();
    assert_eq!(single.value(&[0.9, 0.1]), -4.0);
}
