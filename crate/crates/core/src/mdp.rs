//! MDP abstraction, trajectories, discounted returns and exact tabular
//! solvers.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::{self, Rng};
use crate::state::{Bounds, EnvState};

/// Tolerance for action distributions handed to [`rollout`].
pub const DISTRIBUTION_TOL: f64 = 1e-9;
/// Tolerance on each row of a [`TabularMdp`] transition kernel.
pub const KERNEL_TOL: f64 = 1e-12;
pub const DEFAULT_VI_TOL: f64 = 1e-8;
pub const DEFAULT_EPISODE_CAP: usize = 10_000;

/// Outcome of one environment step.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub next: EnvState,
    pub reward: f64,
    pub terminal: bool,
}

/// Black-box episodic dynamics. Implementations are pure given the RNG
/// stream, so rollouts may run concurrently with their own streams.
pub trait EnvModel: Send + Sync {
    fn name(&self) -> &str;

    fn action_count(&self) -> usize;

    fn bounds(&self) -> &Bounds;

    /// Declared `[r_min, r_max]` for a single step.
    fn reward_range(&self) -> (f64, f64);

    fn is_terminal(&self, s: &EnvState) -> bool;

    fn step(&self, s: &EnvState, action: usize, rng: &mut Rng) -> Transition;

    fn initial_state(&self, rng: &mut Rng) -> EnvState;

    fn dim(&self) -> usize {
        self.bounds().dim()
    }

    /// Whether the agent may occupy `s` (inside walls, outside obstacles).
    fn is_admissible(&self, s: &EnvState) -> bool {
        self.bounds().contains(s)
    }

    /// Uniform draw over admissible states.
    fn sample_state(&self, rng: &mut Rng) -> EnvState {
        loop {
            let s = self.bounds().sample(rng);
            if self.is_admissible(&s) {
                return s;
            }
        }
    }

    fn reward_span(&self) -> f64 {
        let (lo, hi) = self.reward_range();
        hi - lo
    }
}

impl<E: EnvModel + ?Sized> EnvModel for Box<E> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn action_count(&self) -> usize {
        (**self).action_count()
    }
    fn bounds(&self) -> &Bounds {
        (**self).bounds()
    }
    fn reward_range(&self) -> (f64, f64) {
        (**self).reward_range()
    }
    fn is_terminal(&self, s: &EnvState) -> bool {
        (**self).is_terminal(s)
    }
    fn step(&self, s: &EnvState, action: usize, rng: &mut Rng) -> Transition {
        (**self).step(s, action, rng)
    }
    fn initial_state(&self, rng: &mut Rng) -> EnvState {
        (**self).initial_state(rng)
    }
    fn is_admissible(&self, s: &EnvState) -> bool {
        (**self).is_admissible(s)
    }
    fn sample_state(&self, rng: &mut Rng) -> EnvState {
        (**self).sample_state(rng)
    }
}

/// Anything that maps a state to a distribution over actions.
pub trait ActionPolicy {
    fn distribution(&self, s: &EnvState) -> Vec<f64>;
}

impl<F> ActionPolicy for F
where
    F: Fn(&EnvState) -> Vec<f64>,
{
    fn distribution(&self, s: &EnvState) -> Vec<f64> {
        self(s)
    }
}

pub fn check_distribution(dist: &[f64], action_count: usize) -> Result<()> {
    if dist.len() != action_count {
        return Err(Error::InvalidPolicy(format!(
            "distribution has {} entries for {action_count} actions",
            dist.len()
        )));
    }
    if dist.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::InvalidPolicy(format!(
            "distribution has negative or non-finite entries: {dist:?}"
        )));
    }
    let total: f64 = dist.iter().sum();
    if (total - 1.0).abs() > DISTRIBUTION_TOL {
        return Err(Error::InvalidPolicy(format!(
            "distribution sums to {total}, not 1"
        )));
    }
    Ok(())
}

/// Inverse-CDF draw. Falls back to the last positive entry on round-off.
pub fn sample_action(dist: &[f64], rng: &mut Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (a, &p) in dist.iter().enumerate() {
        acc += p;
        if u < acc {
            return a;
        }
    }
    dist.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub state: EnvState,
    pub action: usize,
    pub reward: f64,
    pub next_state: EnvState,
    pub terminal: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    pub seed: u64,
    /// The episode was cut by the step cap rather than reaching a terminal.
    pub hit_cap: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn rewards(&self) -> impl Iterator<Item = f64> + '_ {
        self.steps.iter().map(|s| s.reward)
    }

    pub fn reached_terminal(&self) -> bool {
        self.steps.last().is_some_and(|s| s.terminal)
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards().sum()
    }
}

/// Roll `policy` out from `start` for at most `max_steps` steps.
pub fn rollout<E, P>(
    env: &E,
    policy: &P,
    start: &EnvState,
    max_steps: usize,
    seed: u64,
) -> Result<Trajectory>
where
    E: EnvModel + ?Sized,
    P: ActionPolicy + ?Sized,
{
    if max_steps == 0 {
        return Err(Error::Domain("rollout needs max_steps >= 1".into()));
    }
    let mut rng = rng::stream(seed, rng::tag::ROLLOUT, 0);
    let mut steps = Vec::new();
    let mut s = start.clone();
    if env.is_terminal(&s) {
        return Ok(Trajectory {
            steps,
            seed,
            hit_cap: false,
        });
    }
    for _ in 0..max_steps {
        let dist = policy.distribution(&s);
        check_distribution(&dist, env.action_count())?;
        let a = sample_action(&dist, &mut rng);
        let tr = env.step(&s, a, &mut rng);
        let terminal = tr.terminal;
        steps.push(Step {
            state: s,
            action: a,
            reward: tr.reward,
            next_state: tr.next.clone(),
            terminal,
        });
        s = tr.next;
        if terminal {
            return Ok(Trajectory {
                steps,
                seed,
                hit_cap: false,
            });
        }
    }
    Ok(Trajectory {
        steps,
        seed,
        hit_cap: true,
    })
}

/// `sum_t gamma^(t-1) r_t`, with `t` starting at 1.
pub fn discounted_return(traj: &Trajectory, gamma: f64) -> f64 {
    discounted_sum(traj.rewards(), gamma)
}

pub fn discounted_sum(rewards: impl IntoIterator<Item = f64>, gamma: f64) -> f64 {
    let mut discount = 1.0;
    let mut total = 0.0;
    for r in rewards {
        total += discount * r;
        discount *= gamma;
    }
    total
}

/// Finite MDP with a sparse transition kernel and expected rewards `R(s, a)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    gamma: f64,
    /// Row `s * n_actions + a` lists `(s', P(s'|s,a))`, sorted by `s'`.
    kernel: Vec<Vec<(usize, f64)>>,
    rewards: Vec<f64>,
}

impl TabularMdp {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        gamma: f64,
        kernel: Vec<Vec<(usize, f64)>>,
        rewards: Vec<f64>,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidSpec("tabular MDP needs states and actions".into()));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::Domain(format!("gamma = {gamma} is outside [0, 1)")));
        }
        let rows = n_states * n_actions;
        if kernel.len() != rows || rewards.len() != rows {
            return Err(Error::InvalidSpec(format!(
                "expected {rows} kernel rows and rewards, got {} and {}",
                kernel.len(),
                rewards.len()
            )));
        }
        let mut merged_kernel = Vec::with_capacity(rows);
        for (row, mut entries) in kernel.into_iter().enumerate() {
            entries.sort_by_key(|&(t, _)| t);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
            for (t, p) in entries {
                if t >= n_states || !p.is_finite() || p < 0.0 {
                    return Err(Error::InvalidSpec(format!(
                        "row (s={}, a={}): bad entry ({t}, {p})",
                        row / n_actions,
                        row % n_actions
                    )));
                }
                match merged.last_mut() {
                    Some(last) if last.0 == t => last.1 += p,
                    _ => merged.push((t, p)),
                }
            }
            merged.retain(|&(_, p)| p > 0.0);
            let total: f64 = merged.iter().map(|e| e.1).sum();
            if (total - 1.0).abs() > KERNEL_TOL {
                return Err(Error::InvalidSpec(format!(
                    "P(.|s={}, a={}) sums to {total}",
                    row / n_actions,
                    row % n_actions
                )));
            }
            merged_kernel.push(merged);
        }
        if let Some(r) = rewards.iter().find(|r| !r.is_finite()) {
            return Err(Error::InvalidSpec(format!("non-finite reward {r}")));
        }
        Ok(TabularMdp {
            n_states,
            n_actions,
            gamma,
            kernel: merged_kernel,
            rewards,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::Domain(format!("gamma = {gamma} is outside [0, 1)")));
        }
        Ok(TabularMdp {
            gamma,
            ..self.clone()
        })
    }

    pub fn transitions(&self, s: usize, a: usize) -> &[(usize, f64)] {
        &self.kernel[s * self.n_actions + a]
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[s * self.n_actions + a]
    }

    pub fn reward_range(&self) -> (f64, f64) {
        self.rewards
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
                (lo.min(r), hi.max(r))
            })
    }

    /// `R(s,a) + gamma * sum_s' P(s'|s,a) v(s')`.
    pub fn backup(&self, v: &[f64], s: usize, a: usize) -> f64 {
        self.reward(s, a)
            + self.gamma
                * self
                    .transitions(s, a)
                    .iter()
                    .map(|&(t, p)| p * v[t])
                    .sum::<f64>()
    }

    /// Greedy action under `v`; exact ties go to the lowest action index.
    pub fn greedy_action(&self, v: &[f64], s: usize) -> (usize, f64) {
        let mut best = (0, self.backup(v, s, 0));
        for a in 1..self.n_actions {
            let q = self.backup(v, s, a);
            if q > best.1 {
                best = (a, q);
            }
        }
        best
    }

    pub fn bellman_residual(&self, v: &[f64]) -> f64 {
        (0..self.n_states)
            .map(|s| (self.greedy_action(v, s).1 - v[s]).abs())
            .fold(0.0, f64::max)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (hline, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "missing header `n_states n_actions gamma`"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::parse(hline, "header must be `n_states n_actions gamma`"));
        }
        let n_states: usize = fields[0]
            .parse()
            .map_err(|_| Error::parse(hline, format!("bad n_states `{}`", fields[0])))?;
        let n_actions: usize = fields[1]
            .parse()
            .map_err(|_| Error::parse(hline, format!("bad n_actions `{}`", fields[1])))?;
        let gamma: f64 = fields[2]
            .parse()
            .map_err(|_| Error::parse(hline, format!("bad gamma `{}`", fields[2])))?;
        let rows = n_states
            .checked_mul(n_actions)
            .ok_or_else(|| Error::parse(hline, "state/action counts overflow"))?;
        let mut kernel = vec![Vec::new(); rows];
        let mut weighted_reward = vec![0.0; rows];
        for (lineno, line) in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 5 {
                return Err(Error::parse(lineno, "expected `s a s' prob reward`"));
            }
            let idx = |i: usize, bound: usize, what: &str| -> Result<usize> {
                let v: usize = f[i]
                    .parse()
                    .map_err(|_| Error::parse(lineno, format!("bad {what} `{}`", f[i])))?;
                if v >= bound {
                    return Err(Error::parse(lineno, format!("{what} {v} out of range")));
                }
                Ok(v)
            };
            let s = idx(0, n_states, "state")?;
            let a = idx(1, n_actions, "action")?;
            let t = idx(2, n_states, "next state")?;
            let p: f64 = f[3]
                .parse()
                .map_err(|_| Error::parse(lineno, format!("bad probability `{}`", f[3])))?;
            let r: f64 = f[4]
                .parse()
                .map_err(|_| Error::parse(lineno, format!("bad reward `{}`", f[4])))?;
            kernel[s * n_actions + a].push((t, p));
            weighted_reward[s * n_actions + a] += p * r;
        }
        TabularMdp::new(n_states, n_actions, gamma, kernel, weighted_reward)
            .map_err(|e| match e {
                Error::InvalidSpec(msg) | Error::Domain(msg) => Error::parse(hline, msg),
                other => other,
            })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| e.with_path(path))
    }

    /// Serialize in the sparse text format; the reward column repeats
    /// `R(s, a)` on every line of the row.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {:.17e}\n", self.n_states, self.n_actions, self.gamma);
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let r = self.reward(s, a);
                for &(t, p) in self.transitions(s, a) {
                    let _ = writeln!(out, "{s} {a} {t} {p:.17e} {r:.17e}");
                }
            }
        }
        out
    }
}

/// Row-stochastic table, one distribution per state.
pub type PolicyTable = Vec<Vec<f64>>;

pub fn deterministic_policy(actions: &[usize], n_actions: usize) -> PolicyTable {
    actions
        .iter()
        .map(|&a| {
            let mut row = vec![0.0; n_actions];
            row[a] = 1.0;
            row
        })
        .collect()
}

pub fn uniform_policy(n_states: usize, n_actions: usize) -> PolicyTable {
    vec![vec![1.0 / n_actions as f64; n_actions]; n_states]
}

/// Value iteration until the sup-norm Bellman residual of the returned
/// table is at most `tol`.
pub fn value_iteration(m: &TabularMdp, tol: f64) -> Result<(Vec<f64>, Vec<usize>)> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance {tol} must be positive")));
    }
    let mut v = vec![0.0; m.n_states()];
    let mut next = vec![0.0; m.n_states()];
    loop {
        let mut residual: f64 = 0.0;
        for s in 0..m.n_states() {
            next[s] = m.greedy_action(&v, s).1;
            residual = residual.max((next[s] - v[s]).abs());
        }
        if residual <= tol {
            break;
        }
        std::mem::swap(&mut v, &mut next);
    }
    let policy = (0..m.n_states()).map(|s| m.greedy_action(&v, s).0).collect();
    Ok((v, policy))
}

/// Dense LU below this size, Gauss-Seidel sweeps above it.
const DENSE_SOLVE_LIMIT: usize = 2000;
const EXACT_RESIDUAL: f64 = 1e-10;

/// Solve `v = r + gamma * P v` for a Markov chain given as sparse rows.
/// For `gamma < 1` the system `I - gamma P` is strictly diagonally dominant
/// and therefore never singular.
pub fn solve_markov_chain(rows: &[Vec<(usize, f64)>], rewards: &[f64], gamma: f64) -> Vec<f64> {
    let n = rows.len();
    if n <= DENSE_SOLVE_LIMIT {
        let mut a = DMatrix::<f64>::identity(n, n);
        for (s, row) in rows.iter().enumerate() {
            for &(t, p) in row {
                a[(s, t)] -= gamma * p;
            }
        }
        let b = DVector::from_column_slice(rewards);
        let lu = a.lu();
        let mut v: Vec<f64> = lu
            .solve(&b)
            .expect("I - gamma P is non-singular for gamma < 1")
            .iter()
            .copied()
            .collect();
        // One refinement pass tightens the residual for ill-conditioned
        // gamma close to 1.
        for _ in 0..2 {
            let residual = chain_residual(rows, rewards, gamma, &v);
            if residual <= EXACT_RESIDUAL * 1e-2 {
                break;
            }
            let mut r = DVector::zeros(n);
            for s in 0..n {
                let tv = rewards[s] + gamma * rows[s].iter().map(|&(t, p)| p * v[t]).sum::<f64>();
                r[s] = tv - v[s];
            }
            if let Some(dv) = lu.solve(&r) {
                for s in 0..n {
                    v[s] += dv[s];
                }
            }
        }
        v
    } else {
        let mut v = vec![0.0; n];
        loop {
            for s in 0..n {
                let mut acc = rewards[s];
                let mut self_p = 0.0;
                for &(t, p) in &rows[s] {
                    if t == s {
                        self_p += p;
                    } else {
                        acc += gamma * p * v[t];
                    }
                }
                v[s] = acc / (1.0 - gamma * self_p);
            }
            if chain_residual(rows, rewards, gamma, &v) <= EXACT_RESIDUAL {
                return v;
            }
        }
    }
}

fn chain_residual(rows: &[Vec<(usize, f64)>], rewards: &[f64], gamma: f64, v: &[f64]) -> f64 {
    rows.iter()
        .enumerate()
        .map(|(s, row)| {
            let tv = rewards[s] + gamma * row.iter().map(|&(t, p)| p * v[t]).sum::<f64>();
            (tv - v[s]).abs()
        })
        .fold(0.0, f64::max)
}

/// Markov chain induced by a stochastic policy table.
pub fn policy_chain(m: &TabularMdp, policy: &[Vec<f64>]) -> Result<(Vec<Vec<(usize, f64)>>, Vec<f64>)> {
    if policy.len() != m.n_states() {
        return Err(Error::InvalidPolicy(format!(
            "policy table has {} rows for {} states",
            policy.len(),
            m.n_states()
        )));
    }
    let mut rows = Vec::with_capacity(m.n_states());
    let mut rewards = Vec::with_capacity(m.n_states());
    for (s, dist) in policy.iter().enumerate() {
        check_distribution(dist, m.n_actions())?;
        let mut row: Vec<(usize, f64)> = Vec::new();
        let mut r = 0.0;
        for (a, &pa) in dist.iter().enumerate() {
            if pa == 0.0 {
                continue;
            }
            r += pa * m.reward(s, a);
            row.extend(m.transitions(s, a).iter().map(|&(t, p)| (t, pa * p)));
        }
        row.sort_by_key(|e| e.0);
        row.dedup_by(|later, earlier| {
            if later.0 == earlier.0 {
                earlier.1 += later.1;
                true
            } else {
                false
            }
        });
        rows.push(row);
        rewards.push(r);
    }
    Ok((rows, rewards))
}

/// `V^pi` from the linear Bellman system, residual at most 1e-10.
pub fn evaluate_policy_exact(m: &TabularMdp, policy: &[Vec<f64>]) -> Result<Vec<f64>> {
    let (rows, rewards) = policy_chain(m, policy)?;
    Ok(solve_markov_chain(&rows, &rewards, m.gamma()))
}

/// Howard policy iteration seeded from value iteration. Returns the exact
/// optimal values (up to linear-solve round-off) and a greedy policy with
/// lowest-index tie-breaking.
pub fn policy_iteration(m: &TabularMdp) -> (Vec<f64>, Vec<usize>) {
    let (_, mut policy) = value_iteration(m, 1e-6).expect("positive tolerance");
    loop {
        let table = deterministic_policy(&policy, m.n_actions());
        let v = evaluate_policy_exact(m, &table).expect("deterministic table is valid");
        let mut changed = false;
        for s in 0..m.n_states() {
            let current = m.backup(&v, s, policy[s]);
            let (a, q) = m.greedy_action(&v, s);
            // Only switch on a strict improvement beyond round-off so the
            // loop cannot cycle between tied actions.
            if q > current + 1e-12 * (1.0 + current.abs()) && a != policy[s] {
                policy[s] = a;
                changed = true;
            }
        }
        if !changed {
            return (v, policy);
        }
    }
}
