use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

use crate::env::discretize;
use crate::error::{Error, Result};
use crate::ihomp::{
    ihomp, ihomp_roi, run_ihomp, ContinuousBackend, ContinuousSettings, CurvePoint, Evaluator, IhompConfig, Solver,
    TabularBackend, TabularProblem,
};
use crate::io::write_atomic;
use crate::learning::{ActorCriticConfig, FeatureMap, LstdqOptions, UcbRpsConfig, ValueEstimate};
use crate::mdp::{policy_iteration, value_iteration, EnvModel};
use crate::options::{HierPolicy, PolicyParams};
use crate::partition::grid_partition;
use crate::state::{Bounds, EnvState};

use super::config::{AlgorithmKind, ExperimentConfig, GridWorldSetup, World};

/// Environment variable naming the root that relative output directories
/// resolve against.
pub const OUTPUT_ROOT_VAR: &str = "IHOMP_OUTPUT_ROOT";

const AVI_TOL: f64 = 1e-8;

/// Results of one seed, as written to its output directory.
#[derive(Clone, Debug)]
pub struct SeedResult {
    pub seed: u64,
    pub curve: Vec<CurvePoint>,
    pub policy: HierPolicy,
    pub dir: PathBuf,
}

impl SeedResult {
    pub fn last(&self) -> &CurvePoint {
        self.curve.last().expect("curves are never empty")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub grid: Vec<usize>,
    pub costs: Vec<f64>,
    pub mean_cost: f64,
    pub std: f64,
}

impl SweepRow {
    pub fn label(&self) -> String {
        grid_label(&self.grid)
    }
}

pub fn grid_label(grid: &[usize]) -> String {
    grid.iter().map(|c| c.to_string()).collect::<Vec<_>>().join("x")
}

/// Parse `"1x1,2x2,3x3"` into per-dimension counts.
pub fn parse_grids(text: &str) -> Result<Vec<Vec<usize>>> {
    text.split(',')
        .map(|g| {
            g.trim()
                .split('x')
                .map(|c| {
                    c.trim()
                        .parse::<usize>()
                        .ok()
                        .filter(|&n| n > 0)
                        .ok_or_else(|| Error::config("grids", format!("bad grid `{g}`")))
                })
                .collect()
        })
        .collect()
}

/// Decimal rendering with nine significant digits.
pub fn fmt9(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let exp: i32 = sci.split_once('e').and_then(|(_, e)| e.parse().ok()).unwrap_or(0);
    let decimals = (8 - exp).max(0) as usize;
    format!("{x:.decimals$}")
}

pub fn curve_csv(curve: &[CurvePoint]) -> String {
    let mut out = String::from("iteration,mean_return,std,episodes,success_rate\n");
    for p in curve {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            p.iteration,
            fmt9(p.mean_return),
            fmt9(p.std),
            p.episodes,
            fmt9(p.success_rate)
        );
    }
    out
}

/// Raster cell centres over the first two state dimensions; the remaining
/// coordinates sit at the middle of their range.
pub fn raster_points(bounds: &Bounds, raster: [usize; 2]) -> Vec<(usize, usize, EnvState)> {
    let [rows, cols] = raster;
    let mut base = bounds.center();
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            base[0] = bounds.low()[0] + (c as f64 + 0.5) * bounds.width(0) / cols as f64;
            if bounds.dim() > 1 {
                base[1] = bounds.low()[1] + (r as f64 + 0.5) * bounds.width(1) / rows as f64;
            }
            out.push((r, c, base.clone()));
        }
    }
    out
}

fn raster_csv(bounds: &Bounds, raster: [usize; 2], column: &str, f: impl Fn(&EnvState) -> String) -> String {
    let mut out = format!("row,col,x,y,{column}\n");
    for (r, c, s) in raster_points(bounds, raster) {
        let y = if s.len() > 1 { fmt9(s[1]) } else { "0".into() };
        let _ = writeln!(out, "{r},{c},{},{y},{}", fmt9(s[0]), f(&s));
    }
    out
}

/// Greedy option index per raster cell.
pub fn partition_grid_csv(hier: &HierPolicy, bounds: &Bounds, raster: [usize; 2]) -> String {
    raster_csv(bounds, raster, "option", |s| hier.select(s).to_string())
}

pub fn value_grid_csv(value: &dyn Fn(&EnvState) -> f64, bounds: &Bounds, raster: [usize; 2]) -> String {
    raster_csv(bounds, raster, "value", |s| fmt9(value(s)))
}

/// Directory that `cfg`'s outputs go to: `out` if given, else
/// `output.dir` under [`OUTPUT_ROOT_VAR`] (when set and the dir is relative).
pub fn output_dir(cfg: &ExperimentConfig, out: Option<&Path>) -> PathBuf {
    if let Some(o) = out {
        return o.to_path_buf();
    }
    let dir = Path::new(&cfg.output.dir);
    match std::env::var_os(OUTPUT_ROOT_VAR) {
        Some(root) if dir.is_relative() => PathBuf::from(root).join(dir),
        _ => dir.to_path_buf(),
    }
}

pub fn continuous_settings(cfg: &ExperimentConfig, env: &dyn EnvModel, seed: u64) -> Result<ContinuousSettings> {
    let l = &cfg.learning;
    let solver = match l.solver.as_str() {
        "actor-critic" => Solver::ActorCritic {
            config: ActorCriticConfig {
                episodes: l.ac_episodes,
                alpha_actor: l.alpha_actor,
                alpha_critic: l.alpha_critic,
                ..ActorCriticConfig::default()
            },
            critic: cfg.feature_grid(env, "learning.critic_features", cfg.critic_counts())?,
        },
        "ucb-rps" => Solver::UcbRps(UcbRpsConfig {
            candidates: l.ucb_candidates,
            pulls: l.ucb_pulls,
            exploration: l.ucb_exploration,
            prior_sigma: l.ucb_sigma,
            ..UcbRpsConfig::default()
        }),
        other => return Err(Error::config("learning.solver", format!("unknown solver `{other}`"))),
    };
    let evaluator = match l.evaluator.as_str() {
        "lstd" => Evaluator::Lstd {
            features: cfg.feature_grid(env, "learning.value_features", &l.value_features)?,
            samples: l.lstd_samples,
            ridge: l.ridge,
        },
        "nearest-neighbor" => Evaluator::NearestNeighbor {
            anchors: l.anchors,
            rollouts: l.nn_rollouts,
            horizon: l.nn_horizon,
        },
        other => return Err(Error::config("learning.evaluator", format!("unknown evaluator `{other}`"))),
    };
    let q_features = if cfg.kind()? == AlgorithmKind::IhompRoi {
        cfg.feature_grid(env, "learning.q_features", cfg.q_counts())?
    } else {
        FeatureMap::polynomial(env.dim())
    };
    Ok(ContinuousSettings {
        gamma: cfg.algorithm.gamma,
        solver,
        evaluator,
        q_features,
        q_samples: l.q_samples,
        lstdq: LstdqOptions {
            ridge: l.ridge,
            ..LstdqOptions::default()
        },
        option_cap: l.option_cap,
        eval_episodes: cfg.output.eval_episodes,
        episode_cap: cfg.output.episode_cap,
        seed,
    })
}

struct Trained {
    curve: Vec<CurvePoint>,
    policy: HierPolicy,
    value: Box<dyn Fn(&EnvState) -> f64 + Send + Sync>,
}

fn from_estimate(v: Option<Arc<ValueEstimate>>) -> Box<dyn Fn(&EnvState) -> f64 + Send + Sync> {
    match v {
        Some(v) => Box::new(move |s| v.value(s)),
        None => Box::new(|_| f64::NAN),
    }
}

fn ihomp_config(cfg: &ExperimentConfig, seed: u64) -> Result<IhompConfig> {
    Ok(IhompConfig {
        iterations: cfg.iterations()?,
        class_order: cfg.class_order()?,
        evaluation: cfg.evaluation()?,
        seed,
    })
}

fn train_continuous(cfg: &ExperimentConfig, env: &dyn EnvModel, seed: u64) -> Result<Trained> {
    let kind = cfg.kind()?;
    let settings = continuous_settings(cfg, env, seed)?;
    if kind == AlgorithmKind::AviBaseline {
        let disc = discretize(env, &cfg.learning.avi_grid, cfg.learning.avi_samples, cfg.algorithm.gamma, seed)?;
        let (v, actions) = value_iteration(&disc.mdp, AVI_TOL)?;
        let n_actions = env.action_count();
        let probs = (0..disc.grid.n_cells())
            .flat_map(|c| {
                let best = actions[c];
                (0..n_actions).map(move |a| f64::from(u8::from(a == best)))
            })
            .collect();
        let table = PolicyParams::table(disc.grid.clone(), n_actions, probs)?;
        let partition = Arc::new(grid_partition(env.bounds().clone(), &vec![1; env.dim()])?);
        let policy = HierPolicy::new(partition, vec![table])?;
        let backend = ContinuousBackend::new(env, settings);
        let point = crate::ihomp::summarize_returns(0, &backend.episode_returns(&policy)?);
        return Ok(Trained {
            curve: vec![point],
            policy,
            value: Box::new(move |s| disc.value_at(&v, s)),
        });
    }
    let partition = cfg.partition(env)?;
    let template = cfg.policy_template(env)?;
    let icfg = ihomp_config(cfg, seed)?;
    let (policy, record) = if kind == AlgorithmKind::IhompRoi {
        let roi = cfg.roi(env.reward_span())?;
        let (h, _, r) = ihomp_roi(env, partition, &template, settings, &icfg, &roi)?;
        (h, r)
    } else {
        ihomp(env, partition, &template, settings, &icfg)?
    };
    Ok(Trained {
        curve: record.curve,
        policy,
        value: from_estimate(record.final_value),
    })
}

fn train_tabular(cfg: &ExperimentConfig, setup: &GridWorldSetup, seed: u64) -> Result<Trained> {
    let kind = cfg.kind()?;
    let lattice = setup.env.grid().clone();
    let partition = cfg.partition(&setup.env)?;
    let problem = TabularProblem::new(setup.mdp.clone(), lattice, setup.start, partition.clone())?;
    if kind == AlgorithmKind::AviBaseline {
        let (v, actions) = policy_iteration(&setup.mdp);
        let n_actions = setup.mdp.n_actions();
        let probs = actions
            .iter()
            .flat_map(|&b| (0..n_actions).map(move |a| f64::from(u8::from(a == b))))
            .collect();
        let table = PolicyParams::table(problem.lattice.clone(), n_actions, probs)?;
        let policy = HierPolicy::new(partition, vec![table])?;
        let point = CurvePoint {
            iteration: 0,
            mean_return: v[setup.start],
            std: 0.0,
            episodes: 0,
            success_rate: f64::NAN,
        };
        let est = problem.value_estimate(v);
        return Ok(Trained {
            curve: vec![point],
            policy,
            value: Box::new(move |s| est.value(s)),
        });
    }
    let init = HierPolicy::uniform(partition, &PolicyParams::uniform(setup.mdp.n_actions()));
    let mut backend = TabularBackend::new(problem);
    let roi = if kind == AlgorithmKind::IhompRoi {
        Some(cfg.roi(setup.env.reward_span())?)
    } else {
        None
    };
    let (policy, record) = run_ihomp(&mut backend, init, &ihomp_config(cfg, seed)?, roi.as_ref())?;
    Ok(Trained {
        curve: record.curve,
        policy,
        value: from_estimate(record.final_value),
    })
}

/// Train and write the outputs of a single seed into `dir`.
pub fn run_seed(cfg: &ExperimentConfig, world: &World, seed: u64, dir: &Path) -> Result<SeedResult> {
    log::info!("{} / {}: seed {seed}", cfg.environment.name, cfg.algorithm.kind);
    let trained = match world {
        World::Grid(setup) => train_tabular(cfg, setup, seed)?,
        _ => train_continuous(cfg, world.env(), seed)?,
    };
    std::fs::create_dir_all(dir)?;
    let bounds = world.bounds();
    let raster = cfg.output.raster;
    write_atomic(&dir.join("curve.csv"), curve_csv(&trained.curve).as_bytes())?;
    write_atomic(&dir.join("policy.txt"), trained.policy.to_text().as_bytes())?;
    write_atomic(
        &dir.join("value_grid.csv"),
        value_grid_csv(&*trained.value, bounds, raster).as_bytes(),
    )?;
    if cfg.kind()? == AlgorithmKind::IhompRoi {
        write_atomic(
            &dir.join("partition_grid.csv"),
            partition_grid_csv(&trained.policy, bounds, raster).as_bytes(),
        )?;
    }
    Ok(SeedResult {
        seed,
        curve: trained.curve,
        policy: trained.policy,
        dir: dir.to_path_buf(),
    })
}

/// Run every configured seed, each into `<root>/seed-<seed>`. Seeds that
/// finish keep their outputs even if another seed fails.
pub fn run_experiment(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<Vec<SeedResult>> {
    cfg.validate()?;
    let world = World::build(cfg)?;
    let root = output_dir(cfg, out);
    let results: Vec<Result<SeedResult>> = cfg
        .output
        .seeds
        .par_iter()
        .map(|&seed| run_seed(cfg, &world, seed, &root.join(format!("seed-{seed}"))))
        .collect();
    results.into_iter().collect()
}

/// Run `cfg` once per grid and tabulate the final cost (negated return)
/// across seeds. Writes `sweep.csv` plus each grid's runs under `<root>/<grid>`.
pub fn sweep_partitions(cfg: &ExperimentConfig, grids: &[Vec<usize>], out: Option<&Path>) -> Result<Vec<SweepRow>> {
    if grids.len() < 2 {
        return Err(Error::config("grids", "a sweep needs at least two grids"));
    }
    if !matches!(cfg.kind()?, AlgorithmKind::Ihomp | AlgorithmKind::IhompRoi) {
        return Err(Error::config("algorithm.kind", "sweeps need ihomp or ihomp-roi"));
    }
    let root = output_dir(cfg, out);
    let mut rows = Vec::with_capacity(grids.len());
    for grid in grids {
        let mut c = cfg.clone();
        c.partition.grid = Some(grid.clone());
        c.partition.file = None;
        let results = run_experiment(&c, Some(&root.join(grid_label(grid))))?;
        let costs: Vec<f64> = results.iter().map(|r| -r.last().mean_return).collect();
        let n = costs.len() as f64;
        let mean = costs.iter().sum::<f64>() / n;
        let var = if costs.len() > 1 {
            costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        rows.push(SweepRow {
            grid: grid.clone(),
            costs,
            mean_cost: mean,
            std: var.sqrt(),
        });
    }
    std::fs::create_dir_all(&root)?;
    write_atomic(&root.join("sweep.csv"), sweep_csv(&rows).as_bytes())?;
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("grid,mean_cost,std\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{}", r.label(), fmt9(r.mean_cost), fmt9(r.std));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt9(0.0), "0");
        assert_eq!(fmt9(1.0), "1.00000000");
        assert_eq!(fmt9(-123.456), "-123.456000");
        assert_eq!(fmt9(0.000123456789123), "0.000123456789");
        assert_eq!(fmt9(1234567890123.0), "1234567890123");
        assert_eq!(fmt9(f64::NAN), "nan");
    }

    #[test]
    fn grid_lists() {
        assert_eq!(parse_grids("1x1, 2x2,4x3x1x1").unwrap(), vec![vec![1, 1], vec![2, 2], vec![4, 3, 1, 1]]);
        assert!(parse_grids("2x").is_err());
        assert!(parse_grids("0x2").is_err());
    }

    #[test]
    fn raster_covers_cell_centres() {
        let pts = raster_points(&Bounds::unit(2), [2, 4]);
        assert_eq!(pts.len(), 8);
        assert_eq!(&pts[0].2[..], &[0.125, 0.25]);
        assert_eq!(&pts[7].2[..], &[0.875, 0.75]);
    }
}
