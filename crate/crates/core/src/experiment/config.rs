use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;

use crate::env::{
    make_corridor, make_gridworld, make_mountain_car, make_pinball, make_puddle_world, make_s_corridor, make_two_rooms,
    AxisBox, Capsule, CorridorWorld, Disc, MountainCar, MountainCarSpec, Pinball, PinballSpec, PuddleSpec, PuddleWorld,
    RoomsSpec, StartDistribution, TabularEnv, TwoRooms, Wall, WallAxis,
};
use crate::error::{Error, Result};
use crate::ihomp::{required_iterations, ClassOrder, EvaluationPlacement, RhoSchedule, RoiConfig};
use crate::learning::FeatureMap;
use crate::mdp::{EnvModel, TabularMdp};
use crate::partition::{grid_partition, Partition};
use crate::state::Bounds;

pub const ENVIRONMENTS: [&str; 6] = ["puddle-world", "two-rooms", "s-corridor", "mountain-car", "pinball", "gridworld"];

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub environment: EnvironmentSection,
    #[serde(default)]
    pub partition: PartitionSection,
    pub algorithm: AlgorithmSection,
    #[serde(default)]
    pub learning: LearningSection,
    #[serde(default)]
    pub output: OutputSection,
    /// Directory relative paths in the file resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct WallSection {
    pub axis: String,
    pub at: f64,
    #[serde(default)]
    pub from: Option<f64>,
    #[serde(default)]
    pub to: Option<f64>,
    #[serde(default)]
    pub gaps: Vec<[f64; 2]>,
}

/// Environment name plus optional overrides of its built-in spec.
#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSection {
    pub name: String,
    pub step_size: Option<f64>,
    pub noise_std: Option<f64>,
    pub step_cost: Option<f64>,
    pub puddle_cost_scale: Option<f64>,
    /// Fixed start state; `[col, row]` for the gridworld.
    pub start: Option<Vec<f64>>,
    /// Uniform start box `[x0, x1, y0, y1]`.
    pub start_box: Option<[f64; 4]>,
    /// Goal box `[x0, x1, y0, y1]`, goal disc `[cx, cy, r]` for pinball, or
    /// goal cell `[col, row]` for the gridworld.
    pub goal: Option<Vec<f64>>,
    /// Capsules `[ax, ay, bx, by, radius]`.
    pub puddles: Option<Vec<[f64; 5]>>,
    pub walls: Option<Vec<WallSection>>,
    /// Pinball obstacle file.
    pub layout: Option<String>,
    pub drag: Option<f64>,
    pub impulse: Option<f64>,
    pub thrust_cost: Option<f64>,
    pub idle_cost: Option<f64>,
    pub width: Option<usize>,
    pub height: Option<usize>,
    /// Gridworld slip probability.
    pub noise: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PartitionSection {
    /// Classes per dimension, e.g. `[4, 3, 1, 1]`.
    pub grid: Option<Vec<usize>>,
    /// Partition text file, as written by `Partition::to_text`.
    pub file: Option<String>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSection {
    pub kind: String,
    pub iterations: Option<usize>,
    pub epsilon: Option<f64>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_class_order")]
    pub class_order: String,
    #[serde(default = "default_evaluation")]
    pub evaluation: String,
    pub rho: Option<f64>,
    pub rho_floor: Option<f64>,
}

fn default_gamma() -> f64 {
    0.95
}

fn default_class_order() -> String {
    "ascending".into()
}

fn default_evaluation() -> String {
    "per-update".into()
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct LearningSection {
    pub policy: String,
    pub solver: String,
    pub evaluator: String,
    /// Binary-grid counts of the value features.
    pub value_features: Vec<usize>,
    pub lstd_samples: usize,
    pub ridge: f64,
    pub anchors: usize,
    pub nn_rollouts: usize,
    pub nn_horizon: usize,
    pub ac_episodes: usize,
    pub alpha_actor: f64,
    pub alpha_critic: f64,
    /// Binary-grid counts of the actor-critic critic; defaults to the value
    /// features.
    pub critic_features: Option<Vec<usize>>,
    pub ucb_candidates: usize,
    pub ucb_pulls: usize,
    pub ucb_exploration: f64,
    pub ucb_sigma: f64,
    pub option_cap: usize,
    pub q_features: Option<Vec<usize>>,
    pub q_samples: usize,
    pub avi_grid: Vec<usize>,
    pub avi_samples: usize,
}

impl Default for LearningSection {
    fn default() -> Self {
        LearningSection {
            policy: "state-independent".into(),
            solver: "actor-critic".into(),
            evaluator: "lstd".into(),
            value_features: vec![20, 20],
            lstd_samples: 2000,
            ridge: crate::learning::DEFAULT_RIDGE,
            anchors: 1000,
            nn_rollouts: 1,
            nn_horizon: 200,
            ac_episodes: 2000,
            alpha_actor: 0.01,
            alpha_critic: 0.1,
            critic_features: None,
            ucb_candidates: 64,
            ucb_pulls: 1280,
            ucb_exploration: 1.0,
            ucb_sigma: 1.0,
            option_cap: crate::options::DEFAULT_OPTION_CAP,
            q_features: None,
            q_samples: 2000,
            avi_grid: vec![50, 50],
            avi_samples: 20,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
    pub seeds: Vec<u64>,
    pub eval_episodes: usize,
    pub episode_cap: usize,
    /// `[rows, cols]` of the value and partition dumps.
    pub raster: [usize; 2],
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: "out".into(),
            seeds: vec![0],
            eval_episodes: 100,
            episode_cap: 1000,
            raster: [50, 50],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AlgorithmKind {
    Flat,
    Ihomp,
    IhompRoi,
    AviBaseline,
}

impl AlgorithmKind {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "flat" => AlgorithmKind::Flat,
            "ihomp" => AlgorithmKind::Ihomp,
            "ihomp-roi" => AlgorithmKind::IhompRoi,
            "avi-baseline" => AlgorithmKind::AviBaseline,
            other => {
                return Err(Error::config(
                    "algorithm.kind",
                    format!("unknown algorithm `{other}` (expected flat, ihomp, ihomp-roi or avi-baseline)"),
                ))
            }
        })
    }
}

/// Split `section.key=value` and set it in `table`. The value is read as a
/// TOML value, falling back to a plain string.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::config(spec, "override must look like section.key=value"))?;
    let path = path.trim();
    let (section, key) = path
        .split_once('.')
        .ok_or_else(|| Error::config(path, "override key must be section.key"))?;
    let value = format!("v = {}", raw.trim())
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    let entry = table
        .entry(section.to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    match entry {
        toml::Value::Table(t) => {
            t.insert(key.to_string(), value);
            Ok(())
        }
        _ => Err(Error::config(section, "is not a section")),
    }
}

/// `section.key` of the entry on the line containing byte `offset`.
fn key_at(text: &str, offset: usize) -> String {
    let mut section = String::new();
    let mut key = String::new();
    let mut pos = 0;
    for line in text.split_inclusive('\n') {
        let t = line.trim();
        if t.starts_with('[') {
            section = t.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            key.clear();
        } else if let Some((k, _)) = t.split_once('=') {
            key = k.trim().to_string();
        }
        pos += line.len();
        if pos > offset {
            break;
        }
    }
    match (section.is_empty(), key.is_empty()) {
        (true, _) => key,
        (false, true) => section,
        (false, false) => format!("{section}.{key}"),
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str, overrides: &[String], base_dir: impl Into<PathBuf>) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
            let key = e.span().map(|s| key_at(text, s.start)).unwrap_or_default();
            Error::config(key, e.message().to_string())
        })?;
        let mut table = table;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let mut cfg: ExperimentConfig = if overrides.is_empty() {
            toml::from_str(text).map_err(|e| {
                let key = e.span().map(|s| key_at(text, s.start)).unwrap_or_default();
                Error::config(key, e.message().to_string())
            })?
        } else {
            table
                .try_into()
                .map_err(|e: toml::de::Error| Error::config("<override>", e.message().to_string()))?
        };
        cfg.base_dir = base_dir.into();
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>, overrides: &[String]) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, overrides, base)
    }

    pub fn kind(&self) -> Result<AlgorithmKind> {
        AlgorithmKind::parse(&self.algorithm.kind)
    }

    pub fn resolve(&self, rel: &str) -> PathBuf {
        let p = Path::new(rel);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn iterations(&self) -> Result<usize> {
        match (self.algorithm.iterations, self.algorithm.epsilon) {
            (Some(0), _) => Err(Error::config("algorithm.iterations", "must be at least 1")),
            (Some(k), _) => Ok(k),
            (None, Some(eps)) => required_iterations(self.algorithm.gamma, eps)
                .map_err(|e| Error::config("algorithm.epsilon", e.to_string())),
            (None, None) => Err(Error::config("algorithm.iterations", "set iterations or epsilon")),
        }
    }

    pub fn class_order(&self) -> Result<ClassOrder> {
        Ok(match self.algorithm.class_order.as_str() {
            "ascending" => ClassOrder::Ascending,
            "reversed" => ClassOrder::Reversed,
            "random" => ClassOrder::Random,
            other => return Err(Error::config("algorithm.class_order", format!("unknown order `{other}`"))),
        })
    }

    pub fn evaluation(&self) -> Result<EvaluationPlacement> {
        Ok(match self.algorithm.evaluation.as_str() {
            "per-update" => EvaluationPlacement::PerUpdate,
            "per-sweep" => EvaluationPlacement::PerSweep,
            other => return Err(Error::config("algorithm.evaluation", format!("unknown placement `{other}`"))),
        })
    }

    pub fn roi(&self, span: f64) -> Result<RoiConfig> {
        let mut roi = match self.algorithm.rho {
            Some(rho) => RoiConfig::constant(rho),
            None => RoiConfig::default_for_span(span),
        };
        if !(roi.rho >= 0.0) {
            return Err(Error::config("algorithm.rho", "must be non-negative"));
        }
        if let Some(floor) = self.algorithm.rho_floor {
            if !(floor >= 0.0 && floor <= roi.rho) {
                return Err(Error::config("algorithm.rho_floor", "must lie in [0, rho]"));
            }
            roi.schedule = RhoSchedule::Linear { floor };
        }
        Ok(roi)
    }

    /// Schema, range and cross-field checks. Builds the environment and the
    /// partition but runs nothing.
    pub fn validate(&self) -> Result<()> {
        let kind = self.kind()?;
        let g = self.algorithm.gamma;
        if !(0.0..1.0).contains(&g) {
            return Err(Error::config("algorithm.gamma", format!("{g} is outside [0, 1)")));
        }
        if kind != AlgorithmKind::AviBaseline {
            self.iterations()?;
        }
        self.class_order()?;
        self.evaluation()?;
        if self.output.seeds.is_empty() {
            return Err(Error::config("output.seeds", "needs at least one seed"));
        }
        if self.output.eval_episodes == 0 {
            return Err(Error::config("output.eval_episodes", "must be positive"));
        }
        if self.output.raster.contains(&0) {
            return Err(Error::config("output.raster", "counts must be positive"));
        }
        let world = World::build(self)?;
        let env = world.env();
        if !matches!(kind, AlgorithmKind::Flat | AlgorithmKind::AviBaseline) {
            self.partition(env)?;
        }
        if kind == AlgorithmKind::IhompRoi {
            self.roi(env.reward_span())?;
        }
        if !world.is_tabular() {
            if kind == AlgorithmKind::AviBaseline && env.dim() != self.learning.avi_grid.len() {
                return Err(Error::config(
                    "learning.avi_grid",
                    format!("has {} counts for a {}-D state", self.learning.avi_grid.len(), env.dim()),
                ));
            }
            self.policy_template(env)?;
            match self.learning.solver.as_str() {
                "actor-critic" => {
                    self.feature_grid(env, "learning.critic_features", self.critic_counts())?;
                }
                "ucb-rps" => {}
                other => return Err(Error::config("learning.solver", format!("unknown solver `{other}`"))),
            }
            match self.learning.evaluator.as_str() {
                "lstd" => {
                    self.feature_grid(env, "learning.value_features", &self.learning.value_features)?;
                }
                "nearest-neighbor" => {
                    if self.learning.anchors == 0 || self.learning.nn_rollouts == 0 {
                        return Err(Error::config("learning.anchors", "anchors and rollouts must be positive"));
                    }
                }
                other => return Err(Error::config("learning.evaluator", format!("unknown evaluator `{other}`"))),
            }
            if kind == AlgorithmKind::IhompRoi {
                self.feature_grid(env, "learning.q_features", self.q_counts())?;
            }
        }
        Ok(())
    }

    pub(crate) fn critic_counts(&self) -> &[usize] {
        self.learning.critic_features.as_deref().unwrap_or(&self.learning.value_features)
    }

    pub(crate) fn q_counts(&self) -> &[usize] {
        self.learning.q_features.as_deref().unwrap_or(&self.learning.value_features)
    }

    pub(crate) fn feature_grid(&self, env: &dyn EnvModel, key: &str, counts: &[usize]) -> Result<FeatureMap> {
        if counts.len() != env.dim() {
            return Err(Error::config(
                key,
                format!("has {} counts for a {}-D state", counts.len(), env.dim()),
            ));
        }
        FeatureMap::binary_grid(env.bounds().clone(), counts.to_vec()).map_err(|e| Error::config(key, e.to_string()))
    }

    pub(crate) fn policy_template(&self, env: &dyn EnvModel) -> Result<crate::options::PolicyParams> {
        use crate::options::PolicyParams;
        match self.learning.policy.as_str() {
            "state-independent" => Ok(PolicyParams::uniform(env.action_count())),
            "linear" => Ok(PolicyParams::uniform_linear(env.action_count(), env.dim())),
            other => Err(Error::config("learning.policy", format!("unknown policy family `{other}`"))),
        }
    }

    /// Partition of the configured algorithm; a single class for `flat` and
    /// `avi-baseline`.
    pub fn partition(&self, env: &dyn EnvModel) -> Result<Arc<Partition>> {
        let bounds = env.bounds().clone();
        if matches!(self.kind()?, AlgorithmKind::Flat | AlgorithmKind::AviBaseline) {
            return Ok(Arc::new(grid_partition(bounds.clone(), &vec![1; bounds.dim()])?));
        }
        match (&self.partition.grid, &self.partition.file) {
            (Some(_), Some(_)) => Err(Error::config("partition", "set either grid or file, not both")),
            (Some(counts), None) => {
                if counts.len() != env.dim() {
                    return Err(Error::config(
                        "partition.grid",
                        format!(
                            "dimension mismatch: {} counts for the {}-D state of {}",
                            counts.len(),
                            env.dim(),
                            self.environment.name
                        ),
                    ));
                }
                grid_partition(bounds, counts)
                    .map(Arc::new)
                    .map_err(|e| Error::config("partition.grid", e.to_string()))
            }
            (None, Some(file)) => {
                let text = std::fs::read_to_string(self.resolve(file))
                    .map_err(|e| Error::config("partition.file", e.to_string()))?;
                let p = Partition::parse(&text).map_err(|e| Error::config("partition.file", e.to_string()))?;
                if p.dim() != env.dim() {
                    return Err(Error::config("partition.file", "dimension mismatch with the environment"));
                }
                Ok(Arc::new(p))
            }
            (None, None) => Err(Error::config("partition.grid", "missing")),
        }
    }
}

/// A configured environment.
pub enum World {
    Puddle(PuddleWorld),
    Rooms(TwoRooms),
    Corridor(CorridorWorld),
    MountainCar(MountainCar),
    Pinball(Pinball),
    Grid(GridWorldSetup),
}

pub struct GridWorldSetup {
    pub env: TabularEnv,
    pub mdp: TabularMdp,
    pub start: usize,
}

fn unused(section: &EnvironmentSection, allowed: &[&str]) -> Result<()> {
    let set = [
        ("step_size", section.step_size.is_some()),
        ("noise_std", section.noise_std.is_some()),
        ("step_cost", section.step_cost.is_some()),
        ("puddle_cost_scale", section.puddle_cost_scale.is_some()),
        ("start", section.start.is_some()),
        ("start_box", section.start_box.is_some()),
        ("goal", section.goal.is_some()),
        ("puddles", section.puddles.is_some()),
        ("walls", section.walls.is_some()),
        ("layout", section.layout.is_some()),
        ("drag", section.drag.is_some()),
        ("impulse", section.impulse.is_some()),
        ("thrust_cost", section.thrust_cost.is_some()),
        ("idle_cost", section.idle_cost.is_some()),
        ("width", section.width.is_some()),
        ("height", section.height.is_some()),
        ("noise", section.noise.is_some()),
    ];
    for (key, present) in set {
        if present && !allowed.contains(&key) {
            return Err(Error::config(
                format!("environment.{key}"),
                format!("not used by {}", section.name),
            ));
        }
    }
    Ok(())
}

fn goal_box(goal: &[f64]) -> Result<AxisBox> {
    match goal {
        &[x0, x1, y0, y1] => Ok(AxisBox::new(x0, x1, y0, y1)),
        _ => Err(Error::config("environment.goal", "expected [x0, x1, y0, y1]")),
    }
}

fn start_of(section: &EnvironmentSection, current: StartDistribution) -> Result<StartDistribution> {
    match (&section.start, &section.start_box) {
        (Some(_), Some(_)) => Err(Error::config("environment.start", "set either start or start_box")),
        (Some(p), None) if p.len() == 2 => Ok(StartDistribution::Fixed(p.clone())),
        (Some(_), None) => Err(Error::config("environment.start", "expected [x, y]")),
        (None, Some([x0, x1, y0, y1])) => Ok(StartDistribution::Uniform(AxisBox::new(*x0, *x1, *y0, *y1))),
        (None, None) => Ok(current),
    }
}

fn spec_err(e: Error) -> Error {
    Error::config("environment", e.to_string())
}

impl World {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self> {
        let s = &cfg.environment;
        let planar = ["step_size", "noise_std", "step_cost", "start", "start_box", "goal"];
        match s.name.as_str() {
            "puddle-world" => {
                unused(s, &[&planar[..], &["puddle_cost_scale", "puddles"]].concat())?;
                let mut spec = PuddleSpec::default();
                if let Some(p) = &s.puddles {
                    spec.puddles = p
                        .iter()
                        .map(|&[ax, ay, bx, by, radius]| Capsule {
                            a: [ax, ay],
                            b: [bx, by],
                            radius,
                        })
                        .collect();
                }
                spec.step_size = s.step_size.unwrap_or(spec.step_size);
                spec.noise_std = s.noise_std.unwrap_or(spec.noise_std);
                spec.step_cost = s.step_cost.unwrap_or(spec.step_cost);
                spec.puddle_cost_scale = s.puddle_cost_scale.unwrap_or(spec.puddle_cost_scale);
                if let Some(g) = &s.goal {
                    spec.goal = goal_box(g)?;
                }
                spec.start = start_of(s, spec.start)?;
                make_puddle_world(spec).map(World::Puddle).map_err(spec_err)
            }
            "two-rooms" => {
                unused(s, &[&planar[..], &["walls"]].concat())?;
                let mut spec = RoomsSpec::default();
                if let Some(walls) = &s.walls {
                    spec.walls = walls
                        .iter()
                        .map(|w| {
                            let axis = match w.axis.as_str() {
                                "vertical" => WallAxis::Vertical { at: w.at },
                                "horizontal" => WallAxis::Horizontal { at: w.at },
                                other => {
                                    return Err(Error::config(
                                        "environment.walls",
                                        format!("unknown axis `{other}` (expected vertical or horizontal)"),
                                    ))
                                }
                            };
                            Ok(Wall {
                                axis,
                                from: w.from.unwrap_or(0.0),
                                to: w.to.unwrap_or(1.0),
                                gaps: w.gaps.iter().map(|g| (g[0], g[1])).collect(),
                            })
                        })
                        .collect::<Result<_>>()?;
                }
                spec.step_size = s.step_size.unwrap_or(spec.step_size);
                spec.noise_std = s.noise_std.unwrap_or(spec.noise_std);
                spec.step_cost = s.step_cost.unwrap_or(spec.step_cost);
                if let Some(g) = &s.goal {
                    spec.goal = goal_box(g)?;
                }
                spec.start = start_of(s, spec.start)?;
                make_two_rooms(spec).map(World::Rooms).map_err(spec_err)
            }
            "s-corridor" => {
                unused(s, &planar)?;
                let mut spec = make_s_corridor().spec().clone();
                spec.step_size = s.step_size.unwrap_or(spec.step_size);
                spec.noise_std = s.noise_std.unwrap_or(spec.noise_std);
                spec.step_cost = s.step_cost.unwrap_or(spec.step_cost);
                if let Some(g) = &s.goal {
                    spec.goal = goal_box(g)?;
                }
                spec.start = start_of(s, spec.start)?;
                make_corridor(spec).map(World::Corridor).map_err(spec_err)
            }
            "mountain-car" => {
                unused(s, &[])?;
                make_mountain_car(MountainCarSpec::default())
                    .map(World::MountainCar)
                    .map_err(spec_err)
            }
            "pinball" => {
                unused(s, &["layout", "drag", "impulse", "thrust_cost", "idle_cost", "goal", "start"])?;
                let layout = s
                    .layout
                    .as_ref()
                    .ok_or_else(|| Error::config("environment.layout", "pinball needs an obstacle file"))?;
                let mut spec: PinballSpec =
                    PinballSpec::load(cfg.resolve(layout)).map_err(|e| Error::config("environment.layout", e.to_string()))?;
                spec.drag = s.drag.unwrap_or(spec.drag);
                spec.impulse = s.impulse.unwrap_or(spec.impulse);
                spec.thrust_cost = s.thrust_cost.unwrap_or(spec.thrust_cost);
                spec.idle_cost = s.idle_cost.unwrap_or(spec.idle_cost);
                if let Some(g) = &s.goal {
                    let &[cx, cy, radius] = g.as_slice() else {
                        return Err(Error::config("environment.goal", "expected [cx, cy, radius]"));
                    };
                    spec.goal = Disc {
                        center: [cx, cy],
                        radius,
                    };
                }
                if let Some(p) = &s.start {
                    let &[x, y] = p.as_slice() else {
                        return Err(Error::config("environment.start", "expected [x, y]"));
                    };
                    spec.starts = vec![[x, y]];
                }
                make_pinball(spec).map(World::Pinball).map_err(spec_err)
            }
            "gridworld" => {
                unused(s, &["width", "height", "goal", "noise", "start"])?;
                let w = s.width.unwrap_or(5);
                let h = s.height.unwrap_or(5);
                let cell = |v: &Option<Vec<f64>>, key: &str, default: (usize, usize)| -> Result<(usize, usize)> {
                    match v.as_deref() {
                        None => Ok(default),
                        Some(&[c, r]) if c >= 0.0 && r >= 0.0 && c.fract() == 0.0 && r.fract() == 0.0 => {
                            Ok((c as usize, r as usize))
                        }
                        Some(_) => Err(Error::config(key, "expected [col, row] with integer entries")),
                    }
                };
                let goal = cell(&s.goal, "environment.goal", (w.saturating_sub(1), h.saturating_sub(1)))?;
                let (sc, sr) = cell(&s.start, "environment.start", (0, 0))?;
                if sc >= w || sr >= h {
                    return Err(Error::config("environment.start", "outside the grid"));
                }
                let mdp = make_gridworld(w, h, goal, s.noise.unwrap_or(0.1), cfg.algorithm.gamma.max(0.0))
                    .map_err(spec_err)?;
                let start = sr * w + sc;
                let grid = crate::env::gridworld_grid(w, h).map_err(spec_err)?;
                let env = TabularEnv::new(mdp.clone(), grid, start).map_err(spec_err)?;
                Ok(World::Grid(GridWorldSetup { env, mdp, start }))
            }
            other => Err(Error::config(
                "environment.name",
                format!("unknown environment `{other}` (expected one of {})", ENVIRONMENTS.join(", ")),
            )),
        }
    }

    pub fn env(&self) -> &dyn EnvModel {
        match self {
            World::Puddle(e) => e,
            World::Rooms(e) => e,
            World::Corridor(e) => e,
            World::MountainCar(e) => e,
            World::Pinball(e) => e,
            World::Grid(g) => &g.env,
        }
    }

    pub fn is_tabular(&self) -> bool {
        matches!(self, World::Grid(_))
    }

    pub fn bounds(&self) -> &Bounds {
        self.env().bounds()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[environment]\nname = \"puddle-world\"\n[partition]\ngrid = [2, 2]\n[algorithm]\nkind = \"ihomp\"\niterations = 2\n";

    #[test]
    fn minimal_config_validates() {
        let cfg = ExperimentConfig::parse(MINIMAL, &[], ".").unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.output.seeds, vec![0]);
        assert_eq!(cfg.learning.ac_episodes, 2000);
    }

    #[test]
    fn errors_name_the_key() {
        let err = |text: &str, overrides: &[&str]| {
            let o: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
            match ExperimentConfig::parse(text, &o, ".").and_then(|c| c.validate()) {
                Err(Error::Config { key, .. }) => key,
                other => panic!("expected config error, got {other:?}"),
            }
        };
        assert_eq!(err(MINIMAL, &["algorithm.gamma=1.0"]), "algorithm.gamma");
        assert_eq!(err(MINIMAL, &["partition.grid=[4, 3]", "environment.name=\"nowhere\""]), "environment.name");
        assert_eq!(err(MINIMAL, &["learning.solver=\"magic\""]), "learning.solver");
        assert_eq!(err(MINIMAL, &["partition.grid=[4, 3, 1]"]), "partition.grid");
        assert_eq!(err(MINIMAL, &["environment.walls=[]"]), "environment.walls");
        assert_eq!(err(&MINIMAL.replace("iterations = 2", "iterations = \"x\""), &[]), "algorithm.iterations");
    }

    #[test]
    fn epsilon_sets_iterations() {
        let text = MINIMAL.replace("iterations = 2", "epsilon = 0.01\ngamma = 0.9");
        let cfg = ExperimentConfig::parse(&text, &[], ".").unwrap();
        assert_eq!(cfg.iterations().unwrap(), 66);
    }

    #[test]
    fn override_values_keep_their_type() {
        let mut t = toml::Table::new();
        apply_override(&mut t, "output.seeds=[1, 2]").unwrap();
        apply_override(&mut t, "output.dir=some/where").unwrap();
        assert_eq!(t["output"]["seeds"].as_array().unwrap().len(), 2);
        assert_eq!(t["output"]["dir"].as_str(), Some("some/where"));
        assert!(apply_override(&mut t, "nodot=1").is_err());
    }
}
