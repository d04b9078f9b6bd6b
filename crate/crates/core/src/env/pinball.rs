//! Ball navigation among polygonal obstacles.

use std::path::Path;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::mdp::{EnvModel, Transition};
use crate::rng::Rng;
use crate::state::{Bounds, EnvState};

/// Simple polygon given by its vertices in order; may be concave.
#[derive(Clone, Debug, PartialEq)]
pub struct Polygon {
    pub vertices: Vec<[f64; 2]>,
}

impl Polygon {
    pub fn edges(&self) -> impl Iterator<Item = ([f64; 2], [f64; 2])> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn area(&self) -> f64 {
        0.5 * self
            .edges()
            .map(|(a, b)| a[0] * b[1] - b[0] * a[1])
            .sum::<f64>()
            .abs()
    }

    /// Even-odd ray casting.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
                if p[0] < x {
                    inside = !inside;
                }
            }
        }
        inside
    }
}

fn closest_on_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
    };
    [a[0] + t * d[0], a[1] + t * d[1]]
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Disc {
    pub center: [f64; 2],
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PinballSpec {
    pub obstacles: Vec<Polygon>,
    pub ball_radius: f64,
    /// Velocity multiplier applied after every step, in (0, 1].
    pub drag: f64,
    /// Velocity change per thrust action.
    pub impulse: f64,
    /// Fraction of the normal velocity kept on a bounce.
    pub restitution: f64,
    pub max_speed: f64,
    /// Integration step; positions advance by `velocity * dt`.
    pub dt: f64,
    pub goal: Disc,
    pub starts: Vec<[f64; 2]>,
    pub thrust_cost: f64,
    pub idle_cost: f64,
}

impl Default for PinballSpec {
    fn default() -> Self {
        PinballSpec {
            obstacles: Vec::new(),
            ball_radius: 0.02,
            drag: 0.995,
            impulse: 0.2,
            restitution: 1.0,
            max_speed: 1.0,
            dt: 0.05,
            goal: Disc {
                center: [0.9, 0.9],
                radius: 0.05,
            },
            starts: vec![[0.1, 0.1]],
            thrust_cost: 1.0,
            idle_cost: 1.0,
        }
    }
}

const MAX_SUBSTEPS: usize = 4;
pub const ACTION_IDLE: usize = 4;
const THRUST: [[f64; 2]; 5] = [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0], [0.0, 0.0]];

impl PinballSpec {
    /// Parse an obstacle file: `poly x1 y1 x2 y2 ...`, `ball <radius>`,
    /// `goal <cx> <cy> <r>` and `start <x> <y>` lines, `#` comments. Other
    /// physical constants keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = PinballSpec {
            starts: Vec::new(),
            ..PinballSpec::default()
        };
        let mut saw_goal = false;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let lineno = i + 1;
            let mut fields = line.split_whitespace();
            let key = fields.next().unwrap_or_default();
            let nums: Vec<f64> = fields
                .map(|f| f.parse::<f64>().map_err(|_| Error::parse(lineno, format!("bad number `{f}`"))))
                .collect::<Result<_>>()?;
            match (key, nums.len()) {
                ("poly", n) if n >= 6 && n % 2 == 0 => spec.obstacles.push(Polygon {
                    vertices: nums.chunks(2).map(|c| [c[0], c[1]]).collect(),
                }),
                ("poly", _) => return Err(Error::parse(lineno, "poly needs at least three x y pairs")),
                ("ball", 1) => spec.ball_radius = nums[0],
                ("goal", 3) => {
                    spec.goal = Disc {
                        center: [nums[0], nums[1]],
                        radius: nums[2],
                    };
                    saw_goal = true;
                }
                ("start", 2) => spec.starts.push([nums[0], nums[1]]),
                _ => return Err(Error::parse(lineno, format!("unrecognised line `{line}`"))),
            }
        }
        if !saw_goal {
            return Err(Error::parse(0, "obstacle file has no `goal` line"));
        }
        if spec.starts.is_empty() {
            return Err(Error::parse(0, "obstacle file has no `start` line"));
        }
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&std::fs::read_to_string(path)?).map_err(|e| e.with_path(path))
    }
}

#[derive(Clone, Debug)]
pub struct Pinball {
    spec: PinballSpec,
    bounds: Bounds,
}

pub fn make_pinball(spec: PinballSpec) -> Result<Pinball> {
    if spec.obstacles.iter().any(|p| p.vertices.len() < 3 || p.area() <= 0.0) {
        return Err(Error::InvalidSpec("pinball obstacles need three or more non-collinear vertices".into()));
    }
    if !(spec.ball_radius > 0.0 && spec.ball_radius < 0.5) {
        return Err(Error::InvalidSpec(format!("ball radius {} is out of range", spec.ball_radius)));
    }
    if !(spec.drag > 0.0 && spec.drag <= 1.0) {
        return Err(Error::InvalidSpec(format!("drag {} must lie in (0, 1]", spec.drag)));
    }
    if !(0.0..=1.0).contains(&spec.restitution) || !(spec.impulse >= 0.0) || !(spec.max_speed > 0.0) || !(spec.dt > 0.0) {
        return Err(Error::InvalidSpec("pinball physical constants are out of range".into()));
    }
    if spec.starts.is_empty() {
        return Err(Error::InvalidSpec("pinball needs at least one start".into()));
    }
    let v = spec.max_speed;
    let env = Pinball {
        bounds: Bounds::new(vec![0.0, 0.0, -v, -v], vec![1.0, 1.0, v, v])?,
        spec,
    };
    for start in &env.spec.starts {
        if !env.position_free(*start) {
            return Err(Error::InvalidSpec(format!(
                "ball start {start:?} overlaps an obstacle or the boundary"
            )));
        }
    }
    Ok(env)
}

impl Pinball {
    pub fn spec(&self) -> &PinballSpec {
        &self.spec
    }

    pub fn position_free(&self, p: [f64; 2]) -> bool {
        self.contact_normal(p).is_none() && !self.spec.obstacles.iter().any(|o| o.contains(p))
    }

    /// Outward normal of the closest surface the ball overlaps at `p`.
    fn contact_normal(&self, p: [f64; 2]) -> Option<[f64; 2]> {
        let r = self.spec.ball_radius;
        let mut best: Option<(f64, [f64; 2])> = None;
        let mut consider = |depth: f64, n: [f64; 2]| {
            if depth > 0.0 && best.is_none_or(|(d, _)| depth > d) {
                best = Some((depth, n));
            }
        };
        consider(r - p[0], [1.0, 0.0]);
        consider(p[0] - (1.0 - r), [-1.0, 0.0]);
        consider(r - p[1], [0.0, 1.0]);
        consider(p[1] - (1.0 - r), [0.0, -1.0]);
        for poly in &self.spec.obstacles {
            for (a, b) in poly.edges() {
                let q = closest_on_segment(p, a, b);
                let d = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
                if d < r {
                    let n = if d > 0.0 {
                        [(p[0] - q[0]) / d, (p[1] - q[1]) / d]
                    } else {
                        let e = [b[0] - a[0], b[1] - a[1]];
                        let len = (e[0] * e[0] + e[1] * e[1]).sqrt();
                        [e[1] / len, -e[0] / len]
                    };
                    consider(r - d, n);
                }
            }
        }
        best.map(|(_, n)| n)
    }

    pub fn in_goal(&self, p: [f64; 2]) -> bool {
        let g = &self.spec.goal;
        (p[0] - g.center[0]).powi(2) + (p[1] - g.center[1]).powi(2) <= g.radius * g.radius
    }
}

impl EnvModel for Pinball {
    fn name(&self) -> &str {
        "pinball"
    }

    /// 0: +x, 1: -x, 2: +y, 3: -y, 4: no thrust.
    fn action_count(&self) -> usize {
        5
    }

    fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    fn reward_range(&self) -> (f64, f64) {
        (-self.spec.thrust_cost.max(self.spec.idle_cost), 0.0)
    }

    fn is_terminal(&self, s: &EnvState) -> bool {
        self.in_goal([s[0], s[1]])
    }

    fn is_admissible(&self, s: &EnvState) -> bool {
        self.bounds.contains(s) && self.position_free([s[0], s[1]])
    }

    fn step(&self, s: &EnvState, action: usize, _rng: &mut Rng) -> Transition {
        let sp = &self.spec;
        let mut p = [s[0], s[1]];
        let mut v = [
            (s[2] + sp.impulse * THRUST[action][0]).clamp(-sp.max_speed, sp.max_speed),
            (s[3] + sp.impulse * THRUST[action][1]).clamp(-sp.max_speed, sp.max_speed),
        ];
        let travel = (v[0] * v[0] + v[1] * v[1]).sqrt() * sp.dt;
        let substeps = ((travel / sp.ball_radius).ceil() as usize).clamp(1, MAX_SUBSTEPS);
        let h = sp.dt / substeps as f64;
        for _ in 0..substeps {
            let trial = [p[0] + v[0] * h, p[1] + v[1] * h];
            match self.contact_normal(trial) {
                Some(n) => {
                    let vn = v[0] * n[0] + v[1] * n[1];
                    if vn < 0.0 {
                        let k = (1.0 + sp.restitution) * vn;
                        v = [v[0] - k * n[0], v[1] - k * n[1]];
                    }
                }
                None => p = trial,
            }
            if self.in_goal(p) {
                break;
            }
        }
        let next = EnvState::new(vec![p[0], p[1], v[0] * sp.drag, v[1] * sp.drag]);
        let reward = if action == ACTION_IDLE {
            -sp.idle_cost
        } else {
            -sp.thrust_cost
        };
        let terminal = self.in_goal(p);
        Transition {
            next,
            reward,
            terminal,
        }
    }

    fn initial_state(&self, rng: &mut Rng) -> EnvState {
        let i = if self.spec.starts.len() == 1 {
            0
        } else {
            rng.random_range(0..self.spec.starts.len())
        };
        let p = self.spec.starts[i];
        EnvState::new(vec![p[0], p[1], 0.0, 0.0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    fn square(x0: f64, y0: f64, x1: f64, y1: f64) -> Polygon {
        Polygon {
            vertices: vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]],
        }
    }

    #[test]
    fn stationary_ball_without_thrust_stays_put() {
        let env = make_pinball(PinballSpec::default()).unwrap();
        let mut r = rng::stream(0, 0, 0);
        let mut s = EnvState::new(vec![0.4, 0.4, 0.0, 0.0]);
        for _ in 0..50 {
            s = env.step(&s, ACTION_IDLE, &mut r).next;
        }
        assert_eq!(s.0, vec![0.4, 0.4, 0.0, 0.0]);
    }

    #[test]
    fn head_on_collision_flips_the_normal_component() {
        let env = make_pinball(PinballSpec {
            obstacles: vec![square(0.5, 0.3, 0.7, 0.7)],
            restitution: 0.8,
            drag: 1.0,
            ..PinballSpec::default()
        })
        .unwrap();
        let mut r = rng::stream(0, 0, 0);
        // Ball just left of the obstacle's left face moving right.
        let s = EnvState::new(vec![0.5 - 0.021, 0.5, 0.5, 0.0]);
        let t = env.step(&s, ACTION_IDLE, &mut r);
        assert!((t.next[2] - (-0.5 * 0.8)).abs() < 1e-12, "vx = {}", t.next[2]);
        assert_eq!(t.next[3], 0.0);
    }

    #[test]
    fn free_flight_decays_geometrically() {
        let env = make_pinball(PinballSpec::default()).unwrap();
        let mut r = rng::stream(0, 0, 0);
        let mut s = EnvState::new(vec![0.3, 0.3, 0.02, 0.01]);
        let speed0 = (0.02f64.powi(2) + 0.01f64.powi(2)).sqrt();
        for _ in 0..100 {
            s = env.step(&s, ACTION_IDLE, &mut r).next;
        }
        let speed = (s[2] * s[2] + s[3] * s[3]).sqrt();
        assert!((speed - speed0 * 0.995f64.powi(100)).abs() < 1e-12);
    }

    #[test]
    fn start_inside_obstacle_is_rejected() {
        let spec = PinballSpec {
            obstacles: vec![square(0.0, 0.0, 0.3, 0.3)],
            ..PinballSpec::default()
        };
        assert!(matches!(make_pinball(spec), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn obstacle_file_parses() {
        let text = "# tiny layout\npoly 0.4 0.4 0.6 0.4 0.5 0.6\nball 0.015\ngoal 0.9 0.1 0.04\nstart 0.1 0.9\nstart 0.1 0.5\n";
        let spec = PinballSpec::parse(text).unwrap();
        assert_eq!(spec.obstacles.len(), 1);
        assert_eq!(spec.ball_radius, 0.015);
        assert_eq!(spec.goal.center, [0.9, 0.1]);
        assert_eq!(spec.starts.len(), 2);
        assert!(PinballSpec::parse("poly 0 0 1 1\n").is_err());
        assert!(PinballSpec::parse("ball 0.02\nstart 0.1 0.1\n").is_err());
    }

    #[test]
    fn concave_polygon_containment() {
        let l_shape = Polygon {
            vertices: vec![[0.0, 0.0], [0.6, 0.0], [0.6, 0.2], [0.2, 0.2], [0.2, 0.6], [0.0, 0.6]],
        };
        assert!(l_shape.contains([0.1, 0.5]));
        assert!(l_shape.contains([0.5, 0.1]));
        assert!(!l_shape.contains([0.4, 0.4]));
    }

    proptest! {
        #[test]
        fn bounces_conserve_speed_up_to_restitution_and_drag(
            x in 0.1f64..0.9, y in 0.1f64..0.9, vx in -1.0f64..1.0, vy in -1.0f64..1.0,
            e in 0.5f64..1.0,
        ) {
            let env = make_pinball(PinballSpec {
                obstacles: vec![square(0.45, 0.45, 0.55, 0.55)],
                restitution: e,
                goal: Disc { center: [0.95, 0.95], radius: 0.01 },
                ..PinballSpec::default()
            }).unwrap();
            let s = EnvState::new(vec![x, y, vx, vy]);
            prop_assume!(env.is_admissible(&s));
            let t = env.step(&s, ACTION_IDLE, &mut rng::stream(0, 0, 0));
            let before = (vx * vx + vy * vy).sqrt();
            let after = (t.next[2].powi(2) + t.next[3].powi(2)).sqrt();
            let drag = env.spec().drag;
            prop_assert!(after <= before * drag + 1e-12);
            prop_assert!(after >= before * drag * e.powi(MAX_SUBSTEPS as i32) - 1e-12);
            prop_assert!(env.is_admissible(&t.next));
        }
    }
}
