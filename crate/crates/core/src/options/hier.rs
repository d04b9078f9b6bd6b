use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::learning::features::{parse_grid, write_grid};
use crate::learning::value::parse_reals;
use crate::learning::QEstimate;
use crate::partition::{parse_partition, Partition};
use crate::state::EnvState;

use super::policy::PolicyParams;

/// An option: intra-option policy plus the partition class it was learned
/// for.
#[derive(Clone, Debug, PartialEq)]
pub struct OptionDef {
    pub policy: PolicyParams,
    pub home_class: usize,
}

/// How options end and how the next one is chosen.
#[derive(Clone, Debug, PartialEq)]
pub enum Termination {
    /// Option `j` runs while the state stays in class `j`; the next option
    /// is the class of the exit state.
    Partition,
    /// Value-based interruption: option `j` stops at `s` when
    /// `Q(s, j) < max_i Q(s, i) - rho`, and the next option is the greedy
    /// one (ties to the partition class).
    Interrupt { q: Arc<QEstimate>, rho: f64 },
}

/// `true` when option `j` should be interrupted at `s`.
pub fn roi_beta(q: &QEstimate, rho: f64, s: &[f64], j: usize) -> bool {
    let values = q.values(s);
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    values[j] < best - rho
}

/// The stitched policy: partition-backed option selection plus one option
/// per class.
#[derive(Clone, Debug, PartialEq)]
pub struct HierPolicy {
    partition: Arc<Partition>,
    options: Vec<OptionDef>,
    termination: Termination,
}

impl HierPolicy {
    pub fn new(partition: Arc<Partition>, policies: Vec<PolicyParams>) -> Result<Self> {
        if policies.len() != partition.class_count() {
            return Err(Error::InvalidSpec(format!(
                "{} options for a partition with {} classes",
                policies.len(),
                partition.class_count()
            )));
        }
        let n_actions = policies[0].n_actions();
        if policies.iter().any(|p| p.n_actions() != n_actions) {
            return Err(Error::InvalidSpec("options disagree on the action count".into()));
        }
        let options = policies
            .into_iter()
            .enumerate()
            .map(|(home_class, policy)| OptionDef { policy, home_class })
            .collect();
        Ok(HierPolicy {
            partition,
            options,
            termination: Termination::Partition,
        })
    }

    /// Every class starts from a copy of `template`.
    pub fn uniform(partition: Arc<Partition>, template: &PolicyParams) -> Self {
        let m = partition.class_count();
        HierPolicy::new(partition, vec![template.clone(); m]).expect("one option per class")
    }

    pub fn partition(&self) -> &Arc<Partition> {
        &self.partition
    }

    pub fn options(&self) -> &[OptionDef] {
        &self.options
    }

    pub fn option(&self, j: usize) -> &OptionDef {
        &self.options[j]
    }

    pub fn option_count(&self) -> usize {
        self.options.len()
    }

    pub fn n_actions(&self) -> usize {
        self.options[0].policy.n_actions()
    }

    pub fn termination(&self) -> &Termination {
        &self.termination
    }

    /// Copy with option `i` replaced; all other options are shared unchanged.
    pub fn with_option(&self, i: usize, policy: PolicyParams) -> Result<Self> {
        if i >= self.options.len() {
            return Err(Error::OutOfRange {
                index: i,
                len: self.options.len(),
            });
        }
        if policy.n_actions() != self.n_actions() {
            return Err(Error::InvalidPolicy("replacement option has a different action count".into()));
        }
        let mut next = self.clone();
        next.options[i].policy = policy;
        Ok(next)
    }

    pub fn with_termination(&self, termination: Termination) -> Result<Self> {
        if let Termination::Interrupt { q, rho } = &termination {
            if q.option_count() != self.options.len() {
                return Err(Error::InvalidSpec("Q estimate has the wrong option count".into()));
            }
            if !(*rho >= 0.0) {
                return Err(Error::Domain(format!("rho = {rho} must be non-negative")));
            }
        }
        let mut next = self.clone();
        next.termination = termination;
        Ok(next)
    }

    /// Option to start at `s`.
    pub fn select(&self, s: &[f64]) -> usize {
        let class = self.partition.class_index(s);
        match &self.termination {
            Termination::Partition => class,
            Termination::Interrupt { q, .. } => q.greedy(s, class),
        }
    }

    /// Whether option `j`, currently running, stops at `s`.
    pub fn terminates(&self, j: usize, s: &[f64]) -> bool {
        match &self.termination {
            Termination::Partition => self.partition.class_index(s) != self.options[j].home_class,
            Termination::Interrupt { q, rho } => roi_beta(q, *rho, s, j),
        }
    }

    pub fn action_distribution(&self, j: usize, s: &EnvState) -> Vec<f64> {
        self.options[j].policy.action_distribution(s)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "hier-policy {} {}", self.options.len(), self.n_actions());
        out.push_str(&self.partition.to_text());
        for (j, o) in self.options.iter().enumerate() {
            let p = &o.policy;
            match p {
                PolicyParams::StateIndependent { .. } => {
                    let _ = writeln!(out, "option {j} state-independent");
                }
                PolicyParams::Linear { state_dim, .. } => {
                    let _ = writeln!(out, "option {j} linear {state_dim}");
                }
                PolicyParams::Table { grid, .. } => {
                    let _ = writeln!(out, "option {j} table");
                    write_grid(grid, &mut out);
                }
            }
            let theta: Vec<String> = p.theta().iter().map(|x| format!("{x:.16e}")).collect();
            let _ = writeln!(out, "theta {}", theta.join(" "));
        }
        match &self.termination {
            Termination::Partition => {
                let _ = writeln!(out, "termination partition");
            }
            Termination::Interrupt { q, rho } => {
                let _ = writeln!(out, "termination interrupt {rho:.16e}");
                q.write_text(&mut out);
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (hl, head) = lines.next().ok_or_else(|| Error::parse(0, "empty policy file"))?;
        let hf: Vec<&str> = head.split_whitespace().collect();
        let (m, n_actions): (usize, usize) = match hf.as_slice() {
            ["hier-policy", m, n] => (
                m.parse().map_err(|_| Error::parse(hl, "bad option count"))?,
                n.parse().map_err(|_| Error::parse(hl, "bad action count"))?,
            ),
            _ => return Err(Error::parse(hl, "expected `hier-policy <m> <actions>`")),
        };
        let partition = Arc::new(parse_partition(&mut lines)?);
        let mut policies = Vec::with_capacity(m);
        for j in 0..m {
            let (ol, oline) = lines.next().ok_or_else(|| Error::parse(hl, format!("missing option {j}")))?;
            let of: Vec<&str> = oline.split_whitespace().collect();
            if of.len() < 3 || of[0] != "option" || of[1] != j.to_string() {
                return Err(Error::parse(ol, format!("expected `option {j} <family>`")));
            }
            let template = match &of[2..] {
                ["state-independent"] => PolicyParams::uniform(n_actions),
                ["linear", d] => {
                    PolicyParams::uniform_linear(n_actions, d.parse().map_err(|_| Error::parse(ol, "bad state dimension"))?)
                }
                ["table"] => {
                    let grid = parse_grid(&mut lines, ol)?;
                    let cells = grid.n_cells();
                    PolicyParams::Table {
                        grid,
                        n_actions,
                        probs: vec![1.0 / n_actions as f64; cells * n_actions],
                    }
                }
                _ => return Err(Error::parse(ol, format!("unknown option family `{}`", of[2..].join(" ")))),
            };
            let (tl, tline) = lines.next().ok_or_else(|| Error::parse(ol, "missing `theta`"))?;
            let tf: Vec<&str> = tline.split_whitespace().collect();
            if tf.first() != Some(&"theta") {
                return Err(Error::parse(tl, "expected `theta`"));
            }
            let theta = parse_reals(&tf[1..], tl)?;
            policies.push(template.with_theta(theta).map_err(|e| Error::parse(tl, e.to_string()))?);
        }
        let hier = HierPolicy::new(partition, policies).map_err(|e| Error::parse(hl, e.to_string()))?;
        let (tl, tline) = lines.next().ok_or_else(|| Error::parse(hl, "missing `termination`"))?;
        let tf: Vec<&str> = tline.split_whitespace().collect();
        let termination = match tf.as_slice() {
            ["termination", "partition"] => Termination::Partition,
            ["termination", "interrupt", rho] => {
                let rho: f64 = rho.parse().map_err(|_| Error::parse(tl, "bad rho"))?;
                let q = QEstimate::parse_text(m, &mut lines, tl)?;
                Termination::Interrupt { q: Arc::new(q), rho }
            }
            _ => return Err(Error::parse(tl, "expected `termination partition|interrupt <rho>`")),
        };
        if let Some((l, _)) = lines.next() {
            return Err(Error::parse(l, "trailing content after policy"));
        }
        hier.with_termination(termination).map_err(|e| Error::parse(tl, e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&std::fs::read_to_string(path)?).map_err(|e| e.with_path(path))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::write_atomic(path.as_ref(), self.to_text().as_bytes())
    }
}
