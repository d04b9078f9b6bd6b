//! The iterative option-learning driver, value-based option interruption,
//! and diagnostics tied to the convergence bound.

mod continuous;
mod diagnostics;
mod tabular;

use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::learning::{QEstimate, SolveOutcome, ValueEstimate};
use crate::options::{HierPolicy, Termination};
use crate::rng::{self, tag};

pub use crate::options::roi_beta;
pub use continuous::{ihomp, ihomp_roi, summarize_returns, ContinuousBackend, ContinuousSettings, Evaluator, Solver};
pub use diagnostics::{misspecification_error, required_iterations, theorem_bound, MisspecTarget, Misspecification, ETA_GRID};
pub use tabular::{exact_hier_values, exact_option_q, TabularBackend, TabularProblem};

/// Order in which classes are visited within a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ClassOrder {
    #[default]
    Ascending,
    Reversed,
    /// Fresh random permutation every sweep.
    Random,
}

/// Where the policy evaluation happens inside the double loop.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum EvaluationPlacement {
    /// Before every option update.
    #[default]
    PerUpdate,
    /// Once per sweep; cheaper, but later options in a sweep see a stale
    /// value.
    PerSweep,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IhompConfig {
    pub iterations: usize,
    pub class_order: ClassOrder,
    pub evaluation: EvaluationPlacement,
    pub seed: u64,
}

impl Default for IhompConfig {
    fn default() -> Self {
        IhompConfig {
            iterations: 5,
            class_order: ClassOrder::Ascending,
            evaluation: EvaluationPlacement::PerUpdate,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RhoSchedule {
    Constant,
    /// Decays linearly from `rho` on the first sweep to `floor` on the last.
    Linear { floor: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoiConfig {
    pub rho: f64,
    pub schedule: RhoSchedule,
}

impl RoiConfig {
    pub fn constant(rho: f64) -> Self {
        RoiConfig {
            rho,
            schedule: RhoSchedule::Constant,
        }
    }

    /// Default level: 5% of the per-step reward span.
    pub fn default_for_span(span: f64) -> Self {
        Self::constant(0.05 * span)
    }

    /// Level used after sweep `k` (1-based) of `iterations`.
    pub fn rho_at(&self, k: usize, iterations: usize) -> f64 {
        match self.schedule {
            RhoSchedule::Constant => self.rho,
            RhoSchedule::Linear { floor } => {
                let frac = if iterations > 1 {
                    (k - 1) as f64 / (iterations - 1) as f64
                } else {
                    1.0
                };
                (self.rho - (self.rho - floor) * frac).max(floor)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let floor = match self.schedule {
            RhoSchedule::Constant => 0.0,
            RhoSchedule::Linear { floor } => floor,
        };
        if !(self.rho >= 0.0) || !(floor >= 0.0) {
            return Err(Error::Domain("rho must be non-negative".into()));
        }
        Ok(())
    }
}

/// Quality of the stitched policy after an iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub iteration: usize,
    pub mean_return: f64,
    pub std: f64,
    pub episodes: usize,
    /// Fraction of evaluation episodes that reached a terminal state.
    pub success_rate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UpdateRecord {
    pub iteration: usize,
    pub class: usize,
    pub score: f64,
    /// Solver warning, or the error that made the driver keep the old option.
    pub note: Option<String>,
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct RunRecord {
    /// Iteration 0 is the initial policy, then one point per sweep.
    pub curve: Vec<CurvePoint>,
    /// One record per option update, `iterations * m` in total.
    pub updates: Vec<UpdateRecord>,
    pub final_value: Option<Arc<ValueEstimate>>,
    pub final_q: Option<Arc<QEstimate>>,
}

/// What the driver needs from an environment-specific implementation.
pub trait Backend {
    /// Value of the current stitched policy (the evaluation step).
    fn evaluate(&mut self, hier: &HierPolicy, call: usize) -> Result<Arc<ValueEstimate>>;

    /// Solve the Local-MDP of `class` built from the frozen value `v`.
    fn solve(&mut self, hier: &HierPolicy, class: usize, v: Arc<ValueEstimate>, call: usize) -> Result<SolveOutcome>;

    fn assess(&mut self, hier: &HierPolicy, iteration: usize) -> Result<CurvePoint>;

    /// Action values over option indices, used for interruption.
    fn estimate_q(&mut self, hier: &HierPolicy, sweep: usize) -> Result<QEstimate>;
}

fn sweep_order(m: usize, order: ClassOrder, seed: u64, k: usize) -> Vec<usize> {
    let mut classes: Vec<usize> = (0..m).collect();
    match order {
        ClassOrder::Ascending => {}
        ClassOrder::Reversed => classes.reverse(),
        ClassOrder::Random => classes.shuffle(&mut rng::stream(seed, tag::CLASS_ORDER, k as u64)),
    }
    classes
}

/// Run the option-learning loop from `init`. With `roi`, the action values
/// are re-estimated after every sweep and options terminate by value-based
/// interruption from then on.
pub fn run_ihomp<B: Backend + ?Sized>(
    backend: &mut B,
    init: HierPolicy,
    cfg: &IhompConfig,
    roi: Option<&RoiConfig>,
) -> Result<(HierPolicy, RunRecord)> {
    if cfg.iterations == 0 {
        return Err(Error::Domain("IHOMP needs at least one iteration".into()));
    }
    if let Some(r) = roi {
        r.validate()?;
    }
    let m = init.option_count();
    let mut hier = init;
    let mut record = RunRecord {
        curve: vec![backend.assess(&hier, 0)?],
        updates: Vec::with_capacity(cfg.iterations * m),
        final_value: None,
        final_q: None,
    };
    let mut calls = 0;
    let mut value = None;
    for k in 1..=cfg.iterations {
        if cfg.evaluation == EvaluationPlacement::PerSweep {
            value = Some(backend.evaluate(&hier, calls)?);
        }
        for i in sweep_order(m, cfg.class_order, cfg.seed, k) {
            let started = Instant::now();
            if cfg.evaluation == EvaluationPlacement::PerUpdate || value.is_none() {
                value = Some(backend.evaluate(&hier, calls)?);
            }
            let v = value.clone().expect("evaluated above");
            let (score, note) = match backend.solve(&hier, i, v, calls) {
                Ok(out) => {
                    if let Some(w) = &out.warning {
                        log::warn!("iteration {k}, class {i}: {w}");
                    }
                    hier = hier.with_option(i, out.policy)?;
                    (out.score, out.warning)
                }
                Err(e) => {
                    log::warn!("iteration {k}, class {i}: solver failed ({e}); keeping the previous option");
                    (f64::NAN, Some(e.to_string()))
                }
            };
            calls += 1;
            record.updates.push(UpdateRecord {
                iteration: k,
                class: i,
                score,
                note,
                seconds: started.elapsed().as_secs_f64(),
            });
        }
        if let Some(r) = roi {
            let q = Arc::new(backend.estimate_q(&hier, k)?);
            hier = hier.with_termination(Termination::Interrupt {
                q: q.clone(),
                rho: r.rho_at(k, cfg.iterations),
            })?;
            record.final_q = Some(q);
        }
        record.curve.push(backend.assess(&hier, k)?);
    }
    record.final_value = Some(backend.evaluate(&hier, calls)?);
    Ok((hier, record))
}
