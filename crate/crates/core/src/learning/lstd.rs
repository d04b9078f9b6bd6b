use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::state::EnvState;

use super::features::FeatureMap;
use super::value::{greedy_index, QEstimate, ValueEstimate};

pub const DEFAULT_RIDGE: f64 = 1e-6;
pub const DEFAULT_LSTDQ_SWEEPS: usize = 20;
pub const DEFAULT_LSTDQ_TOL: f64 = 1e-8;

/// One option-level transition.
#[derive(Clone, Debug, PartialEq)]
pub struct SmdpSample {
    pub state: EnvState,
    pub option: usize,
    /// Discounted reward accumulated over the segment.
    pub reward: f64,
    pub duration: usize,
    pub next: EnvState,
    pub terminal: bool,
}

fn solve_ridge(mut a: DMatrix<f64>, b: DVector<f64>, ridge: f64) -> Option<Vec<f64>> {
    for i in 0..a.nrows() {
        a[(i, i)] += ridge;
    }
    let w = a.lu().solve(&b)?;
    w.iter().all(|x| x.is_finite()).then(|| w.iter().copied().collect())
}

/// Solve with the given ridge; an unregularized solve that turns out
/// singular is retried with [`DEFAULT_RIDGE`].
fn solve_with_fallback(a: DMatrix<f64>, b: DVector<f64>, ridge: f64) -> Result<Vec<f64>> {
    if let Some(w) = solve_ridge(a.clone(), b.clone(), ridge) {
        return Ok(w);
    }
    if ridge == 0.0 {
        log::warn!("singular LSTD system, retrying with ridge {DEFAULT_RIDGE}");
        if let Some(w) = solve_ridge(a, b, DEFAULT_RIDGE) {
            return Ok(w);
        }
    }
    Err(Error::Solver("LSTD system is singular".into()))
}

/// SMDP-LSTD: `A = sum phi(s) (phi(s) - gamma^tau phi(s'))^T`,
/// `b = sum phi(s) r`, `w = (A + ridge I)^-1 b`.
pub fn smdp_lstd(samples: &[SmdpSample], features: &FeatureMap, gamma: f64, ridge: f64) -> Result<ValueEstimate> {
    if samples.is_empty() {
        return Err(Error::Domain("LSTD needs at least one sample".into()));
    }
    let n = features.len();
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DVector::<f64>::zeros(n);
    for smp in samples {
        let phi = features.sparse(&smp.state);
        let discount = gamma.powi(smp.duration as i32);
        let next = if smp.terminal { Vec::new() } else { features.sparse(&smp.next) };
        for &(i, x) in &phi {
            for &(k, y) in &phi {
                a[(i, k)] += x * y;
            }
            for &(k, y) in &next {
                a[(i, k)] -= discount * x * y;
            }
            b[i] += x * smp.reward;
        }
    }
    let weights = solve_with_fallback(a, b, ridge)?;
    Ok(ValueEstimate::Linear {
        features: features.clone(),
        weights,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LstdqOptions {
    pub ridge: f64,
    pub max_sweeps: usize,
    pub tol: f64,
}

impl Default for LstdqOptions {
    fn default() -> Self {
        LstdqOptions {
            ridge: DEFAULT_RIDGE,
            max_sweeps: DEFAULT_LSTDQ_SWEEPS,
            tol: DEFAULT_LSTDQ_TOL,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstdqResult {
    pub q: QEstimate,
    pub sweeps: usize,
    pub converged: bool,
}

/// SMDP-LSTDQ over option indices with successor value
/// `max_j' Q(s', j')`. Because of the max this is a fixed-point iteration:
/// each sweep fixes the greedy successor index (ties to `prior(s')`) and
/// solves the resulting linear system, until the weights move by less than
/// `tol` or `max_sweeps` is reached.
pub fn smdp_lstdq<F>(
    samples: &[SmdpSample],
    features: &FeatureMap,
    gamma: f64,
    m: usize,
    opts: LstdqOptions,
    prior: F,
) -> Result<LstdqResult>
where
    F: Fn(&[f64]) -> usize,
{
    if samples.is_empty() || m == 0 {
        return Err(Error::Domain("LSTDQ needs samples and at least one option".into()));
    }
    if let Some(s) = samples.iter().find(|s| s.option >= m) {
        return Err(Error::OutOfRange { index: s.option, len: m });
    }
    let n = features.len();
    let dim = n * m;
    let prepared: Vec<_> = samples
        .iter()
        .map(|smp| {
            let phi = features.sparse(&smp.state);
            let next = if smp.terminal { Vec::new() } else { features.sparse(&smp.next) };
            let prior_next = if smp.terminal { 0 } else { prior(&smp.next) };
            (phi, next, prior_next, gamma.powi(smp.duration as i32))
        })
        .collect();
    let mut w = vec![vec![0.0; n]; m];
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < opts.max_sweeps.max(1) {
        sweeps += 1;
        let mut a = DMatrix::<f64>::zeros(dim, dim);
        let mut b = DVector::<f64>::zeros(dim);
        for (smp, (phi, next, prior_next, discount)) in samples.iter().zip(&prepared) {
            let row0 = smp.option * n;
            let succ = if next.is_empty() {
                None
            } else {
                let q: Vec<f64> = w.iter().map(|wj| next.iter().map(|&(k, y)| wj[k] * y).sum()).collect();
                Some(greedy_index(&q, *prior_next) * n)
            };
            for &(i, x) in phi {
                for &(k, y) in phi {
                    a[(row0 + i, row0 + k)] += x * y;
                }
                if let Some(col0) = succ {
                    for &(k, y) in next {
                        a[(row0 + i, col0 + k)] -= discount * x * y;
                    }
                }
                b[row0 + i] += x * smp.reward;
            }
        }
        let flat = solve_with_fallback(a, b, opts.ridge)?;
        let next_w: Vec<Vec<f64>> = flat.chunks(n).map(<[f64]>::to_vec).collect();
        let change = next_w
            .iter()
            .flatten()
            .zip(w.iter().flatten())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        w = next_w;
        if change < opts.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("LSTDQ did not converge within {sweeps} sweeps");
    }
    Ok(LstdqResult {
        q: QEstimate::new(features.clone(), w)?,
        sweeps,
        converged,
    })
}
