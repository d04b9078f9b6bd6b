//! Python bindings: tabular MDPs, partitions, hierarchical policies, the
//! tabular IHOMP driver and the config-driven experiment runner.

use std::path::PathBuf;
use std::sync::Arc;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use ihomp::experiment;
use ihomp::ihomp::{self as core, ClassOrder, IhompConfig, MisspecTarget, TabularBackend, TabularProblem};
use ihomp::options::PolicyParams;

create_exception!(ihomp_py, IhompError, PyException);

fn err(e: ihomp::Error) -> PyErr {
    IhompError::new_err(e.to_string())
}

/// Finite tabular MDP.
#[pyclass(name = "TabularMdp", frozen)]
struct PyTabularMdp {
    inner: ihomp::TabularMdp,
}

#[pymethods]
impl PyTabularMdp {
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        ihomp::TabularMdp::parse(text).map(|inner| PyTabularMdp { inner }).map_err(err)
    }

    /// Stochastic gridworld; `goal` is `(col, row)`.
    #[staticmethod]
    #[pyo3(signature = (width, height, goal, noise = 0.1, gamma = 0.9))]
    fn gridworld(width: usize, height: usize, goal: (usize, usize), noise: f64, gamma: f64) -> PyResult<Self> {
        ihomp::env::make_gridworld(width, height, goal, noise, gamma)
            .map(|inner| PyTabularMdp { inner })
            .map_err(err)
    }

    #[getter]
    fn n_states(&self) -> usize {
        self.inner.n_states()
    }

    #[getter]
    fn n_actions(&self) -> usize {
        self.inner.n_actions()
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma()
    }

    /// Optimal values and a greedy action per state.
    #[pyo3(signature = (tol = 1e-8))]
    fn value_iteration(&self, tol: f64) -> PyResult<(Vec<f64>, Vec<usize>)> {
        ihomp::mdp::value_iteration(&self.inner, tol).map_err(err)
    }

    /// Exact value of a stochastic policy given as one distribution per state.
    fn evaluate(&self, policy: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        ihomp::mdp::evaluate_policy_exact(&self.inner, &policy).map_err(err)
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }
}

/// Partition of a box-shaped state space into classes.
#[pyclass(name = "Partition", frozen)]
struct PyPartition {
    inner: Arc<ihomp::Partition>,
}

#[pymethods]
impl PyPartition {
    /// Uniform grid with `counts[d]` cells along dimension `d`.
    #[staticmethod]
    fn grid(low: Vec<f64>, high: Vec<f64>, counts: Vec<usize>) -> PyResult<Self> {
        let bounds = ihomp::Bounds::new(low, high).map_err(err)?;
        ihomp::grid_partition(bounds, &counts)
            .map(|p| PyPartition { inner: Arc::new(p) })
            .map_err(err)
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        ihomp::Partition::parse(text)
            .map(|p| PyPartition { inner: Arc::new(p) })
            .map_err(err)
    }

    #[getter]
    fn class_count(&self) -> usize {
        self.inner.class_count()
    }

    fn class_index(&self, s: Vec<f64>) -> usize {
        self.inner.class_index(&s)
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }
}

/// Options stitched together by a partition or by value-based interruption.
#[pyclass(name = "HierPolicy", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyHierPolicy {
    inner: ihomp::options::HierPolicy,
}

#[pymethods]
impl PyHierPolicy {
    /// One uniform state-independent option per class.
    #[staticmethod]
    fn uniform(partition: &PyPartition, n_actions: usize) -> Self {
        PyHierPolicy {
            inner: ihomp::options::HierPolicy::uniform(partition.inner.clone(), &PolicyParams::uniform(n_actions)),
        }
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        ihomp::options::HierPolicy::parse(text)
            .map(|inner| PyHierPolicy { inner })
            .map_err(err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        ihomp::options::HierPolicy::load(path)
            .map(|inner| PyHierPolicy { inner })
            .map_err(err)
    }

    #[getter]
    fn option_count(&self) -> usize {
        self.inner.option_count()
    }

    #[getter]
    fn n_actions(&self) -> usize {
        self.inner.n_actions()
    }

    /// Option chosen at `s`.
    fn select(&self, s: Vec<f64>) -> usize {
        self.inner.select(&s)
    }

    fn terminates(&self, option: usize, s: Vec<f64>) -> PyResult<bool> {
        check_option(&self.inner, option)?;
        Ok(self.inner.terminates(option, &s))
    }

    fn action_distribution(&self, option: usize, s: Vec<f64>) -> PyResult<Vec<f64>> {
        check_option(&self.inner, option)?;
        Ok(self.inner.action_distribution(option, &ihomp::EnvState::new(s)))
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }
}

fn check_option(hier: &ihomp::options::HierPolicy, option: usize) -> PyResult<()> {
    if option >= hier.option_count() {
        return Err(err(ihomp::Error::OutOfRange {
            index: option,
            len: hier.option_count(),
        }));
    }
    Ok(())
}

/// Smallest number of sweeps for an `epsilon`-optimal stitched policy.
#[pyfunction]
fn required_iterations(gamma: f64, epsilon: f64) -> PyResult<usize> {
    core::required_iterations(gamma, epsilon).map_err(err)
}

#[pyfunction]
fn theorem_bound(m: usize, eta: f64, gamma: f64, epsilon: f64, reward_span: f64) -> PyResult<f64> {
    core::theorem_bound(m, eta, gamma, epsilon, reward_span).map_err(err)
}

/// Exact-solver IHOMP on a gridworld with a grid partition. Returns the
/// learned policy, `||V* - V||_inf` after every sweep (iteration 0 first)
/// and the misspecification error of the final options.
#[pyfunction]
#[pyo3(signature = (width, height, goal, counts, iterations, noise = 0.1, gamma = 0.9, start = 0))]
#[allow(clippy::too_many_arguments)]
fn tabular_ihomp(
    width: usize,
    height: usize,
    goal: (usize, usize),
    counts: Vec<usize>,
    iterations: usize,
    noise: f64,
    gamma: f64,
    start: usize,
) -> PyResult<(PyHierPolicy, Vec<f64>, f64)> {
    let problem = TabularProblem::gridworld(width, height, goal, noise, gamma, &counts, start).map_err(err)?;
    let mut backend = TabularBackend::new(problem.clone());
    let init = ihomp::options::HierPolicy::uniform(
        problem.partition.clone(),
        &PolicyParams::uniform(problem.mdp.n_actions()),
    );
    let cfg = IhompConfig {
        iterations,
        class_order: ClassOrder::Ascending,
        ..Default::default()
    };
    let (hier, _) = core::run_ihomp(&mut backend, init, &cfg, None).map_err(err)?;
    let eta = core::misspecification_error(MisspecTarget::Tabular(&problem), &hier)
        .map_err(err)?
        .eta;
    Ok((PyHierPolicy { inner: hier }, backend.sup_errors, eta))
}

/// Outcome of one seed.
#[pyclass(name = "SeedResult", frozen, get_all)]
struct PySeedResult {
    seed: u64,
    /// `(iteration, mean_return, std, success_rate)` per curve point.
    curve: Vec<(usize, f64, f64, f64)>,
    dir: PathBuf,
    policy: PyHierPolicy,
}

/// An experiment config, with `section.key=value` overrides applied.
#[pyclass(name = "Experiment")]
struct PyExperiment {
    cfg: experiment::ExperimentConfig,
}

#[pymethods]
impl PyExperiment {
    #[new]
    #[pyo3(signature = (path, overrides = Vec::new()))]
    fn new(path: PathBuf, overrides: Vec<String>) -> PyResult<Self> {
        experiment::ExperimentConfig::load(path, &overrides)
            .map(|cfg| PyExperiment { cfg })
            .map_err(err)
    }

    fn validate(&self) -> PyResult<()> {
        self.cfg.validate().map_err(err)
    }

    #[getter]
    fn seeds(&self) -> Vec<u64> {
        self.cfg.output.seeds.clone()
    }

    /// Train and evaluate every configured seed, or only `seed`.
    #[pyo3(signature = (out = None, seed = None))]
    fn run(&self, py: Python<'_>, out: Option<PathBuf>, seed: Option<u64>) -> PyResult<Vec<PySeedResult>> {
        let mut cfg = self.cfg.clone();
        if let Some(s) = seed {
            cfg.output.seeds = vec![s];
        }
        let results = py
            .detach(|| experiment::run_experiment(&cfg, out.as_deref()))
            .map_err(err)?;
        Ok(results
            .into_iter()
            .map(|r| PySeedResult {
                seed: r.seed,
                curve: r
                    .curve
                    .iter()
                    .map(|p| (p.iteration, p.mean_return, p.std, p.success_rate))
                    .collect(),
                dir: r.dir,
                policy: PyHierPolicy { inner: r.policy },
            })
            .collect())
    }

    /// Run once per grid; returns `(label, mean_cost, std, per-seed costs)`.
    #[pyo3(signature = (grids, out = None))]
    fn sweep(
        &self,
        py: Python<'_>,
        grids: Vec<Vec<usize>>,
        out: Option<PathBuf>,
    ) -> PyResult<Vec<(String, f64, f64, Vec<f64>)>> {
        let rows = py
            .detach(|| experiment::sweep_partitions(&self.cfg, &grids, out.as_deref()))
            .map_err(err)?;
        Ok(rows
            .into_iter()
            .map(|r| (r.label(), r.mean_cost, r.std, r.costs))
            .collect())
    }
}

#[pymodule]
fn ihomp_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("IhompError", m.py().get_type::<IhompError>())?;
    m.add_class::<PyTabularMdp>()?;
    m.add_class::<PyPartition>()?;
    m.add_class::<PyHierPolicy>()?;
    m.add_class::<PyExperiment>()?;
    m.add_class::<PySeedResult>()?;
    m.add_function(wrap_pyfunction!(required_iterations, m)?)?;
    m.add_function(wrap_pyfunction!(theorem_bound, m)?)?;
    m.add_function(wrap_pyfunction!(tabular_ihomp, m)?)?;
    Ok(())
}
