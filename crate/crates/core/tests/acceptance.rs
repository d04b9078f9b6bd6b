//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any gated criterion fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use ihomp::experiment::{run_experiment, sweep_partitions, ExperimentConfig, SeedResult};
use ihomp::ihomp::{
    exact_hier_values, exact_option_q, misspecification_error, required_iterations, run_ihomp, ClassOrder,
    IhompConfig, MisspecTarget, TabularBackend, TabularProblem,
};
use ihomp::learning::{nn_value, smdp_lstd, SmdpSample};
use ihomp::options::{HierPolicy, PolicyParams, Termination};
use ihomp::{grid_partition, Bounds, EnvState, Grid, TabularMdp};
use nalgebra::{DMatrix, DVector};
use rand::Rng as _;

type Outcome = Result<(bool, String), Box<dyn std::error::Error>>;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str, overrides: &[&str]) -> Result<ExperimentConfig, Box<dyn std::error::Error>> {
    let overrides: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    Ok(ExperimentConfig::load(configs().join(name), &overrides)?)
}

fn run(name: &str, overrides: &[&str]) -> Result<(Vec<SeedResult>, tempfile::TempDir), Box<dyn std::error::Error>> {
    let cfg = load(name, overrides)?;
    let dir = tempfile::tempdir()?;
    let results = run_experiment(&cfg, Some(dir.path()))?;
    Ok((results, dir))
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn gridworld() -> ihomp::Result<TabularProblem> {
    TabularProblem::gridworld(5, 5, (4, 4), 0.1, 0.9, &[2, 2], 0)
}

fn tabular_run(problem: &TabularProblem, iterations: usize) -> ihomp::Result<(HierPolicy, TabularBackend)> {
    let mut backend = TabularBackend::new(problem.clone());
    let init = HierPolicy::uniform(problem.partition.clone(), &PolicyParams::uniform(problem.mdp.n_actions()));
    let cfg = IhompConfig {
        iterations,
        class_order: ClassOrder::Ascending,
        ..Default::default()
    };
    let (hier, _) = run_ihomp(&mut backend, init, &cfg, None)?;
    Ok((hier, backend))
}

fn theorem_one() -> Outcome {
    let problem = gridworld()?;
    let k = required_iterations(0.9, 0.01)?;
    let (hier, backend) = tabular_run(&problem, k)?;
    let sup = *backend.sup_errors.last().expect("assessed");
    let eta = misspecification_error(MisspecTarget::Tabular(&problem), &hier)?.eta;
    Ok((
        k == 66 && sup <= 0.01 && eta <= 1e-9,
        format!("K = {k}, sup |V* - V| = {sup:.3e} <= 0.01, eta = {eta:.3e} <= 1e-9"),
    ))
}

fn sweep_contraction() -> Outcome {
    const TOL: f64 = 1e-8;
    let gamma = 0.9;
    let (_, backend) = tabular_run(&gridworld()?, 66)?;
    let errors = &backend.sup_errors;
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for pair in errors.windows(2) {
        if pair[0] > 10.0 * TOL {
            worst = worst.max(pair[1] / pair[0]);
            checked += 1;
        }
    }
    Ok((
        checked > 0 && worst <= gamma + 0.01,
        format!("max sweep ratio {worst:.4} <= {:.2} over {checked} sweeps", gamma + 0.01),
    ))
}

fn iteration_mean(results: &[SeedResult], k: usize) -> f64 {
    results.iter().map(|r| r.curve[k].mean_return).sum::<f64>() / results.len() as f64
}

fn puddle_repair() -> Outcome {
    let (ihomp, _a) = run("puddle_2x2.cfg", &[])?;
    let (avi, _b) = run("puddle_2x2.cfg", &["algorithm.kind=\"avi-baseline\""])?;
    let (flat, _c) = run("puddle_2x2.cfg", &["algorithm.kind=\"flat\""])?;
    let r_avi = avi.iter().map(|r| r.last().mean_return).sum::<f64>() / avi.len() as f64;
    let r_ihomp = iteration_mean(&ihomp, 2);
    let r_flat = iteration_mean(&flat, 2);
    // Returns are costs, so the ratio puts the baseline on top.
    let (ratio, flat_ratio) = (r_avi / r_ihomp, r_avi / r_flat);
    Ok((
        ihomp.len() == 10 && ratio >= 0.9 && flat_ratio < 0.5,
        format!(
            "AVI {r_avi:.1}, IHOMP(2) {r_ihomp:.1} ratio {ratio:.3} >= 0.9, flat(2) {r_flat:.1} ratio {flat_ratio:.3} < 0.5"
        ),
    ))
}

fn sweep_ordering() -> Outcome {
    let cfg = load("puddle_sweep.cfg", &[])?;
    let grids = vec![vec![1, 1], vec![2, 2], vec![3, 3], vec![4, 4]];
    let dir = tempfile::tempdir()?;
    let rows = sweep_partitions(&cfg, &grids, Some(dir.path()))?;
    let worst = rows[0].mean_cost;
    let gated = rows[1..].iter().all(|r| r.mean_cost < worst);
    let wins = rows[2].costs.iter().zip(&rows[3].costs).filter(|(a, b)| a < b).count();
    let costs: Vec<String> = rows.iter().map(|r| format!("{} {:.1}", r.label(), r.mean_cost)).collect();
    Ok((
        gated,
        format!(
            "mean cost {}; 3x3 beats 4x4 in {wins}/{} seeds (soft, not gated)",
            costs.join(", "),
            rows[2].costs.len()
        ),
    ))
}

fn second_room_share(results: &[SeedResult]) -> Result<f64, Box<dyn std::error::Error>> {
    let (mut cells, mut hits) = (0usize, 0usize);
    for r in results {
        let text = std::fs::read_to_string(r.dir.join("partition_grid.csv"))?;
        for line in text.lines().skip(1) {
            let fields: Vec<&str> = line.split(',').collect();
            let x: f64 = fields[2].parse()?;
            let option: usize = fields[4].parse()?;
            if x > 0.5 {
                cells += 1;
                hits += usize::from(option == 0);
            }
        }
    }
    Ok(hits as f64 / cells as f64)
}

fn two_rooms() -> Outcome {
    let (roi, _a) = run("two_rooms_roi.cfg", &[])?;
    let (plain, _b) = run("two_rooms_roi.cfg", &["algorithm.kind=\"ihomp\""])?;
    let roi_min = roi.iter().map(|r| r.last().success_rate).fold(f64::INFINITY, f64::min);
    let plain_max = plain.iter().map(|r| r.last().success_rate).fold(0.0, f64::max);
    let share = second_room_share(&roi)?;
    Ok((
        roi.len() == 10 && plain_max <= 0.1 && roi_min >= 0.9 && share >= 0.05,
        format!(
            "IHOMP max goal rate {plain_max:.2} <= 0.1, ROI min goal rate {roi_min:.2} >= 0.9, \
             option 0 on {:.1}% of second-room cells >= 5%",
            100.0 * share
        ),
    ))
}

/// Random tabular MDP on a 4x4 lattice with a 2x2 partition and random
/// deterministic option policies.
fn random_smdp(seed: u64) -> ihomp::Result<(TabularProblem, HierPolicy)> {
    let mut r = ihomp::rng::stream(seed, 0x51, 0);
    let (n, n_actions) = (16, 3);
    let mut kernel = Vec::new();
    let mut rewards = Vec::new();
    for _ in 0..n * n_actions {
        let mut weights: Vec<(usize, f64)> = (0..3).map(|_| (r.random_range(0..n), r.random_range(0.1..1.0))).collect();
        let total: f64 = weights.iter().map(|w| w.1).sum();
        weights.iter_mut().for_each(|w| w.1 /= total);
        kernel.push(weights);
        rewards.push(r.random_range(-1.0..1.0));
    }
    let mdp = TabularMdp::new(n, n_actions, 0.9, kernel, rewards)?;
    let lattice = Grid::new(Bounds::unit(2), vec![4, 4])?;
    let partition = Arc::new(grid_partition(Bounds::unit(2), &[2, 2])?);
    let problem = TabularProblem::new(mdp, lattice.clone(), r.random_range(0..n), partition.clone())?;
    let policies = (0..4)
        .map(|_| {
            let probs = (0..n)
                .flat_map(|_| {
                    let a = r.random_range(0..n_actions);
                    (0..n_actions).map(move |b| f64::from(u8::from(a == b)))
                })
                .collect();
            PolicyParams::table(lattice.clone(), n_actions, probs)
        })
        .collect::<ihomp::Result<Vec<_>>>()?;
    Ok((problem, HierPolicy::new(partition, policies)?))
}

fn roi_safety() -> Outcome {
    let mut worst = f64::INFINITY;
    for seed in 0..20 {
        let (problem, hier) = random_smdp(seed)?;
        let q = Arc::new(exact_option_q(&problem, &hier)?);
        let interrupted = hier.with_termination(Termination::Interrupt { q, rho: 0.0 })?;
        let base = exact_hier_values(&problem, &hier)?[problem.start];
        let roi = exact_hier_values(&problem, &interrupted)?[problem.start];
        worst = worst.min(roi - base);
    }
    Ok((
        worst >= -1e-6,
        format!("min V_roi(s0) - V(s0) over 20 instances = {worst:.3e} >= -1e-6"),
    ))
}

fn pinball() -> Outcome {
    let (ihomp, _a) = run("pinball_4x3.cfg", &[])?;
    let (flat, _b) = run(
        "pinball_4x3.cfg",
        &["algorithm.kind=\"flat\"", "learning.policy=\"linear\""],
    )?;
    let finals = |rs: &[SeedResult]| rs.iter().map(|r| r.last().mean_return).collect::<Vec<_>>();
    let (m_h, se_h) = mean_se(&finals(&ihomp));
    let (m_f, se_f) = mean_se(&finals(&flat));
    let se = (se_h * se_h + se_f * se_f).sqrt();
    Ok((
        ihomp.len() == 5 && m_h - m_f >= 3.0 * se && m_h > m_f,
        format!(
            "IHOMP {m_h:.1} (se {se_h:.1}), flat linear {m_f:.1} (se {se_f:.1}), difference {:.1} >= 3 se = {:.1}",
            m_h - m_f,
            3.0 * se
        ),
    ))
}

fn gradient_check() -> f64 {
    let mut r = ihomp::rng::stream(8, 0x52, 0);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for trial in 0..100 {
        let template = if trial % 2 == 0 {
            PolicyParams::uniform(4)
        } else {
            PolicyParams::uniform_linear(5, 4)
        };
        let theta: Vec<f64> = (0..template.theta().len()).map(|_| r.random_range(-2.0..2.0)).collect();
        let p = template.with_theta(theta.clone()).expect("same shape");
        let s: Vec<f64> = (0..4).map(|_| r.random_range(-1.0..1.0)).collect();
        let a = r.random_range(0..p.n_actions());
        let g = p.grad_log_prob(&s, a).expect("softmax family");
        for k in 0..theta.len() {
            let shifted = |d: f64| {
                let mut t = theta.clone();
                t[k] += d;
                p.with_theta(t).expect("same shape").log_prob(&s, a)
            };
            let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
            worst = worst.max((fd - g[k]).abs() / g[k].abs().max(1e-3));
        }
    }
    worst
}

/// Exhaustive one-hot samples of a random semi-Markov chain whose
/// probabilities are multiples of 1/10, against a direct linear solve.
fn lstd_check() -> Result<f64, Box<dyn std::error::Error>> {
    let mut r = ihomp::rng::stream(8, 0x53, 0);
    let (n, gamma) = (6, 0.9_f64);
    let lattice = Grid::new(Bounds::new(vec![0.0], vec![n as f64])?, vec![n])?;
    let features = ihomp::learning::FeatureMap::BinaryGrid(lattice.clone());
    let mut p = DMatrix::<f64>::zeros(n, n);
    let mut rewards = DVector::<f64>::zeros(n);
    let mut samples = Vec::new();
    for s in 0..n {
        let reward = r.random_range(-1.0..1.0);
        let duration: usize = r.random_range(1..4);
        rewards[s] = reward;
        for _ in 0..10 {
            let t = r.random_range(0..n);
            p[(s, t)] += 0.1 * gamma.powi(duration as i32);
            samples.push(SmdpSample {
                state: lattice.cell_center(s),
                option: 0,
                reward,
                duration,
                next: lattice.cell_center(t),
                terminal: false,
            });
        }
    }
    let exact = (DMatrix::<f64>::identity(n, n) - p)
        .lu()
        .solve(&rewards)
        .ok_or("singular oracle system")?;
    let v = smdp_lstd(&samples, &features, gamma, 0.0)?;
    Ok((0..n)
        .map(|s| (v.value(&lattice.cell_center(s)) - exact[s]).abs())
        .fold(0.0, f64::max))
}

fn nn_check() -> Result<f64, Box<dyn std::error::Error>> {
    let mut r = ihomp::rng::stream(8, 0x54, 0);
    let anchors: Vec<(EnvState, f64)> = (0..500)
        .map(|_| {
            let s = EnvState::new((0..4).map(|_| r.random_range(0.0..1.0)).collect::<Vec<_>>());
            (s, r.random_range(-100.0..0.0))
        })
        .collect();
    let v = nn_value(anchors.clone())?;
    Ok(anchors.iter().map(|(s, x)| (v.value(s) - x).abs()).fold(0.0, f64::max))
}

fn oracles() -> Outcome {
    let grad = gradient_check();
    let lstd = lstd_check()?;
    let nn = nn_check()?;
    Ok((
        grad <= 1e-4 && lstd <= 1e-6 && nn == 0.0,
        format!("gradient rel. err {grad:.2e} <= 1e-4, LSTD err {lstd:.2e} <= 1e-6, NN anchor err {nn:.1e} == 0"),
    ))
}

fn csv_files(dir: &Path) -> std::io::Result<BTreeMap<PathBuf, Vec<u8>>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e == "csv") {
                out.insert(path.strip_prefix(dir).expect("below root").to_path_buf(), std::fs::read(&path)?);
            }
        }
    }
    Ok(out)
}

fn determinism() -> Outcome {
    let shipped = [
        "s_corridor.cfg",
        "puddle_2x2.cfg",
        "puddle_sweep.cfg",
        "pinball_4x3.cfg",
        "two_rooms_roi.cfg",
        "gridworld_theorem1.cfg",
    ];
    let mut differing = Vec::new();
    let mut files = 0;
    for name in shipped {
        let (_, a) = run(name, &["output.seeds=[3]"])?;
        let (_, b) = run(name, &["output.seeds=[3]"])?;
        let (fa, fb) = (csv_files(a.path())?, csv_files(b.path())?);
        files += fa.len();
        if fa.is_empty() || fa != fb {
            differing.push(name);
        }
    }
    Ok((
        differing.is_empty(),
        format!("{files} CSV files from {} configs, seed 3, differing: {differing:?}", shipped.len()),
    ))
}

fn main() {
    let checks: [(&str, fn() -> Outcome, u64); 9] = [
        ("theorem-1 tabular check", theorem_one, 60),
        ("sweep contraction", sweep_contraction, 60),
        ("puddle world repair", puddle_repair, 600),
        ("partition sweep ordering", sweep_ordering, 1800),
        ("two rooms interruption", two_rooms, 600),
        ("interruption safety", roi_safety, 60),
        ("pinball feasibility", pinball, 1800),
        ("numerical oracles", oracles, 60),
        ("determinism", determinism, 1800),
    ];
    let mut failed = 0;
    for (i, (name, check, limit)) in checks.into_iter().enumerate() {
        let started = Instant::now();
        let outcome = check();
        let elapsed = started.elapsed();
        let in_time = elapsed <= Duration::from_secs(limit);
        let (pass, detail) = match outcome {
            Ok((pass, detail)) => (pass && in_time, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!pass);
        println!(
            "{} {} {name}: {detail} [{:.1} s, limit {limit} s]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
