//! Coupled Monte Carlo estimation of strong errors and moment bounds.
//!
//! Every path draws one Brownian path on the reference mesh. The reference
//! solution and all coarse solutions are driven by exact block sums of those
//! increments, so their difference measures discretisation error alone.
//! Per-path results land in a buffer indexed by path, and all reductions
//! run over that buffer in path order, so reports do not depend on the
//! number of worker threads.

mod config;
mod moments;
mod report;
mod stats;

pub use config::SweepConfig;
pub use moments::{moment_sweep, moment_sweep_with, MomentReport, MomentRow};
pub use report::{run_id, ErrorReport, ErrorRow, Estimator, FittedOrder};
pub use stats::{fit_order, kahan_sum, mean_and_std_error, KahanSum};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{distance, norm};
use crate::model::NsddeProblem;
use crate::paths::BrownianGrid;
use crate::scalar::Real;
use crate::scheme::{interpolant_path, piecewise_path, simulate_mtem};
use crate::truncation::TruncationPolicy;

/// Runs `f` on a dedicated pool of `workers` threads, or on the global pool
/// when `workers` is `None`.
pub fn with_workers<R: Send>(workers: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    match workers {
        None => Ok(f()),
        Some(0) => Err(Error::InvalidArgument("worker count must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Distances between reference and one coarse level on a single path.
#[derive(Debug, Clone, Copy)]
struct LevelErrors<T> {
    fixed: T,
    sup_x: T,
    sup_xbar: T,
}

/// `None` marks a coarse run that diverged above `Δ*`.
type PathErrors<T> = Vec<Option<LevelErrors<T>>>;

fn sup_distance<T: Real>(a: &[T], b: &[T], d: usize) -> T {
    a.chunks(d)
        .zip(b.chunks(d))
        .map(|(x, y)| distance(x, y))
        .fold(T::zero(), |acc, v| if v > acc || v.is_nan() { v } else { acc })
}

fn path_errors<T: Real>(
    problem: &NsddeProblem<T>,
    policy: &TruncationPolicy<T>,
    config: &SweepConfig<T>,
    with_sup: bool,
    path: usize,
) -> Result<PathErrors<T>> {
    let mesh = config.reference_mesh(problem.delay())?;
    let grid = BrownianGrid::generate(config.seed, path as u64, mesh, problem.dim_w())?;
    let reference = simulate_mtem(problem, policy, grid.increments()).map_err(|e| match e {
        Error::NonFiniteStep { step } => Error::ReferenceDiverged { path, step },
        other => other,
    })?;
    let d = problem.dim_x();
    let n_ref = mesh.total_steps();
    // reference states at every fine node 0..=N_ref
    let ref_nodes = &reference.states()[config.m_ref * d..];
    let ref_final = reference.final_state();

    config
        .coarse_m
        .iter()
        .map(|&m| {
            let ratio = config.m_ref / m;
            let inc = grid.coarsen(ratio)?;
            let coarse = match simulate_mtem(problem, policy, &inc) {
                Ok(s) => s,
                Err(Error::NonFiniteStep { step }) => {
                    if policy.is_admissible(inc.mesh().step()) {
                        return Err(Error::AdmissibleDivergence {
                            path,
                            delta: inc.mesh().step().as_f64(),
                            step,
                        });
                    }
                    return Ok(None);
                }
                Err(e) => return Err(e),
            };
            let fixed = distance(ref_final, coarse.final_state());
            let (sup_x, sup_xbar) = if with_sup {
                let xs = interpolant_path(&coarse, problem, &grid)?;
                let xb = piecewise_path(&coarse, ratio)?;
                debug_assert_eq!(xs.len(), (n_ref + 1) * d);
                (sup_distance(ref_nodes, &xs, d), sup_distance(ref_nodes, &xb, d))
            } else {
                (T::nan(), T::nan())
            };
            Ok(Some(LevelErrors { fixed, sup_x, sup_xbar }))
        })
        .collect()
}

/// Collects per-path results in path order; the first failure by path index
/// wins, whatever order the workers finished in.
pub(crate) fn collect_paths<R: Send>(paths: usize, f: impl Fn(usize) -> Result<R> + Sync) -> Result<Vec<R>> {
    let results: Vec<Result<R>> = (0..paths).into_par_iter().map(&f).collect();
    results.into_iter().collect()
}

/// Coupled strong-error sweep over every `(m, q, estimator)` combination.
///
/// The running-sup estimators are included when the problem declares a
/// growth bound for `g`.
pub fn strong_error_sweep<T: Real>(config: &SweepConfig<T>, workers: Option<usize>) -> Result<ErrorReport<T>> {
    let (problem, policy) = config.resolve()?;
    strong_error_sweep_with(&problem, &policy, config, workers)
}

/// As [`strong_error_sweep`] for an explicit problem and policy. The
/// problem's initial segment is used as given.
pub fn strong_error_sweep_with<T: Real>(
    problem: &NsddeProblem<T>,
    policy: &TruncationPolicy<T>,
    config: &SweepConfig<T>,
    workers: Option<usize>,
) -> Result<ErrorReport<T>> {
    let with_sup = match problem.growth() {
        Some(g) => {
            let p = problem.khasminskii_p();
            for &q in &config.q_list {
                if q > p - g.r {
                    log::warn!("q = {q} exceeds p - r = {}; sup_x rows fall outside the proven regime", p - g.r);
                }
                if q >= T::lit(4.0) {
                    log::warn!("q = {q} is not below 4; sup_xbar rows fall outside the proven regime");
                }
            }
            true
        }
        None => {
            log::warn!("problem {} declares no growth bound for g; sup estimators skipped", problem.name());
            false
        }
    };

    let per_path = with_workers(workers, || {
        collect_paths(config.paths, |i| path_errors(problem, policy, config, with_sup, i))
    })??;

    let mut rows = Vec::new();
    let mut divergent_total = 0;
    let delay = problem.delay();
    for (level, &m) in config.coarse_m.iter().enumerate() {
        let delta = delay / T::from_count(m);
        let alive: Vec<LevelErrors<T>> = per_path.iter().filter_map(|p| p[level]).collect();
        let divergent = config.paths - alive.len();
        divergent_total += divergent;
        if divergent > 0 {
            log::warn!("m = {m}: {divergent} of {} paths diverged", config.paths);
        }
        let mut estimators = vec![
            (Estimator::FixedTX, alive.iter().map(|e| e.fixed).collect::<Vec<T>>()),
            (Estimator::FixedTXbar, alive.iter().map(|e| e.fixed).collect()),
        ];
        if with_sup {
            estimators.push((Estimator::SupX, alive.iter().map(|e| e.sup_x).collect()));
            estimators.push((Estimator::SupXbar, alive.iter().map(|e| e.sup_xbar).collect()));
        }
        for &q in &config.q_list {
            for (estimator, dists) in &estimators {
                let powers: Vec<T> = dists.iter().map(|&e| e.powf(q)).collect();
                let (moment, std_error) = mean_and_std_error(&powers);
                rows.push(ErrorRow {
                    problem: config.problem.clone(),
                    policy: policy.label().to_string(),
                    epsilon: config.epsilon,
                    q,
                    estimator: *estimator,
                    m,
                    delta,
                    error_q: moment.powf(T::one() / q),
                    std_error,
                    divergent_paths: divergent,
                });
            }
        }
        log::info!("m = {m} (Δ = {delta}) done");
    }

    let report = ErrorReport::new(config, rows, divergent_total)?;
    if let Some(v) = report.power_mean_violation() {
        log::error!("q-norm monotonicity violated: {v}");
    }
    Ok(report)
}

/// Largest state norm along a solution, used by moment sweeps.
pub(crate) fn max_norm<T: Real>(values: &[T], d: usize) -> T {
    values.chunks(d).map(norm).fold(T::zero(), T::max)
}
