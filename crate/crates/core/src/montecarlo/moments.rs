use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::model::NsddeProblem;
use crate::paths::BrownianGrid;
use crate::scalar::Real;
use crate::scheme::{interpolant_path, simulate_mtem};
use crate::truncation::TruncationPolicy;

use super::{collect_paths, max_norm, mean_and_std_error, run_id, with_workers, SweepConfig};

/// Moment estimates at one `(Δ, t)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentRow<T> {
    pub problem: String,
    pub policy: String,
    pub epsilon: T,
    pub p_bar: T,
    pub m: usize,
    pub delta: T,
    pub t: T,
    /// `E sup_{s≤t} |x_Δ(s)|^{p̄}`.
    pub sup_moment: T,
    pub sup_std_error: T,
    /// `E |x_Δ(t)|^{p̄}`.
    pub fixed_moment: T,
    pub fixed_std_error: T,
    pub divergent_paths: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport<T> {
    pub rows: Vec<MomentRow<T>>,
    /// Largest `E sup_{t≤T} |x_Δ|^{p̄}` over the Δ grid.
    pub max_sup_moment: T,
    pub min_sup_moment: T,
    /// `max / min` of the above across Δ.
    pub ratio: T,
    pub run_id: String,
    pub config: Value,
    pub divergent_paths_total: usize,
}

impl<T: Real> MomentReport<T> {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("CSV is UTF-8"))
    }

    pub fn summary_json(&self) -> Value {
        json!({
            "run_id": self.run_id,
            "config": self.config,
            "max_sup_moment": self.max_sup_moment,
            "min_sup_moment": self.min_sup_moment,
            "ratio": self.ratio,
            "divergent_paths_total": self.divergent_paths_total,
        })
    }
}

/// Per level: `(running sup, value)` norms at each reporting time, or
/// `None` if the run diverged above `Δ*`.
type PathMoments<T> = Vec<Option<Vec<(T, T)>>>;

fn path_moments<T: Real>(
    problem: &NsddeProblem<T>,
    policy: &TruncationPolicy<T>,
    config: &SweepConfig<T>,
    report_every: usize,
    path: usize,
) -> Result<PathMoments<T>> {
    let mesh = config.reference_mesh(problem.delay())?;
    let grid = BrownianGrid::generate(config.seed, path as u64, mesh, problem.dim_w())?;
    let d = problem.dim_x();
    config
        .coarse_m
        .iter()
        .map(|&m| {
            let inc = grid.coarsen(config.m_ref / m)?;
            let sol = match simulate_mtem(problem, policy, &inc) {
                Ok(s) => s,
                Err(Error::NonFiniteStep { step }) => {
                    if policy.is_admissible(inc.mesh().step()) {
                        return Err(Error::AdmissibleDivergence { path, delta: inc.mesh().step().as_f64(), step });
                    }
                    return Ok(None);
                }
                Err(e) => return Err(e),
            };
            let xs = interpolant_path(&sol, problem, &grid)?;
            let nodes = xs.len() / d;
            let mut out = Vec::with_capacity(nodes / report_every + 1);
            for j in (0..nodes).step_by(report_every) {
                // running sup includes ξ(0) = x_Δ(0) and every fine node up to t
                let sup = max_norm(&xs[..(j + 1) * d], d);
                out.push((sup, norm(&xs[j * d..(j + 1) * d])));
            }
            Ok(Some(out))
        })
        .collect()
}

/// Moment sweep with the named problem and policy.
pub fn moment_sweep<T: Real>(config: &SweepConfig<T>, workers: Option<usize>) -> Result<MomentReport<T>> {
    let (problem, policy) = config.resolve()?;
    moment_sweep_with(&problem, &policy, config, workers)
}

/// Estimates `E sup_{s≤t}|x_Δ(s)|^{p̄}` and `E|x_Δ(t)|^{p̄}` on every coarse
/// level, at the nodes of the coarsest mesh. Suprema run over all fine nodes.
pub fn moment_sweep_with<T: Real>(
    problem: &NsddeProblem<T>,
    policy: &TruncationPolicy<T>,
    config: &SweepConfig<T>,
    workers: Option<usize>,
) -> Result<MomentReport<T>> {
    let p_bar = config
        .moment_exponent
        .ok_or_else(|| Error::Config(vec!["moment_exponent: required for a moment sweep".into()]))?;
    let coarsest = *config.coarse_m.iter().min().ok_or_else(|| Error::Config(vec!["coarse_m: must not be empty".into()]))?;
    let report_every = config.m_ref / coarsest;

    let per_path = with_workers(workers, || {
        collect_paths(config.paths, |i| path_moments(problem, policy, config, report_every, i))
    })??;

    let mesh = config.reference_mesh(problem.delay())?;
    let mut rows = Vec::new();
    let mut finals = Vec::new();
    let mut divergent_total = 0;
    for (level, &m) in config.coarse_m.iter().enumerate() {
        let alive: Vec<&Vec<(T, T)>> = per_path.iter().filter_map(|p| p[level].as_ref()).collect();
        let divergent = config.paths - alive.len();
        divergent_total += divergent;
        let times = (mesh.total_steps() / report_every) + 1;
        for i in 0..times {
            let sups: Vec<T> = alive.iter().map(|v| v[i].0.powf(p_bar)).collect();
            let vals: Vec<T> = alive.iter().map(|v| v[i].1.powf(p_bar)).collect();
            let (sup_moment, sup_std_error) = mean_and_std_error(&sups);
            let (fixed_moment, fixed_std_error) = mean_and_std_error(&vals);
            rows.push(MomentRow {
                problem: config.problem.clone(),
                policy: policy.label().to_string(),
                epsilon: config.epsilon,
                p_bar,
                m,
                delta: problem.delay() / T::from_count(m),
                t: mesh.node_time((i * report_every) as i64),
                sup_moment,
                sup_std_error,
                fixed_moment,
                fixed_std_error,
                divergent_paths: divergent,
            });
            if i + 1 == times {
                finals.push(sup_moment);
            }
        }
        log::info!("m = {m}: E sup |x|^{p_bar} = {}", finals[level]);
    }

    let max = finals.iter().copied().fold(T::neg_infinity(), T::max);
    let min = finals.iter().copied().fold(T::infinity(), T::min);
    let config_value = serde_json::to_value(config).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(MomentReport {
        rows,
        max_sup_moment: max,
        min_sup_moment: min,
        ratio: max / min,
        run_id: run_id(&config_value),
        config: config_value,
        divergent_paths_total: divergent_total,
    })
}
