//! Command-line driver: condition checks, single-path simulation, strong
//! error sweeps and moment sweeps, each writing its artifacts into a run
//! directory named by a hash of the resolved configuration.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod options;

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use nsdde::model::{
    probe_contractivity, probe_growth_g, probe_initial_modulus, probe_khasminskii, probe_local_lipschitz,
    problem_by_name, ConditionProbeReport,
};
use nsdde::montecarlo::{moment_sweep_with, strong_error_sweep_with};
use nsdde::paths::{BrownianGrid, MeshSpec};
use nsdde::scheme::{simulate_em, simulate_mtem, write_trace};
use nsdde::truncation::{check_admissibility, policy_by_name, probe_trunc_khasminskii, probe_trunc_lipschitz};

pub use config::{resolve, RunConfig, Section};
pub use error::{exit, CliError};
pub use options::Cli;

/// Outcome of a completed command.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub run_dir: PathBuf,
}

/// Resolves `cli` and runs it.
pub fn run(cli: Cli) -> Result<Outcome, CliError> {
    let config = resolve(cli)?;
    execute(&config)
}

/// Runs an already resolved configuration.
pub fn execute(config: &RunConfig) -> Result<Outcome, CliError> {
    let dir = config.run_dir();
    fs::create_dir_all(&dir).map_err(|e| CliError::io(format!("creating {}: {e}", dir.display())))?;
    write(&dir.join("config.toml"), config.echo_toml())?;
    log::info!("run directory {}", dir.display());

    let code = match &config.section {
        Section::Check(c) => cmd_check(config, c, &dir)?,
        Section::Simulate(c) => cmd_simulate(config, c, &dir)?,
        Section::Converge(c) => cmd_converge(config, c, &dir)?,
        Section::Moments(c) => cmd_moments(config, c, &dir)?,
    };
    println!("run directory: {}", dir.display());
    Ok(Outcome { code, run_dir: dir })
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(format!("writing {}: {e}", path.display())))
}

fn write_json(path: &Path, value: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values serialise");
    text.push('\n');
    write(path, text)
}

fn to_value(v: impl Serialize) -> Value {
    serde_json::to_value(v).expect("report serialises")
}

#[derive(Serialize)]
struct ProbeEntry<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
    #[serde(flatten)]
    report: &'a ConditionProbeReport<f64>,
    passed: bool,
}

/// Reports of one condition, keyed by step size where the condition has one.
type ProbeGroup = Vec<(Option<f64>, ConditionProbeReport<f64>)>;

fn cmd_check(run: &RunConfig, c: &config::CheckConfig, dir: &Path) -> Result<i32, CliError> {
    let problem = problem_by_name::<f64>(&c.problem)?;
    let policy = policy_by_name(&c.policy, c.epsilon)?;
    let seed = run.seed;

    let mut groups: Vec<(&'static str, ProbeGroup)> = Vec::new();
    let mut push = |r: ConditionProbeReport<f64>, delta: Option<f64>| {
        let slug = r.condition.slug();
        match groups.iter_mut().find(|g| g.0 == slug) {
            Some(g) => g.1.push((delta, r)),
            None => groups.push((slug, vec![(delta, r)])),
        }
    };

    push(probe_local_lipschitz(&problem, c.radius, c.samples, seed)?, None);
    push(probe_contractivity(&problem, c.radius, c.samples, seed)?, None);
    push(probe_khasminskii(&problem, c.radius, &c.a_grid, c.samples, seed)?, None);
    if problem.growth().is_some() {
        push(probe_growth_g(&problem, c.radius, c.samples, seed)?, None);
    } else {
        log::info!("{} declares no growth bound for g; growth_g skipped", problem.name());
    }
    for &delta in &c.deltas {
        push(probe_initial_modulus(&problem, delta, c.q, c.khat, c.subgrid)?, Some(delta));
        push(probe_trunc_lipschitz(&problem, &policy, delta, c.samples, seed)?, Some(delta));
        push(probe_trunc_khasminskii(&problem, &policy, delta, c.samples, seed)?, Some(delta));
    }
    let admissibility = check_admissibility(&policy, |r| problem.lipschitz(r), problem.khasminskii_p(), c.q, &c.deltas)?;

    let mut conditions = Vec::new();
    let mut all_passed = true;
    for (slug, reports) in &groups {
        let entries: Vec<ProbeEntry> = reports
            .iter()
            .map(|(delta, report)| ProbeEntry { delta: *delta, report, passed: report.passed() })
            .collect();
        let violations: usize = reports.iter().map(|(_, r)| r.violations).sum();
        let passed = violations == 0;
        all_passed &= passed;
        let worst = reports.iter().map(|(_, r)| r.worst_margin).fold(f64::INFINITY, f64::min);
        println!("{slug:<18} {} violations = {violations}, worst margin = {worst:.6e}", verdict(passed));
        write_json(
            &dir.join(format!("{slug}.json")),
            &json!({ "run_id": run.run_id(), "config": run.echo_json(), "condition": slug, "reports": to_value(&entries) }),
        )?;
        conditions.push(json!({ "condition": slug, "violations": violations, "worst_margin": worst, "passed": passed }));
    }

    let admissible = admissibility.iter().all(|r| r.passed());
    for row in &admissibility {
        println!(
            "admissibility      {} Δ = {:.3e}, h = {:.6e}, threshold = {:.6e}",
            verdict(row.passed()),
            row.delta,
            row.h,
            row.rate_threshold
        );
    }
    write_json(
        &dir.join("admissibility.json"),
        &json!({ "run_id": run.run_id(), "config": run.echo_json(), "rows": to_value(&admissibility) }),
    )?;

    let passed = all_passed && admissible;
    write_json(
        &dir.join("summary.json"),
        &json!({
            "run_id": run.run_id(),
            "config": run.echo_json(),
            "conditions": conditions,
            "admissibility_passed": admissible,
            "passed": passed,
        }),
    )?;
    Ok(if passed { exit::OK } else { exit::VIOLATION })
}

fn verdict(passed: bool) -> &'static str {
    if passed {
        "ok  "
    } else {
        "FAIL"
    }
}

fn cmd_simulate(run: &RunConfig, c: &config::SimulateConfig, dir: &Path) -> Result<i32, CliError> {
    let mut problem = problem_by_name::<f64>(&c.problem)?;
    if let Some(x0) = &c.x0 {
        problem = problem.with_constant_initial(x0)?;
    }
    let mesh = MeshSpec::new(problem.delay(), c.m, c.horizon)?;
    let grid = BrownianGrid::generate(run.seed, c.path_index, mesh, problem.dim_w())?;
    let result = if c.scheme == "em" {
        simulate_em(&problem, grid.increments())
    } else {
        let policy = policy_by_name(&c.policy, c.epsilon)?;
        simulate_mtem(&problem, &policy, grid.increments())
    };
    let sol = match result {
        Ok(s) => s,
        Err(e @ nsdde::Error::NonFiniteStep { step }) => {
            write_json(
                &dir.join("summary.json"),
                &json!({ "run_id": run.run_id(), "config": run.echo_json(), "diverged_at_step": step }),
            )?;
            return Err(CliError::new(
                exit::DIVERGENCE,
                format!("{} diverged at step {step} (t = {}): {e}", c.scheme, mesh.node_time(step as i64)),
            ));
        }
        Err(e) => return Err(e.into()),
    };

    let mut trace = Vec::new();
    write_trace(&sol, &mut trace)?;
    write(&dir.join("trace.csv"), trace)?;
    write_json(
        &dir.join("summary.json"),
        &json!({
            "run_id": run.run_id(),
            "config": run.echo_json(),
            "scheme": c.scheme,
            "h_value": sol.h_value(),
            "admissible": sol.admissible(),
            "truncation_activations": sol.truncation_activations(),
            "final_state": sol.final_state(),
        }),
    )?;
    println!("truncation_activations = {}", sol.truncation_activations());
    Ok(exit::OK)
}

/// The summary carries the CLI echo, so `config` is replaced.
fn with_echo(mut summary: Value, run: &RunConfig) -> Value {
    summary["run_id"] = Value::String(run.run_id());
    summary["config"] = run.echo_json();
    summary
}

fn cmd_converge(run: &RunConfig, c: &config::SweepSection, dir: &Path) -> Result<i32, CliError> {
    let sweep = c.to_sweep(run.seed);
    let (problem, policy) = sweep.resolve()?;
    let report = strong_error_sweep_with(&problem, &policy, &sweep, run.workers)?;
    write(&dir.join("errors.csv"), report.to_csv()?)?;
    write_json(&dir.join("summary.json"), &with_echo(report.summary_json(), run))?;
    for f in &report.fitted_orders {
        println!("q = {}  {:<9} order = {:.4} ± {:.4}", f.q, f.estimator.as_str(), f.slope, f.slope_se);
    }
    println!("divergent paths: {}", report.divergent_paths_total);
    Ok(exit::OK)
}

fn cmd_moments(run: &RunConfig, c: &config::SweepSection, dir: &Path) -> Result<i32, CliError> {
    let sweep = c.to_sweep(run.seed);
    let (problem, policy) = sweep.resolve()?;
    let report = moment_sweep_with(&problem, &policy, &sweep, run.workers)?;
    write(&dir.join("moments.csv"), report.to_csv()?)?;
    write_json(&dir.join("summary.json"), &with_echo(report.summary_json(), run))?;
    println!(
        "E sup |x|^p̄: max = {:.6e}, min = {:.6e}, ratio = {:.4}",
        report.max_sup_moment, report.min_sup_moment, report.ratio
    );
    println!("divergent paths: {}", report.divergent_paths_total);
    Ok(exit::OK)
}
