//! Resolution of merged options into fully specified, validated run
//! configurations, and the echo written next to every artifact.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use nsdde::model::{problem_by_name, NsddeProblem};
use nsdde::montecarlo::SweepConfig;
use nsdde::paths::MeshSpec;
use nsdde::truncation::{default_policy_name, policy_by_name, TruncationPolicy};

use crate::error::CliError;
use crate::options::{CheckOptions, Cli, Command, FileConfig, GlobalOptions, SimulateOptions, SweepOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckConfig {
    pub problem: String,
    pub policy: String,
    pub epsilon: f64,
    pub radius: f64,
    pub samples: usize,
    pub q: f64,
    pub deltas: Vec<f64>,
    pub a_grid: Vec<f64>,
    pub khat: f64,
    pub subgrid: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub problem: String,
    pub policy: String,
    pub epsilon: f64,
    pub scheme: String,
    pub m: usize,
    pub horizon: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    pub path_index: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSection {
    pub problem: String,
    pub policy: String,
    pub epsilon: f64,
    pub q: Vec<f64>,
    pub m_list: Vec<usize>,
    pub m_ref: usize,
    pub horizon: f64,
    pub paths: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_bar: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
}

impl SweepSection {
    pub fn to_sweep(&self, seed: u64) -> SweepConfig<f64> {
        SweepConfig {
            problem: self.problem.clone(),
            policy: self.policy.clone(),
            epsilon: self.epsilon,
            q_list: self.q.clone(),
            coarse_m: self.m_list.clone(),
            m_ref: self.m_ref,
            horizon: self.horizon,
            paths: self.paths,
            seed,
            moment_exponent: self.p_bar,
            initial_value: self.x0.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Section {
    Check(CheckConfig),
    Simulate(SimulateConfig),
    Converge(SweepSection),
    Moments(SweepSection),
}

/// A fully resolved invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub workers: Option<usize>,
    pub output_dir: PathBuf,
    pub section: Section,
}

#[derive(Serialize)]
struct EchoGlobal {
    seed: u64,
}

/// What gets hashed and written as `config.toml`. Worker count and output
/// location are left out: they do not influence results.
#[derive(Serialize)]
struct Echo<'a> {
    global: EchoGlobal,
    #[serde(skip_serializing_if = "Option::is_none")]
    check: Option<&'a CheckConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    simulate: Option<&'a SimulateConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    converge: Option<&'a SweepSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    moments: Option<&'a SweepSection>,
}

impl RunConfig {
    fn echo(&self) -> Echo<'_> {
        let mut e = Echo {
            global: EchoGlobal { seed: self.seed },
            check: None,
            simulate: None,
            converge: None,
            moments: None,
        };
        match &self.section {
            Section::Check(c) => e.check = Some(c),
            Section::Simulate(c) => e.simulate = Some(c),
            Section::Converge(c) => e.converge = Some(c),
            Section::Moments(c) => e.moments = Some(c),
        }
        e
    }

    pub fn echo_toml(&self) -> String {
        toml::to_string(&self.echo()).expect("config echo serialises")
    }

    pub fn echo_json(&self) -> serde_json::Value {
        serde_json::to_value(self.echo()).expect("config echo serialises")
    }

    pub fn run_id(&self) -> String {
        nsdde::montecarlo::run_id(&self.echo_json())
    }

    pub fn run_dir(&self) -> PathBuf {
        self.output_dir.join(format!("{}-{}", self.command_name(), self.run_id()))
    }

    pub fn command_name(&self) -> &'static str {
        match self.section {
            Section::Check(_) => "check",
            Section::Simulate(_) => "simulate",
            Section::Converge(_) => "converge",
            Section::Moments(_) => "moments",
        }
    }
}

pub fn read_file_config(path: &Path) -> Result<FileConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}: {e}", path.display())))?;
    parse_file_config(&text).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
}

pub fn parse_file_config(text: &str) -> Result<FileConfig, toml::de::Error> {
    toml::from_str(text)
}

/// Merges file and flags (flags win) and resolves defaults.
pub fn resolve(cli: Cli) -> Result<RunConfig, CliError> {
    let file = match &cli.config {
        Some(p) => read_file_config(p)?,
        None => FileConfig::default(),
    };
    resolve_with(cli.global, cli.command, file)
}

pub fn resolve_with(global: GlobalOptions, command: Command, file: FileConfig) -> Result<RunConfig, CliError> {
    let g = global.or(file.global);
    if g.workers == Some(0) {
        return Err(CliError::validation("global.workers: must be at least 1"));
    }
    let section = match command {
        Command::Check(o) => Section::Check(resolve_check(o.or(file.check.unwrap_or_default()))?),
        Command::Simulate(o) => Section::Simulate(resolve_simulate(o.or(file.simulate.unwrap_or_default()))?),
        Command::Converge(o) => {
            Section::Converge(resolve_sweep("converge", o.or(file.converge.unwrap_or_default()), false, g.seed.unwrap_or(0))?)
        }
        Command::Moments(o) => {
            Section::Moments(resolve_sweep("moments", o.or(file.moments.unwrap_or_default()), true, g.seed.unwrap_or(0))?)
        }
    };
    Ok(RunConfig {
        seed: g.seed.unwrap_or(0),
        workers: g.workers,
        output_dir: g.output_dir.unwrap_or_else(|| PathBuf::from("runs")),
        section,
    })
}

/// Problem, policy name and ε with defaults filled in. Unknown names are
/// usage errors.
fn resolve_names(
    section: &str,
    problem: Option<String>,
    policy: Option<String>,
    epsilon: Option<f64>,
) -> Result<(NsddeProblem<f64>, String, f64), CliError> {
    let problem = problem.ok_or_else(|| CliError::usage(format!("{section}.problem: required")))?;
    let model = problem_by_name::<f64>(&problem).map_err(|e| CliError::usage(format!("{section}.problem: {e}")))?;
    let policy = match policy {
        Some(p) => p,
        None => default_policy_name(&problem)
            .ok_or_else(|| CliError::usage(format!("{section}.policy: required for {problem}")))?
            .to_string(),
    };
    let epsilon = epsilon.unwrap_or(if policy == "ex1-inverse" { 0.5 } else { 0.9 });
    Ok((model, policy, epsilon))
}

fn load_policy(section: &str, policy: &str, epsilon: f64) -> Result<TruncationPolicy<f64>, CliError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(CliError::validation(format!("{section}.epsilon: {epsilon} outside (0, 1)")));
    }
    policy_by_name(policy, epsilon).map_err(|e| match e {
        nsdde::Error::UnknownName { .. } => CliError::usage(format!("{section}.policy: {e}")),
        other => CliError::validation(format!("{section}.policy: {other}")),
    })
}

fn resolve_check(o: CheckOptions) -> Result<CheckConfig, CliError> {
    let (model, policy_name, epsilon) = resolve_names("check", o.problem, o.policy, o.epsilon)?;
    let policy = load_policy("check", &policy_name, epsilon)?;
    let c = CheckConfig {
        problem: model.name().to_string(),
        policy: policy_name,
        epsilon,
        radius: o.radius.unwrap_or(5.0),
        samples: o.samples.unwrap_or(10_000),
        q: o.q.unwrap_or(4.0),
        deltas: o
            .deltas
            .unwrap_or_else(|| (0..4).map(|k| policy.delta_star() / 2f64.powi(k)).collect()),
        a_grid: o.a_grid.unwrap_or_else(|| vec![0.05, 0.1, 0.25, 0.5, 0.75, 1.0]),
        khat: o.khat.unwrap_or(1.0),
        subgrid: o.subgrid.unwrap_or(16),
    };

    let mut errs = Vec::new();
    if !(c.radius > 0.0 && c.radius.is_finite()) {
        errs.push(format!("check.radius: {} must be positive", c.radius));
    }
    if c.samples == 0 {
        errs.push("check.samples: must be at least 1".to_string());
    }
    let p = model.khasminskii_p();
    if !(c.q > 2.0 && c.q < p) {
        errs.push(format!("check.q: {} outside (2, p = {p})", c.q));
    }
    if c.deltas.is_empty() {
        errs.push("check.deltas: must not be empty".to_string());
    }
    for (i, &d) in c.deltas.iter().enumerate() {
        if !(d > 0.0 && d <= policy.delta_star()) {
            errs.push(format!("check.deltas[{i}]: {d} outside (0, Δ* = {}]", policy.delta_star()));
            continue;
        }
        let ratio = model.delay() / d;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio {
            errs.push(format!("check.deltas[{i}]: delay / {d} is not an integer"));
        }
    }
    if c.a_grid.is_empty() {
        errs.push("check.a_grid: must not be empty".to_string());
    }
    for (i, &a) in c.a_grid.iter().enumerate() {
        if !(a > 0.0 && a <= 1.0) {
            errs.push(format!("check.a_grid[{i}]: {a} outside (0, 1]"));
        }
    }
    if !(c.khat > 0.0) {
        errs.push(format!("check.khat: {} must be positive", c.khat));
    }
    if c.subgrid == 0 {
        errs.push("check.subgrid: must be at least 1".to_string());
    }
    if errs.is_empty() {
        Ok(c)
    } else {
        Err(CliError::validation(errs.join("\n")))
    }
}

fn resolve_simulate(o: SimulateOptions) -> Result<SimulateConfig, CliError> {
    let (model, policy_name, epsilon) = resolve_names("simulate", o.problem, o.policy, o.epsilon)?;
    let c = SimulateConfig {
        problem: model.name().to_string(),
        policy: policy_name,
        epsilon,
        scheme: o.scheme.unwrap_or_else(|| "mtem".to_string()),
        m: o.m.unwrap_or(16),
        horizon: o.horizon.unwrap_or(1.0),
        x0: o.x0,
        path_index: o.path_index.unwrap_or(0),
    };

    let mut errs = Vec::new();
    if c.scheme != "mtem" && c.scheme != "em" {
        return Err(CliError::usage(format!("simulate.scheme: `{}` is not one of mtem, em", c.scheme)));
    }
    match MeshSpec::new(model.delay(), c.m, c.horizon) {
        Ok(mesh) if c.scheme == "mtem" => {
            let policy = load_policy("simulate", &c.policy, c.epsilon)?;
            if let Err(e) = policy.h(mesh.step()) {
                errs.push(format!("simulate.m: truncation level undefined at Δ = {}: {e}", mesh.step()));
            }
        }
        Ok(_) => {}
        Err(e) => errs.push(format!("simulate.m/horizon: {e}")),
    }
    if let Some(x0) = &c.x0 {
        if let Err(e) = model.with_constant_initial(x0) {
            errs.push(format!("simulate.x0: {e}"));
        }
    }
    if errs.is_empty() {
        Ok(c)
    } else {
        Err(CliError::validation(errs.join("\n")))
    }
}

fn rename_field(msg: &str) -> String {
    for (from, to) in [("coarse_m", "m_list"), ("q_list", "q"), ("moment_exponent", "p_bar"), ("initial_value", "x0")] {
        if let Some(rest) = msg.strip_prefix(from) {
            return format!("{to}{rest}");
        }
    }
    msg.to_string()
}

fn resolve_sweep(section: &str, o: SweepOptions, moments: bool, seed: u64) -> Result<SweepSection, CliError> {
    let (model, policy_name, epsilon) = resolve_names(section, o.problem, o.policy, o.epsilon)?;
    let policy = load_policy(section, &policy_name, epsilon)?;
    let p_bar = if moments {
        Some(o.p_bar.unwrap_or_else(|| match model.growth() {
            Some(g) => model.khasminskii_p() + 2.0 - g.r,
            None => model.khasminskii_p(),
        }))
    } else {
        o.p_bar
    };
    let c = SweepSection {
        problem: model.name().to_string(),
        policy: policy_name,
        epsilon,
        q: o.q.unwrap_or_else(|| vec![3.0, 4.0]),
        m_list: o.m_list.unwrap_or_else(|| vec![8, 16, 32, 64, 128]),
        m_ref: o.m_ref.unwrap_or(1024),
        horizon: o.horizon.unwrap_or(2.0),
        paths: o.paths.unwrap_or(2000),
        p_bar,
        x0: o.x0,
    };
    match c.to_sweep(seed).validate(model, &policy) {
        Ok(_) => Ok(c),
        Err(nsdde::Error::Config(errs)) => Err(CliError::validation(
            errs.iter()
                .map(|e| format!("{section}.{}", rename_field(e)))
                .collect::<Vec<_>>()
                .join("\n"),
        )),
        Err(e) => Err(CliError::validation(format!("{section}: {e}"))),
    }
}
