use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{problem_by_name, NsddeProblem};
use crate::paths::MeshSpec;
use crate::scalar::Real;
use crate::truncation::{policy_by_name, TruncationPolicy};

/// Parameters of a coupled error sweep or moment sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig<T> {
    pub problem: String,
    pub policy: String,
    pub epsilon: T,
    /// Error exponents, each in `(2, p)`.
    pub q_list: Vec<T>,
    /// Coarse steps per delay, each dividing `m_ref`.
    pub coarse_m: Vec<usize>,
    /// Reference steps per delay.
    pub m_ref: usize,
    pub horizon: T,
    pub paths: usize,
    pub seed: u64,
    /// `p̄` for moment sweeps.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub moment_exponent: Option<T>,
    /// Constant initial segment replacing the problem's own.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_value: Option<Vec<T>>,
}

impl<T: Real> SweepConfig<T> {
    /// Looks up the named problem and policy, then validates.
    pub fn resolve(&self) -> Result<(NsddeProblem<T>, TruncationPolicy<T>)> {
        let problem = problem_by_name::<T>(&self.problem)?;
        if !(self.epsilon > T::zero() && self.epsilon < T::one()) {
            return Err(Error::Config(vec![format!("epsilon: {} outside (0, 1)", self.epsilon)]));
        }
        let policy = policy_by_name(&self.policy, self.epsilon)?;
        let problem = self.validate(problem, &policy)?;
        Ok((problem, policy))
    }

    /// Checks every field against `problem` and `policy`, reporting all
    /// failures at once. Returns the problem with the initial value applied.
    pub fn validate(&self, problem: NsddeProblem<T>, policy: &TruncationPolicy<T>) -> Result<NsddeProblem<T>> {
        let mut errs = Vec::new();
        let p = problem.khasminskii_p();

        if self.paths == 0 {
            errs.push("paths: must be at least 1".to_string());
        }
        if self.m_ref == 0 {
            errs.push("m_ref: must be at least 1".to_string());
        }
        if self.coarse_m.is_empty() {
            errs.push("coarse_m: must not be empty".to_string());
        }
        let mut meshes_ok = self.m_ref > 0;
        for (i, &m) in self.coarse_m.iter().enumerate() {
            if m == 0 || self.m_ref == 0 || !self.m_ref.is_multiple_of(m) {
                errs.push(format!("coarse_m[{i}]: {m} does not divide m_ref = {}", self.m_ref));
                meshes_ok = false;
            }
        }
        if meshes_ok {
            for (i, &m) in std::iter::once(&self.m_ref).chain(&self.coarse_m).enumerate() {
                let field = if i == 0 { "m_ref".to_string() } else { format!("coarse_m[{}]", i - 1) };
                match MeshSpec::new(problem.delay(), m, self.horizon) {
                    Ok(mesh) => {
                        if let Err(e) = policy.h(mesh.step()) {
                            errs.push(format!("{field}: truncation level undefined at Δ = {}: {e}", mesh.step()));
                        }
                    }
                    Err(e) => errs.push(format!("horizon: {e} (mesh with {m} steps per delay)")),
                }
            }
        }

        if self.q_list.is_empty() {
            errs.push("q_list: must not be empty".to_string());
        }
        for (i, &q) in self.q_list.iter().enumerate() {
            if !(q > T::lit(2.0) && q < p) {
                errs.push(format!("q_list[{i}]: {q} outside (2, p = {p})"));
            }
        }

        if let Some(pb) = self.moment_exponent {
            let cap = match problem.growth() {
                Some(g) => p + T::lit(2.0) - g.r,
                None => p,
            };
            if !(pb > T::zero()) {
                errs.push(format!("moment_exponent: {pb} must be positive"));
            } else if pb > cap {
                let why = if problem.growth().is_some() { "p + 2 - r" } else { "p" };
                errs.push(format!("moment_exponent: p̄ = {pb} exceeds {why} = {cap}"));
            }
        }

        let problem = match &self.initial_value {
            Some(x0) => match problem.with_constant_initial(x0) {
                Ok(p) => p,
                Err(e) => {
                    errs.push(format!("initial_value: {e}"));
                    problem
                }
            },
            None => problem,
        };

        if errs.is_empty() {
            Ok(problem)
        } else {
            Err(Error::Config(errs))
        }
    }

    /// Reference mesh `(τ, m_ref, T)`.
    pub fn reference_mesh(&self, delay: T) -> Result<MeshSpec<T>> {
        MeshSpec::new(delay, self.m_ref, self.horizon)
    }
}
