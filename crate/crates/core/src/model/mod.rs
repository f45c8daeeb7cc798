//! Problem definition for neutral stochastic differential delay equations
//!
//! ```text
//! d[x(t) - D(x(t - τ))] = f(x(t), x(t - τ)) dt + g(x(t), x(t - τ)) dB(t),   x|[-τ,0] = ξ
//! ```
//!
//! together with the structural constants each problem declares about
//! itself, and probes that test those declarations numerically.

mod examples;
mod probe;

use std::fmt;
use std::sync::Arc;

pub use examples::{example1, example2, example1_lipschitz, example2_lipschitz};
pub use probe::{
    contractivity_margin, growth_margin, khasminskii_margin, lipschitz_margin, probe_contractivity,
    probe_growth_g, probe_initial_modulus, probe_khasminskii, probe_local_lipschitz, ConditionId, ConditionProbeReport, ProbeWitness,
};
pub(crate) use probe::{draw_in_ball, run_probe, SampleOutcome};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

pub type DriftFn<T> = Arc<dyn Fn(&[T], &[T]) -> Vec<T> + Send + Sync>;
pub type DiffusionFn<T> = Arc<dyn Fn(&[T], &[T]) -> Matrix<T> + Send + Sync>;
pub type NeutralFn<T> = Arc<dyn Fn(&[T]) -> Vec<T> + Send + Sync>;
pub type InitialPathFn<T> = Arc<dyn Fn(T) -> Vec<T> + Send + Sync>;
pub type LipschitzFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// Coefficient triple `(f, g, D)` as seen by a time-stepping scheme.
///
/// Implemented by the raw problem and by its truncated counterpart, so the
/// same step code drives both the Euler-Maruyama baseline and MTEM.
pub trait Coefficients<T: Real> {
    fn drift(&self, x: &[T], y: &[T]) -> Vec<T>;
    fn diffusion(&self, x: &[T], y: &[T]) -> Matrix<T>;
    fn neutral(&self, y: &[T]) -> Vec<T>;

    /// Whether evaluating at `(x, y)` takes the rescaled branch.
    fn truncation_active(&self, _x: &[T], _y: &[T]) -> bool {
        false
    }
}

/// Polynomial growth bound `|g(x,y)|² ≤ K̄(1 + |x|^r + |y|^r)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthBound<T> {
    pub r: T,
    pub k_bar: T,
}

#[derive(Clone)]
pub struct NsddeProblem<T: Real> {
    name: String,
    dim_x: usize,
    dim_w: usize,
    delay: T,
    drift: DriftFn<T>,
    diffusion: DiffusionFn<T>,
    neutral: NeutralFn<T>,
    initial_path: InitialPathFn<T>,
    contractivity_u: T,
    lipschitz: LipschitzFn<T>,
    khasminskii_p: T,
    khasminskii_k: T,
    growth: Option<GrowthBound<T>>,
}

impl<T: Real> fmt::Debug for NsddeProblem<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NsddeProblem")
            .field("name", &self.name)
            .field("dim_x", &self.dim_x)
            .field("dim_w", &self.dim_w)
            .field("delay", &self.delay)
            .field("contractivity_u", &self.contractivity_u)
            .field("khasminskii_p", &self.khasminskii_p)
            .field("khasminskii_k", &self.khasminskii_k)
            .field("growth", &self.growth)
            .finish_non_exhaustive()
    }
}

impl<T: Real> NsddeProblem<T> {
    pub fn builder(name: impl Into<String>, dim_x: usize, dim_w: usize, delay: T) -> ProblemBuilder<T> {
        ProblemBuilder::new(name.into(), dim_x, dim_w, delay)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim_x(&self) -> usize {
        self.dim_x
    }

    pub fn dim_w(&self) -> usize {
        self.dim_w
    }

    pub fn delay(&self) -> T {
        self.delay
    }

    pub fn initial(&self, theta: T) -> Vec<T> {
        (self.initial_path)(theta)
    }

    pub fn contractivity_u(&self) -> T {
        self.contractivity_u
    }

    /// Declared local Lipschitz constant `L_R`.
    pub fn lipschitz(&self, radius: T) -> T {
        (self.lipschitz)(radius)
    }

    pub fn lipschitz_fn(&self) -> LipschitzFn<T> {
        Arc::clone(&self.lipschitz)
    }

    pub fn khasminskii_p(&self) -> T {
        self.khasminskii_p
    }

    pub fn khasminskii_k(&self) -> T {
        self.khasminskii_k
    }

    pub fn growth(&self) -> Option<GrowthBound<T>> {
        self.growth
    }

    /// Same problem with a constant initial segment `ξ ≡ x0`.
    pub fn with_constant_initial(&self, x0: &[T]) -> Result<Self> {
        if x0.len() != self.dim_x {
            return Err(Error::InvalidArgument(format!(
                "initial value has dimension {}, problem has {}",
                x0.len(),
                self.dim_x
            )));
        }
        let x0 = x0.to_vec();
        let mut out = self.clone();
        out.initial_path = Arc::new(move |_| x0.clone());
        Ok(out)
    }

    pub fn with_initial_path(&self, path: impl Fn(T) -> Vec<T> + Send + Sync + 'static) -> Self {
        let mut out = self.clone();
        out.initial_path = Arc::new(path);
        out
    }

    /// Replaces the declared Lipschitz function (used to stress the probes).
    pub fn with_lipschitz(&self, lipschitz: impl Fn(T) -> T + Send + Sync + 'static) -> Self {
        let mut out = self.clone();
        out.lipschitz = Arc::new(lipschitz);
        out
    }
}

impl<T: Real> Coefficients<T> for NsddeProblem<T> {
    fn drift(&self, x: &[T], y: &[T]) -> Vec<T> {
        (self.drift)(x, y)
    }

    fn diffusion(&self, x: &[T], y: &[T]) -> Matrix<T> {
        (self.diffusion)(x, y)
    }

    fn neutral(&self, y: &[T]) -> Vec<T> {
        (self.neutral)(y)
    }
}

pub struct ProblemBuilder<T: Real> {
    name: String,
    dim_x: usize,
    dim_w: usize,
    delay: T,
    drift: Option<DriftFn<T>>,
    diffusion: Option<DiffusionFn<T>>,
    neutral: Option<NeutralFn<T>>,
    initial_path: Option<InitialPathFn<T>>,
    contractivity_u: T,
    lipschitz: Option<LipschitzFn<T>>,
    khasminskii_p: T,
    khasminskii_k: T,
    growth: Option<GrowthBound<T>>,
}

impl<T: Real> ProblemBuilder<T> {
    fn new(name: String, dim_x: usize, dim_w: usize, delay: T) -> Self {
        Self {
            name,
            dim_x,
            dim_w,
            delay,
            drift: None,
            diffusion: None,
            neutral: None,
            initial_path: None,
            contractivity_u: T::lit(0.5),
            lipschitz: None,
            khasminskii_p: T::lit(4.0),
            khasminskii_k: T::one(),
            growth: None,
        }
    }

    pub fn drift(mut self, f: impl Fn(&[T], &[T]) -> Vec<T> + Send + Sync + 'static) -> Self {
        self.drift = Some(Arc::new(f));
        self
    }

    pub fn diffusion(mut self, g: impl Fn(&[T], &[T]) -> Matrix<T> + Send + Sync + 'static) -> Self {
        self.diffusion = Some(Arc::new(g));
        self
    }

    pub fn neutral(mut self, d: impl Fn(&[T]) -> Vec<T> + Send + Sync + 'static) -> Self {
        self.neutral = Some(Arc::new(d));
        self
    }

    pub fn initial_path(mut self, xi: impl Fn(T) -> Vec<T> + Send + Sync + 'static) -> Self {
        self.initial_path = Some(Arc::new(xi));
        self
    }

    pub fn contractivity(mut self, u: T) -> Self {
        self.contractivity_u = u;
        self
    }

    pub fn lipschitz(mut self, l: impl Fn(T) -> T + Send + Sync + 'static) -> Self {
        self.lipschitz = Some(Arc::new(l));
        self
    }

    pub fn khasminskii(mut self, p: T, k: T) -> Self {
        self.khasminskii_p = p;
        self.khasminskii_k = k;
        self
    }

    pub fn growth(mut self, r: T, k_bar: T) -> Self {
        self.growth = Some(GrowthBound { r, k_bar });
        self
    }

    /// Validates the declared invariants and assembles the problem.
    ///
    /// Missing coefficients default to zero (`D ≡ 0`, `ξ ≡ 0`); the
    /// Lipschitz function must be declared because every probe and the
    /// truncation policies depend on it.
    pub fn build(self) -> Result<NsddeProblem<T>> {
        let mut errs = Vec::new();
        if self.dim_x == 0 || self.dim_w == 0 {
            errs.push("dimensions must be positive".to_string());
        }
        if !(self.delay > T::zero() && self.delay.is_finite()) {
            errs.push(format!("delay must be positive, got {}", self.delay));
        }
        if !(self.contractivity_u > T::zero() && self.contractivity_u < T::one()) {
            errs.push(format!("contractivity u must lie in (0, 1), got {}", self.contractivity_u));
        }
        let two = T::lit(2.0);
        if !(self.khasminskii_p > two) {
            errs.push(format!("khasminskii p must exceed 2, got {}", self.khasminskii_p));
        }
        if !(self.khasminskii_k > T::zero()) {
            errs.push(format!("khasminskii K must be positive, got {}", self.khasminskii_k));
        }
        if let Some(GrowthBound { r, k_bar }) = self.growth {
            if !(r >= two && r < self.khasminskii_p) {
                errs.push(format!("growth r must satisfy 2 <= r < p, got r = {r}"));
            }
            if !(k_bar > T::zero()) {
                errs.push(format!("growth K̄ must be positive, got {k_bar}"));
            }
        }
        let lipschitz = match self.lipschitz {
            Some(l) => {
                // nondecreasing on a log-spaced sample of radii
                let radii: Vec<T> = (-12..=12).map(|e| T::lit(2f64.powi(e))).collect();
                let vals: Vec<T> = radii.iter().map(|&r| l(r)).collect();
                if vals.iter().any(|v| !(*v > T::zero())) {
                    errs.push("lipschitz_of_radius must be positive".to_string());
                } else if vals.windows(2).any(|w| w[1] < w[0]) {
                    errs.push("lipschitz_of_radius must be nondecreasing in R".to_string());
                }
                Some(l)
            }
            None => {
                errs.push("lipschitz_of_radius must be declared".to_string());
                None
            }
        };
        if !errs.is_empty() {
            return Err(Error::Config(errs));
        }

        let (d, n) = (self.dim_x, self.dim_w);
        Ok(NsddeProblem {
            name: self.name,
            dim_x: d,
            dim_w: n,
            delay: self.delay,
            drift: self.drift.unwrap_or_else(|| Arc::new(move |_, _| vec![T::zero(); d])),
            diffusion: self
                .diffusion
                .unwrap_or_else(|| Arc::new(move |_, _| Matrix::zeros(d, n))),
            neutral: self.neutral.unwrap_or_else(|| Arc::new(move |_| vec![T::zero(); d])),
            initial_path: self
                .initial_path
                .unwrap_or_else(|| Arc::new(move |_| vec![T::zero(); d])),
            contractivity_u: self.contractivity_u,
            lipschitz: lipschitz.expect("checked above"),
            khasminskii_p: self.khasminskii_p,
            khasminskii_k: self.khasminskii_k,
            growth: self.growth,
        })
    }
}

/// Names accepted by [`problem_by_name`].
pub const PROBLEM_NAMES: &[&str] = &["example1", "example2"];

/// Built-in problem registry.
pub fn problem_by_name<T: Real>(name: &str) -> Result<NsddeProblem<T>> {
    match name {
        "example1" => Ok(example1()),
        "example2" => Ok(example2()),
        _ => Err(Error::UnknownName {
            kind: "problem",
            name: name.to_string(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ProblemBuilder<f64> {
        NsddeProblem::builder("t", 1, 1, 1.0).lipschitz(|r| 1.0 + r)
    }

    #[test]
    fn rejects_bad_contractivity() {
        assert!(base().contractivity(1.0).build().is_err());
        assert!(base().contractivity(0.0).build().is_err());
        assert!(base().contractivity(0.3).build().is_ok());
    }

    #[test]
    fn rejects_growth_exponent_at_or_above_p() {
        let err = base().khasminskii(6.0, 1.0).growth(6.0, 1.0).build().unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(base().khasminskii(6.0, 1.0).growth(1.5, 1.0).build().is_err());
        assert!(base().khasminskii(6.0, 1.0).growth(2.0, 1.0).build().is_ok());
    }

    #[test]
    fn rejects_decreasing_lipschitz() {
        let err = NsddeProblem::<f64>::builder("t", 1, 1, 1.0)
            .lipschitz(|r| 1.0 / r)
            .build()
            .unwrap_err();
        assert!(err.to_string().contains("nondecreasing"));
    }

    #[test]
    fn defaults_are_zero_coefficients() {
        let p = base().build().unwrap();
        assert_eq!(p.drift(&[3.0], &[1.0]), vec![0.0]);
        assert_eq!(p.diffusion(&[3.0], &[1.0]), Matrix::zeros(1, 1));
        assert_eq!(p.neutral(&[3.0]), vec![0.0]);
    }

    #[test]
    fn registry() {
        assert_eq!(problem_by_name::<f64>("example2").unwrap().name(), "example2");
        assert!(matches!(
            problem_by_name::<f64>("example3"),
            Err(Error::UnknownName { .. })
        ));
    }
}
