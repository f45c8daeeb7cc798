//! The explicit neutral Euler recursion, truncated or plain, and its two
//! continuous-time extensions evaluated on a finer nested mesh.
//!
//! ```text
//! X_{k+1} = D(X_{k+1-m}) + X_k - D(X_{k-m}) + f_Δ(X_k, X_{k-m})Δ + g_Δ(X_k, X_{k-m})ΔB_k
//! ```
//!
//! with `X_k = ξ(kΔ)` for `-m ≤ k ≤ 0`.

mod trace;

pub use trace::write_trace;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::all_finite;
use crate::model::{Coefficients, NsddeProblem};
use crate::paths::{from_ticks, BrownianGrid, Increments, MeshSpec};
use crate::scalar::Real;
use crate::truncation::{TruncatedCoefficients, TruncationPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    Mtem,
    Em,
}

impl SchemeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Mtem => "mtem",
            Self::Em => "em",
        }
    }
}

/// One step of the recursion.
pub fn mtem_step<T: Real, C: Coefficients<T> + ?Sized>(
    coeffs: &C,
    x_k: &[T],
    x_k_m: &[T],
    x_k1_m: &[T],
    delta: T,
    db: &[T],
) -> Vec<T> {
    let d_next = coeffs.neutral(x_k1_m);
    let d_prev = coeffs.neutral(x_k_m);
    let f = coeffs.drift(x_k, x_k_m);
    let noise = coeffs.diffusion(x_k, x_k_m).mul_vec(db);
    (0..x_k.len())
        .map(|i| d_next[i] + x_k[i] - d_prev[i] + f[i] * delta + noise[i])
        .collect()
}

/// A simulated path on a coarse mesh, initial segment included.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSolution<T> {
    scheme: SchemeKind,
    mesh: MeshSpec<T>,
    dim: usize,
    /// `X_{-m}, …, X_N`, row-major.
    states: Vec<T>,
    h_value: Option<T>,
    admissible: bool,
    /// `flags[k]`: the outside-ball branch fired on the step `k → k+1`.
    flags: Vec<bool>,
}

impl<T: Real> PathSolution<T> {
    pub fn scheme(&self) -> SchemeKind {
        self.scheme
    }

    pub fn mesh(&self) -> &MeshSpec<T> {
        &self.mesh
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `None` for the untruncated baseline.
    pub fn h_value(&self) -> Option<T> {
        self.h_value
    }

    /// False when the run used a step size above the policy's `Δ*`.
    pub fn admissible(&self) -> bool {
        self.admissible
    }

    pub fn truncation_activations(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    pub fn truncation_flags(&self) -> &[bool] {
        &self.flags
    }

    /// `X_k` for `-m ≤ k ≤ N`.
    pub fn state(&self, k: i64) -> &[T] {
        let m = self.mesh.steps_per_delay() as i64;
        let n = self.mesh.total_steps() as i64;
        assert!((-m..=n).contains(&k), "state index {k} outside {}..={n}", -m);
        let i = (k + m) as usize;
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn final_state(&self) -> &[T] {
        self.state(self.mesh.total_steps() as i64)
    }

    /// All states from `X_{-m}` to `X_N`, row-major.
    pub fn states(&self) -> &[T] {
        &self.states
    }
}

fn check_conformance<T: Real>(problem: &NsddeProblem<T>, increments: &Increments<T>) -> Result<()> {
    let mesh = increments.mesh();
    if mesh.delay() != problem.delay() {
        return Err(Error::InvalidArgument(format!(
            "mesh delay {} differs from problem delay {}",
            mesh.delay(),
            problem.delay()
        )));
    }
    if increments.dim_w() != problem.dim_w() {
        return Err(Error::InvalidArgument(format!(
            "increments have {} components, problem needs {}",
            increments.dim_w(),
            problem.dim_w()
        )));
    }
    Ok(())
}

fn run<T: Real, C: Coefficients<T>>(
    coeffs: &C,
    problem: &NsddeProblem<T>,
    increments: &Increments<T>,
    scheme: SchemeKind,
    h_value: Option<T>,
    admissible: bool,
) -> Result<PathSolution<T>> {
    check_conformance(problem, increments)?;
    let mesh = *increments.mesh();
    let m = mesh.steps_per_delay();
    let n = mesh.total_steps();
    let d = problem.dim_x();
    let delta = mesh.step();

    let mut states = Vec::with_capacity((m + n + 1) * d);
    for k in -(m as i64)..=0 {
        let xi = problem.initial(mesh.node_time(k));
        if xi.len() != d || !all_finite(&xi) {
            return Err(Error::InvalidArgument(format!("initial path invalid at θ = {}", mesh.node_time(k))));
        }
        states.extend(xi);
    }
    let mut flags = Vec::with_capacity(n);

    for k in 0..n {
        // index of X_k in the offset storage is k + m
        let at = |j: usize| j * d..(j + 1) * d;
        let (x_k, x_k_m, x_k1_m) = (at(k + m), at(k), at(k + 1));
        let next = {
            let (x_k, x_k_m, x_k1_m) = (&states[x_k], &states[x_k_m], &states[x_k1_m]);
            flags.push(coeffs.truncation_active(x_k, x_k_m));
            mtem_step(coeffs, x_k, x_k_m, x_k1_m, delta, &increments.step_values(k))
        };
        if !all_finite(&next) {
            return Err(Error::NonFiniteStep { step: k + 1 });
        }
        states.extend(next);
    }

    Ok(PathSolution {
        scheme,
        mesh,
        dim: d,
        states,
        h_value,
        admissible,
        flags,
    })
}

/// Truncated scheme with `h = policy.h(Δ)`.
///
/// Step sizes above `Δ*` are allowed as long as `h(Δ)` is defined; the
/// solution is then marked inadmissible.
pub fn simulate_mtem<T: Real>(
    problem: &NsddeProblem<T>,
    policy: &TruncationPolicy<T>,
    increments: &Increments<T>,
) -> Result<PathSolution<T>> {
    let delta = increments.mesh().step();
    let h = policy.h(delta)?;
    let admissible = policy.is_admissible(delta);
    if !admissible {
        log::debug!("Δ = {delta} above Δ* = {} for {}", policy.delta_star(), policy.label());
    }
    let coeffs = TruncatedCoefficients::new(problem, h);
    run(&coeffs, problem, increments, SchemeKind::Mtem, Some(h), admissible)
}

/// Truncated scheme at an explicit level `h`.
pub fn simulate_with_level<T: Real>(
    problem: &NsddeProblem<T>,
    h_value: T,
    increments: &Increments<T>,
) -> Result<PathSolution<T>> {
    if !(h_value > T::zero()) {
        return Err(Error::InvalidArgument(format!("truncation level must be positive, got {h_value}")));
    }
    let coeffs = TruncatedCoefficients::new(problem, h_value);
    run(&coeffs, problem, increments, SchemeKind::Mtem, Some(h_value), true)
}

/// Plain Euler-Maruyama baseline.
pub fn simulate_em<T: Real>(problem: &NsddeProblem<T>, increments: &Increments<T>) -> Result<PathSolution<T>> {
    run(problem, problem, increments, SchemeKind::Em, None, true)
}

fn check_fine(solution: &PathSolution<impl Real>, fine_index: usize, mesh_ratio: usize) -> Result<()> {
    if mesh_ratio == 0 {
        return Err(Error::InvalidArgument("mesh ratio must be at least 1".into()));
    }
    let max = solution.mesh.total_steps() * mesh_ratio;
    if fine_index > max {
        return Err(Error::IndexOutOfRange { index: fine_index, max });
    }
    Ok(())
}

/// Piecewise-constant extension `x̄_Δ` at fine node `j`: `X_{⌊j/ratio⌋}`.
pub fn eval_piecewise<T: Real>(solution: &PathSolution<T>, fine_index: usize, mesh_ratio: usize) -> Result<Vec<T>> {
    check_fine(solution, fine_index, mesh_ratio)?;
    Ok(solution.state((fine_index / mesh_ratio) as i64).to_vec())
}

enum PathCoefficients<'a, T: Real> {
    Truncated(TruncatedCoefficients<'a, T>),
    Plain(&'a NsddeProblem<T>),
}

impl<T: Real> Coefficients<T> for PathCoefficients<'_, T> {
    fn drift(&self, x: &[T], y: &[T]) -> Vec<T> {
        match self {
            Self::Truncated(c) => c.drift(x, y),
            Self::Plain(p) => p.drift(x, y),
        }
    }

    fn diffusion(&self, x: &[T], y: &[T]) -> crate::linalg::Matrix<T> {
        match self {
            Self::Truncated(c) => c.diffusion(x, y),
            Self::Plain(p) => p.diffusion(x, y),
        }
    }

    fn neutral(&self, y: &[T]) -> Vec<T> {
        match self {
            Self::Truncated(c) => c.neutral(y),
            Self::Plain(p) => p.neutral(y),
        }
    }
}

/// The coefficients a solution was computed with.
fn coefficients_for<'a, T: Real>(solution: &PathSolution<T>, problem: &'a NsddeProblem<T>) -> PathCoefficients<'a, T> {
    match solution.h_value {
        Some(h) => PathCoefficients::Truncated(TruncatedCoefficients::new(problem, h)),
        None => PathCoefficients::Plain(problem),
    }
}

fn check_grid<T: Real>(solution: &PathSolution<T>, grid: &BrownianGrid<T>) -> Result<usize> {
    let coarse = solution.mesh();
    let fine = grid.mesh();
    let m = coarse.steps_per_delay();
    if fine.delay() != coarse.delay() || !fine.steps_per_delay().is_multiple_of(m) {
        return Err(Error::InvalidArgument(format!(
            "fine mesh with {} steps per delay does not nest {m}",
            fine.steps_per_delay()
        )));
    }
    let ratio = fine.steps_per_delay() / m;
    if fine.total_steps() != coarse.total_steps() * ratio {
        return Err(Error::InvalidArgument("fine and coarse horizons differ".into()));
    }
    Ok(ratio)
}

/// Continuous interpolant `x_Δ` at fine node `j`, with `kΔ ≤ jΔ_fine < (k+1)Δ`:
///
/// ```text
/// x_Δ(t) = X_k + f_Δ(X_k, X_{k-m})(t - kΔ) + g_Δ(X_k, X_{k-m})(B(t) - B(kΔ))
/// ```
///
/// Since `m` divides the shift, `x̄_Δ(t - τ) = X_{k-m}` on the whole step
/// and the two neutral terms cancel. At coarse nodes the state is returned
/// unchanged.
pub fn eval_interpolant<T: Real>(
    solution: &PathSolution<T>,
    problem: &NsddeProblem<T>,
    fine_index: usize,
    grid: &BrownianGrid<T>,
) -> Result<Vec<T>> {
    let ratio = check_grid(solution, grid)?;
    check_fine(solution, fine_index, ratio)?;
    let (k, r) = (fine_index / ratio, fine_index % ratio);
    let x_k = solution.state(k as i64);
    if r == 0 {
        return Ok(x_k.to_vec());
    }
    let coeffs = coefficients_for(solution, problem);
    let x_k_m = solution.state(k as i64 - solution.mesh.steps_per_delay() as i64);
    let f = coeffs.drift(x_k, x_k_m);
    let noise = coeffs
        .diffusion(x_k, x_k_m)
        .mul_vec(&grid.brownian_difference(k * ratio, fine_index)?);
    let elapsed = T::from_count(r) * grid.mesh().step();
    Ok((0..x_k.len()).map(|i| x_k[i] + f[i] * elapsed + noise[i]).collect())
}

/// `x̄_Δ` at every fine node `0..=N·ratio`, row-major.
pub fn piecewise_path<T: Real>(solution: &PathSolution<T>, mesh_ratio: usize) -> Result<Vec<T>> {
    check_fine(solution, 0, mesh_ratio)?;
    let total = solution.mesh.total_steps() * mesh_ratio;
    let mut out = Vec::with_capacity((total + 1) * solution.dim);
    for j in 0..=total {
        out.extend_from_slice(solution.state((j / mesh_ratio) as i64));
    }
    Ok(out)
}

/// `x_Δ` at every fine node `0..=N·ratio`, row-major. Coefficients are
/// evaluated once per coarse step.
pub fn interpolant_path<T: Real>(
    solution: &PathSolution<T>,
    problem: &NsddeProblem<T>,
    grid: &BrownianGrid<T>,
) -> Result<Vec<T>> {
    let ratio = check_grid(solution, grid)?;
    let coeffs = coefficients_for(solution, problem);
    let n = solution.mesh.total_steps();
    let m = solution.mesh.steps_per_delay() as i64;
    let d = solution.dim;
    let fine_step = grid.mesh().step();
    let mut out = Vec::with_capacity((n * ratio + 1) * d);
    for k in 0..n {
        let x_k = solution.state(k as i64);
        out.extend_from_slice(x_k);
        if ratio == 1 {
            continue;
        }
        let x_k_m = solution.state(k as i64 - m);
        let f = coeffs.drift(x_k, x_k_m);
        let g = coeffs.diffusion(x_k, x_k_m);
        let base = grid.brownian_ticks_at(k * ratio)?;
        for r in 1..ratio {
            let b = grid.brownian_ticks_at(k * ratio + r)?;
            let db: Vec<T> = b
                .iter()
                .zip(&base)
                .map(|(&hi, &lo)| from_ticks(hi - lo))
                .collect();
            let noise = g.mul_vec(&db);
            let elapsed = T::from_count(r) * fine_step;
            out.extend((0..d).map(|i| x_k[i] + f[i] * elapsed + noise[i]));
        }
    }
    out.extend_from_slice(solution.final_state());
    Ok(out)
}
