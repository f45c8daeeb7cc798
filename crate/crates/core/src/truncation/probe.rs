use crate::error::{Error, Result};
use crate::linalg::{dot, norm, sub};
use crate::model::{lipschitz_margin, run_probe, ConditionId, ConditionProbeReport, ProbeWitness, SampleOutcome};
use crate::model::{Coefficients, NsddeProblem};
use crate::paths::stream::CounterStream;
use crate::scalar::Real;

use super::{TruncatedCoefficients, TruncationPolicy};

/// `2K(1 + |x|² + |y|²) - [2⟨x - D(y), f_Δ(x,y)⟩ + (p-1)|g_Δ(x,y)|²]`.
pub fn trunc_khasminskii_margin<T: Real>(coeffs: &TruncatedCoefficients<'_, T>, x: &[T], y: &[T]) -> T {
    let base = coeffs.base();
    let f = coeffs.drift(x, y);
    let g = coeffs.diffusion(x, y).frobenius_norm();
    let lhs = T::lit(2.0) * dot(&sub(x, &coeffs.neutral(y)), &f) + (base.khasminskii_p() - T::one()) * g * g;
    let (nx, ny) = (norm(x), norm(y));
    T::lit(2.0) * base.khasminskii_k() * (T::one() + nx * nx + ny * ny) - lhs
}

/// Half uniform in the ball of radius `h`, half log-uniform radius on
/// `[h/1000, 10h]` in a uniformly random direction.
fn draw_heavy<T: Real>(s: &mut CounterStream, d: usize, h: T) -> Vec<T> {
    if s.next_open01() < 0.5 {
        return crate::model::draw_in_ball(s, d, h);
    }
    let radius = h * T::lit(10f64.powf(4.0 * s.next_open01() - 3.0));
    let dir: Vec<T> = (0..d).map(|_| T::lit(s.next_std_normal())).collect();
    let n = norm(&dir);
    dir.into_iter().map(|c| c * radius / n).collect()
}

fn setup<T: Real>(policy: &TruncationPolicy<T>, delta: T, samples: usize) -> Result<T> {
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be at least 1".into()));
    }
    let h = policy.h(delta)?;
    if !policy.is_admissible(delta) {
        log::warn!(
            "Δ = {delta} exceeds Δ* = {} for policy {}; h(Δ) = {h}",
            policy.delta_star(),
            policy.label()
        );
    }
    Ok(h)
}

/// Probes the global Lipschitz bound `5 L_{h(Δ)}` of the truncated coefficients.
pub fn probe_trunc_lipschitz<T: Real>(
    problem: &NsddeProblem<T>,
    policy: &TruncationPolicy<T>,
    delta: T,
    samples: usize,
    rng_seed: u64,
) -> Result<ConditionProbeReport<T>> {
    let h = setup(policy, delta, samples)?;
    let coeffs = TruncatedCoefficients::new(problem, h);
    let constant = T::lit(5.0) * problem.lipschitz(h);
    let d = problem.dim_x();
    Ok(run_probe(ConditionId::TruncLipschitz, samples, rng_seed, |i, s| {
        let x = draw_heavy(s, d, h);
        let y = draw_heavy(s, d, h);
        let (x_bar, y_bar) = if s.next_open01() < 0.5 {
            (draw_heavy(s, d, h), draw_heavy(s, d, h))
        } else {
            let eps = h * T::lit(1e-3);
            let nudge = |v: &[T], s: &mut CounterStream| -> Vec<T> {
                v.iter().map(|&c| c + eps * T::lit(2.0 * s.next_open01() - 1.0)).collect()
            };
            (nudge(&x, s), nudge(&y, s))
        };
        let margin = lipschitz_margin(&coeffs, constant, &x, &y, &x_bar, &y_bar);
        let mut witness = ProbeWitness::pair(i, x, y);
        witness.x_bar = Some(x_bar);
        witness.y_bar = Some(y_bar);
        vec![SampleOutcome { margin, witness }]
    }))
}

/// Probes the one-sided bound `2K(1 + |x|² + |y|²)` of the truncated coefficients.
pub fn probe_trunc_khasminskii<T: Real>(
    problem: &NsddeProblem<T>,
    policy: &TruncationPolicy<T>,
    delta: T,
    samples: usize,
    rng_seed: u64,
) -> Result<ConditionProbeReport<T>> {
    let h = setup(policy, delta, samples)?;
    if h < T::one() {
        log::warn!("h({delta}) = {h} < 1; the bound is only guaranteed for h ≥ 1");
    }
    let coeffs = TruncatedCoefficients::new(problem, h);
    let d = problem.dim_x();
    Ok(run_probe(ConditionId::TruncKhasminskii, samples, rng_seed, |i, s| {
        let x = draw_heavy(s, d, h);
        let y = draw_heavy(s, d, h);
        let margin = trunc_khasminskii_margin(&coeffs, &x, &y);
        vec![SampleOutcome { margin, witness: ProbeWitness::pair(i, x, y) }]
    }))
}
