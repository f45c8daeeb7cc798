//! Sampling probes for the structural conditions a problem declares.
//!
//! A probe evaluates a signed margin at many sample points; a negative
//! margin is a violation. Sample `i` draws from its own counter stream, so
//! the report is independent of evaluation order, and the worst sample is
//! selected by the lexicographic minimum of `(margin, sample index)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{distance, dot, norm, sub};
use crate::paths::stream::{CounterStream, Domain};
use crate::scalar::Real;

use super::{Coefficients, NsddeProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionId {
    LocalLipschitz,
    Contractivity,
    Khasminskii,
    GrowthG,
    InitialModulus,
    TruncLipschitz,
    TruncKhasminskii,
}

impl ConditionId {
    pub fn slug(self) -> &'static str {
        match self {
            Self::LocalLipschitz => "local_lipschitz",
            Self::Contractivity => "contractivity",
            Self::Khasminskii => "khasminskii",
            Self::GrowthG => "growth_g",
            Self::InitialModulus => "initial_modulus",
            Self::TruncLipschitz => "trunc_lipschitz",
            Self::TruncKhasminskii => "trunc_khasminskii",
        }
    }
}

/// The sample point behind a reported margin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeWitness<T> {
    pub sample_index: u64,
    pub x: Vec<T>,
    pub y: Vec<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_bar: Option<Vec<T>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y_bar: Option<Vec<T>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time: Option<T>,
}

impl<T> ProbeWitness<T> {
    pub(crate) fn pair(sample_index: u64, x: Vec<T>, y: Vec<T>) -> Self {
        Self {
            sample_index,
            x,
            y,
            x_bar: None,
            y_bar: None,
            a: None,
            time: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionProbeReport<T> {
    pub condition: ConditionId,
    pub samples_tested: usize,
    pub violations: usize,
    /// Most negative slack observed; negative means violated.
    pub worst_margin: T,
    pub witness: Option<ProbeWitness<T>>,
}

impl<T: Real> ConditionProbeReport<T> {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

pub(crate) struct SampleOutcome<T> {
    pub margin: T,
    pub witness: ProbeWitness<T>,
}

struct Partial<T> {
    tested: usize,
    violations: usize,
    worst: Option<(T, u64, usize, ProbeWitness<T>)>,
}

fn better<T: Real>(a: &(T, u64, usize, ProbeWitness<T>), b: &(T, u64, usize, ProbeWitness<T>)) -> bool {
    // lexicographic (margin, sample index, sub-index); margins are never NaN here
    (a.0, a.1, a.2) < (b.0, b.1, b.2)
}

fn combine<T: Real>(a: Partial<T>, b: Partial<T>) -> Partial<T> {
    let worst = match (a.worst, b.worst) {
        (Some(x), Some(y)) => Some(if better(&y, &x) { y } else { x }),
        (x, None) => x,
        (None, y) => y,
    };
    Partial {
        tested: a.tested + b.tested,
        violations: a.violations + b.violations,
        worst,
    }
}

/// Evaluates `eval` on sample indices `0..samples` in parallel and reduces
/// deterministically. Each sample may yield several outcomes (e.g. one per
/// grid value of an auxiliary parameter).
pub(crate) fn run_probe<T, F>(condition: ConditionId, samples: usize, seed: u64, eval: F) -> ConditionProbeReport<T>
where
    T: Real,
    F: Fn(u64, &mut CounterStream) -> Vec<SampleOutcome<T>> + Sync,
{
    let total = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut stream = CounterStream::new(seed, Domain::Probe, i);
            let mut part = Partial { tested: 0, violations: 0, worst: None };
            for (j, outcome) in eval(i, &mut stream).into_iter().enumerate() {
                let margin = if outcome.margin.is_nan() { T::neg_infinity() } else { outcome.margin };
                part.tested += 1;
                if margin < T::zero() {
                    part.violations += 1;
                }
                let cand = (margin, i, j, outcome.witness);
                if part.worst.as_ref().is_none_or(|w| better(&cand, w)) {
                    part.worst = Some(cand);
                }
            }
            part
        })
        .reduce(|| Partial { tested: 0, violations: 0, worst: None }, combine);

    let (worst_margin, witness) = match total.worst {
        Some((m, _, _, w)) => (m, Some(w)),
        None => (T::infinity(), None),
    };
    ConditionProbeReport {
        condition,
        samples_tested: total.tested,
        violations: total.violations,
        worst_margin,
        witness,
    }
}

/// Uniform draw in `[-radius, radius]^d`, pulled radially back into the
/// Euclidean ball of the same radius when it falls outside.
pub(crate) fn draw_in_ball<T: Real>(stream: &mut CounterStream, d: usize, radius: T) -> Vec<T> {
    let mut v: Vec<T> = (0..d)
        .map(|_| radius * T::lit(2.0 * stream.next_open01() - 1.0))
        .collect();
    let n = norm(&v);
    if n > radius {
        let s = radius / n;
        v.iter_mut().for_each(|c| *c = *c * s);
    }
    v
}

fn check_samples(samples: usize) -> Result<()> {
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be at least 1".into()));
    }
    Ok(())
}

fn check_radius<T: Real>(radius: T) -> Result<()> {
    if !(radius > T::zero() && radius.is_finite()) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
    }
    Ok(())
}

/// `u|x - y| - |D(x) - D(y)|`.
pub fn contractivity_margin<T: Real>(problem: &NsddeProblem<T>, x: &[T], y: &[T]) -> T {
    problem.contractivity_u() * distance(x, y) - distance(&problem.neutral(x), &problem.neutral(y))
}

/// `K(1 + |x|² + |y|²) - [2⟨x - aD(y/a), f(x,y)⟩ + (p-1)|g(x,y)|²]`.
pub fn khasminskii_margin<T: Real>(problem: &NsddeProblem<T>, x: &[T], y: &[T], a: T) -> T {
    let y_over_a: Vec<T> = y.iter().map(|&c| c / a).collect();
    let shifted: Vec<T> = x
        .iter()
        .zip(problem.neutral(&y_over_a))
        .map(|(&xi, di)| xi - a * di)
        .collect();
    let f = problem.drift(x, y);
    let g = problem.diffusion(x, y).frobenius_norm();
    let lhs = T::lit(2.0) * dot(&shifted, &f) + (problem.khasminskii_p() - T::one()) * g * g;
    let nx = norm(x);
    let ny = norm(y);
    problem.khasminskii_k() * (T::one() + nx * nx + ny * ny) - lhs
}

/// `K̄(1 + |x|^r + |y|^r) - |g(x,y)|²`.
pub fn growth_margin<T: Real>(problem: &NsddeProblem<T>, x: &[T], y: &[T]) -> Result<T> {
    let gb = problem
        .growth()
        .ok_or_else(|| Error::MissingGrowthDeclaration(problem.name().to_string()))?;
    let g = problem.diffusion(x, y).frobenius_norm();
    Ok(gb.k_bar * (T::one() + norm(x).powf(gb.r) + norm(y).powf(gb.r)) - g * g)
}

/// `L (|x - x̄| + |y - ȳ|) - max(|f(x,y) - f(x̄,ȳ)|, |g(x,y) - g(x̄,ȳ)|)` for
/// any coefficient set and constant `L`.
pub fn lipschitz_margin<T: Real, C: Coefficients<T>>(
    coeffs: &C,
    constant: T,
    x: &[T],
    y: &[T],
    x_bar: &[T],
    y_bar: &[T],
) -> T {
    let df = distance(&coeffs.drift(x, y), &coeffs.drift(x_bar, y_bar));
    let dg = coeffs.diffusion(x, y).distance(&coeffs.diffusion(x_bar, y_bar));
    constant * (distance(x, x_bar) + distance(y, y_bar)) - df.max(dg)
}

pub fn probe_contractivity<T: Real>(
    problem: &NsddeProblem<T>,
    domain_radius: T,
    samples: usize,
    rng_seed: u64,
) -> Result<ConditionProbeReport<T>> {
    check_samples(samples)?;
    check_radius(domain_radius)?;
    let d = problem.dim_x();
    Ok(run_probe(ConditionId::Contractivity, samples, rng_seed, |i, s| {
        let x = draw_in_ball(s, d, domain_radius);
        let y = draw_in_ball(s, d, domain_radius);
        let margin = contractivity_margin(problem, &x, &y);
        vec![SampleOutcome { margin, witness: ProbeWitness::pair(i, x, y) }]
    }))
}

pub fn probe_khasminskii<T: Real>(
    problem: &NsddeProblem<T>,
    domain_radius: T,
    a_grid: &[T],
    samples: usize,
    rng_seed: u64,
) -> Result<ConditionProbeReport<T>> {
    check_samples(samples)?;
    check_radius(domain_radius)?;
    if a_grid.is_empty() {
        return Err(Error::InvalidArgument("a_grid must not be empty".into()));
    }
    if let Some(a) = a_grid.iter().find(|&&a| !(a > T::zero() && a <= T::one())) {
        return Err(Error::InvalidArgument(format!("a_grid value {a} outside (0, 1]")));
    }
    let d = problem.dim_x();
    Ok(run_probe(ConditionId::Khasminskii, samples, rng_seed, |i, s| {
        let x = draw_in_ball(s, d, domain_radius);
        let y = draw_in_ball(s, d, domain_radius);
        a_grid
            .iter()
            .map(|&a| {
                let mut witness = ProbeWitness::pair(i, x.clone(), y.clone());
                witness.a = Some(a);
                SampleOutcome { margin: khasminskii_margin(problem, &x, &y, a), witness }
            })
            .collect()
    }))
}

pub fn probe_growth_g<T: Real>(
    problem: &NsddeProblem<T>,
    domain_radius: T,
    samples: usize,
    rng_seed: u64,
) -> Result<ConditionProbeReport<T>> {
    check_samples(samples)?;
    check_radius(domain_radius)?;
    // surface the missing declaration before sampling
    growth_margin(problem, &vec![T::zero(); problem.dim_x()], &vec![T::zero(); problem.dim_x()])?;
    let d = problem.dim_x();
    Ok(run_probe(ConditionId::GrowthG, samples, rng_seed, |i, s| {
        let x = draw_in_ball(s, d, domain_radius);
        let y = draw_in_ball(s, d, domain_radius);
        let margin = growth_margin(problem, &x, &y).expect("growth declared");
        vec![SampleOutcome { margin, witness: ProbeWitness::pair(i, x, y) }]
    }))
}

/// Checks `sup_k sup_{s ∈ [kΔ,(k+1)Δ]} |ξ(s) - ξ(kΔ)|^q ≤ K̂ Δ^{q/2}` on a
/// sub-grid of `subgrid + 1` points per mesh interval.
pub fn probe_initial_modulus<T: Real>(
    problem: &NsddeProblem<T>,
    delta: T,
    q: T,
    khat: T,
    subgrid: usize,
) -> Result<ConditionProbeReport<T>> {
    check_samples(subgrid)?;
    if !(delta > T::zero()) || !(khat > T::zero()) {
        return Err(Error::InvalidArgument("delta and K̂ must be positive".into()));
    }
    if !(q > T::lit(2.0) && q < problem.khasminskii_p()) {
        return Err(Error::InvalidArgument(format!("q = {q} must lie in (2, p)")));
    }
    let ratio = problem.delay() / delta;
    let m = ratio.round();
    if m < T::one() || (ratio - m).abs() > T::lit(1e-9) * ratio.max(T::one()) {
        return Err(Error::InvalidArgument(format!(
            "delay / delta = {ratio} is not a positive integer"
        )));
    }
    let m = m.to_i64().expect("finite step count");
    let bound = khat * delta.powf(q / T::lit(2.0));
    let sub_step = delta / T::from_count(subgrid);

    let mut report = ConditionProbeReport {
        condition: ConditionId::InitialModulus,
        samples_tested: 0,
        violations: 0,
        worst_margin: T::infinity(),
        witness: None,
    };
    let mut index = 0u64;
    for k in -m..0 {
        let node = T::from_i64(k).expect("small integer") * delta;
        let base = problem.initial(node);
        for j in 0..=subgrid {
            let s = node + T::from_count(j) * sub_step;
            let value = problem.initial(s);
            let margin = bound - norm(&sub(&value, &base)).powf(q);
            report.samples_tested += 1;
            if margin < T::zero() {
                report.violations += 1;
            }
            if margin < report.worst_margin {
                let mut w = ProbeWitness::pair(index, value, base.clone());
                w.time = Some(s);
                report.worst_margin = margin;
                report.witness = Some(w);
            }
            index += 1;
        }
    }
    Ok(report)
}

pub fn probe_local_lipschitz<T: Real>(
    problem: &NsddeProblem<T>,
    radius: T,
    samples: usize,
    rng_seed: u64,
) -> Result<ConditionProbeReport<T>> {
    check_samples(samples)?;
    check_radius(radius)?;
    let d = problem.dim_x();
    let constant = problem.lipschitz(radius);
    Ok(run_probe(ConditionId::LocalLipschitz, samples, rng_seed, |i, s| {
        let x = draw_in_ball(s, d, radius);
        let y = draw_in_ball(s, d, radius);
        let (x_bar, y_bar) = if s.next_open01() < 0.5 {
            (draw_in_ball(s, d, radius), draw_in_ball(s, d, radius))
        } else {
            // near-coincident pairs probe the local slope
            let eps = radius * T::lit(1e-3);
            let nudge = |v: &[T], s: &mut CounterStream| {
                let w: Vec<T> = v.iter().map(|&c| c + eps * T::lit(2.0 * s.next_open01() - 1.0)).collect();
                let n = norm(&w);
                if n > radius { w.iter().map(|&c| c * radius / n).collect() } else { w }
            };
            (nudge(&x, s), nudge(&y, s))
        };
        let margin = lipschitz_margin(problem, constant, &x, &y, &x_bar, &y_bar);
        let mut witness = ProbeWitness::pair(i, x, y);
        witness.x_bar = Some(x_bar);
        witness.y_bar = Some(y_bar);
        vec![SampleOutcome { margin, witness }]
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::model::{example1, example2};

    fn identity_neutral() -> NsddeProblem<f64> {
        NsddeProblem::builder("id", 1, 1, 1.0)
            .neutral(|y| y.to_vec())
            .contractivity(0.5)
            .lipschitz(|_| 1.0)
            .build()
            .unwrap()
    }

    #[test]
    fn contractivity_examples() {
        let r = probe_contractivity(&example1::<f64>(), 10.0, 10_000, 1).unwrap();
        assert_eq!(r.violations, 0);
        assert!(r.worst_margin >= 0.0);

        let bad = probe_contractivity(&identity_neutral(), 10.0, 1_000, 1).unwrap();
        assert!(bad.violations > 0);
        assert!(bad.worst_margin < 0.0);

        assert_eq!(contractivity_margin(&example1::<f64>(), &[0.7], &[0.7]), 0.0);
    }

    #[test]
    fn contractivity_margin_symmetric() {
        let p = example2::<f64>();
        for (a, b) in [(0.3, -2.0), (5.0, 1.0), (-1.5, -1.4)] {
            assert_eq!(contractivity_margin(&p, &[a], &[b]), contractivity_margin(&p, &[b], &[a]));
        }
    }

    #[test]
    fn khasminskii_examples() {
        let e = std::f64::consts::E;
        let m1 = khasminskii_margin(&example1::<f64>(), &[0.0], &[0.0], 1.0);
        assert!((m1 - ((7.0 + e * e) - 5.0)).abs() < 1e-12);
        let m2 = khasminskii_margin(&example2::<f64>(), &[0.0], &[0.0], 1.0);
        assert_eq!(m2, 5.5);

        let r = probe_khasminskii(&example1::<f64>(), 5.0, &[0.1, 0.5, 1.0], 10_000, 3).unwrap();
        assert_eq!(r.samples_tested, 30_000);
        assert_eq!(r.violations, 0, "{r:?}");
    }

    #[test]
    fn khasminskii_rejects_bad_a() {
        assert!(probe_khasminskii(&example1::<f64>(), 1.0, &[0.0], 10, 0).is_err());
        assert!(probe_khasminskii(&example1::<f64>(), 1.0, &[1.5], 10, 0).is_err());
    }

    #[test]
    fn growth_examples() {
        let p = example2::<f64>();
        assert_eq!(growth_margin(&p, &[0.0], &[0.0]).unwrap(), 1.0);
        // the growth bound with r = 3, K̄ = 1 holds up to |x| ≈ 2.6 only
        let small = probe_growth_g(&p, 2.5, 10_000, 4).unwrap();
        assert_eq!(small.violations, 0);
        let large = probe_growth_g(&p, 10.0, 10_000, 4).unwrap();
        assert!(large.violations > 0);

        let zero = NsddeProblem::<f64>::builder("zero", 1, 1, 1.0)
            .lipschitz(|_| 1.0)
            .khasminskii(4.0, 1.0)
            .growth(2.0, 1.0)
            .build()
            .unwrap();
        assert_eq!(probe_growth_g(&zero, 10.0, 1_000, 0).unwrap().violations, 0);

        assert!(matches!(
            probe_growth_g(&example1::<f64>(), 1.0, 10, 0),
            Err(Error::MissingGrowthDeclaration(_))
        ));
    }

    #[test]
    fn initial_modulus_examples() {
        let constant = example1::<f64>();
        let r = probe_initial_modulus(&constant, 0.25, 3.0, 1e-12, 16).unwrap();
        assert_eq!(r.violations, 0);
        assert_eq!(r.worst_margin, 1e-12 * 0.25f64.powf(1.5));

        let linear = constant.with_initial_path(|t| vec![t]);
        let ok = probe_initial_modulus(&linear, 0.25, 3.0, 1.0, 16).unwrap();
        assert_eq!(ok.violations, 0);
        assert!((ok.worst_margin - (0.125 - 1.0 / 64.0)).abs() < 1e-15);

        let bad = probe_initial_modulus(&linear, 0.25, 3.0, 1e-3, 16).unwrap();
        assert!(bad.violations > 0);

        assert!(probe_initial_modulus(&linear, 0.3, 3.0, 1.0, 16).is_err());
        assert!(probe_initial_modulus(&linear, 0.25, 7.0, 1.0, 16).is_err());
    }

    #[test]
    fn local_lipschitz_examples() {
        let p = example2::<f64>();
        let r = probe_local_lipschitz(&p, 1.0, 10_000, 9).unwrap();
        assert_eq!(r.violations, 0);

        let x = [0.4];
        let y = [-0.2];
        assert_eq!(lipschitz_margin(&p, p.lipschitz(1.0), &x, &y, &x, &y), 0.0);

        let halved = example1::<f64>();
        let halved = halved.with_lipschitz(move |r| 0.5 * crate::model::example1_lipschitz(r));
        assert!(probe_local_lipschitz(&halved, 3.0, 10_000, 9).unwrap().violations > 0);
    }

    #[test]
    fn witness_reproduces_margin() {
        let p = identity_neutral();
        let r = probe_contractivity(&p, 3.0, 500, 12).unwrap();
        let w = r.witness.unwrap();
        assert_eq!(contractivity_margin(&p, &w.x, &w.y), r.worst_margin);
    }

    #[test]
    fn deterministic_reports() {
        let p = example1::<f64>();
        let a = probe_khasminskii(&p, 5.0, &[0.01, 1.0], 2_000, 77).unwrap();
        let b = probe_khasminskii(&p, 5.0, &[0.01, 1.0], 2_000, 77).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn matrix_valued_lipschitz() {
        let p = NsddeProblem::<f64>::builder("m", 2, 2, 1.0)
            .diffusion(|x, _| Matrix::new(2, 2, vec![x[0], 0.0, 0.0, x[1]]))
            .lipschitz(|_| 1.0)
            .build()
            .unwrap();
        let r = probe_local_lipschitz(&p, 2.0, 2_000, 1).unwrap();
        assert_eq!(r.violations, 0);
    }
}
