use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::example1_lipschitz;
use crate::scalar::Real;

type LevelFn<T> = Arc<dyn Fn(T) -> Result<T> + Send + Sync>;

/// Step-size dependent truncation level `h(Δ)`.
#[derive(Clone)]
pub struct TruncationPolicy<T: Real> {
    label: String,
    h: LevelFn<T>,
    delta_star: T,
    epsilon: Option<T>,
}

impl<T: Real> fmt::Debug for TruncationPolicy<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TruncationPolicy")
            .field("label", &self.label)
            .field("delta_star", &self.delta_star)
            .field("epsilon", &self.epsilon)
            .finish_non_exhaustive()
    }
}

fn check_epsilon<T: Real>(epsilon: T) -> Result<()> {
    if !(epsilon > T::zero() && epsilon < T::one()) {
        return Err(Error::InvalidArgument(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    Ok(())
}

fn check_delta<T: Real>(delta: T) -> Result<()> {
    if !(delta > T::zero() && delta.is_finite()) {
        return Err(Error::InvalidArgument(format!("step size must be positive, got {delta}")));
    }
    Ok(())
}

/// Closed-form level `h(Δ) = ((Δ^{-ε} - 4)/5)^{1/4}`, defined for `Δ < 4^{-1/ε}`.
///
/// For `L_R = 5R⁴ + 4` this gives `L_{h(Δ)} = Δ^{-ε}` exactly.
pub fn h_example2<T: Real>(delta: T, epsilon: T) -> Result<T> {
    check_delta(delta)?;
    check_epsilon(epsilon)?;
    let radicand = delta.powf(-epsilon) - T::lit(4.0);
    if !(radicand > T::zero()) {
        return Err(Error::Domain {
            what: "h_example2",
            detail: format!("Δ = {delta} must be below 4^(-1/ε) for ε = {epsilon}"),
        });
    }
    Ok((radicand / T::lit(5.0)).powf(T::lit(0.25)))
}

/// Inverse of `l(x) = 1 / (x^{1-ε} L_x⁴)` with `L_x = 3(1 + x + x²)e^x`.
///
/// `l` is strictly decreasing on `(0, ∞)`, so the inverse exists for every
/// `Δ > 0`; `h(Δ) ≥ 1` exactly when `Δ ≤ l(1)`. Solved by bisection on
/// `(1-ε) ln x + 4 ln L_x + ln Δ = 0` to relative tolerance 1e-13.
pub fn h_example1<T: Real>(delta: T, epsilon: T) -> Result<T> {
    check_delta(delta)?;
    check_epsilon(epsilon)?;
    let ln_delta = delta.ln();
    let phi = |x: T| (T::one() - epsilon) * x.ln() + T::lit(4.0) * example1_lipschitz(x).ln() + ln_delta;

    const MAX_DOUBLINGS: usize = 200;
    let (mut lo, mut hi) = (T::one(), T::lit(2.0));
    if phi(lo) > T::zero() {
        let mut n = 0;
        while phi(lo) > T::zero() {
            hi = lo;
            lo = lo / T::lit(2.0);
            n += 1;
            if n > MAX_DOUBLINGS || lo <= T::min_positive_value() {
                return Err(Error::Bracket { iterations: n, detail: format!("no lower bracket for Δ = {delta}") });
            }
        }
    } else {
        let mut n = 0;
        while phi(hi) < T::zero() {
            lo = hi;
            hi = hi * T::lit(2.0);
            n += 1;
            if n > MAX_DOUBLINGS {
                return Err(Error::Bracket { iterations: n, detail: format!("no upper bracket for Δ = {delta}") });
            }
        }
    }

    let tol = T::lit(1e-13).max(T::lit(8.0) * T::epsilon());
    for _ in 0..1_000 {
        let mid = (lo + hi) / T::lit(2.0);
        if hi - lo <= tol * hi || mid == lo || mid == hi {
            return Ok(mid);
        }
        if phi(mid) < T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) / T::lit(2.0))
}

impl<T: Real> TruncationPolicy<T> {
    /// A user-supplied level with an explicit admissible range `(0, Δ*]`.
    pub fn custom(
        label: impl Into<String>,
        delta_star: T,
        h: impl Fn(T) -> Result<T> + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            h: Arc::new(h),
            delta_star,
            epsilon: None,
        }
    }

    /// Example 1 policy: `h = l^{-1}`.
    pub fn example1(epsilon: T) -> Result<Self> {
        check_epsilon(epsilon)?;
        let h = move |d| h_example1(d, epsilon);
        let delta_star = dyadic_delta_star(&h)?;
        Ok(Self {
            label: "ex1-inverse".into(),
            h: Arc::new(h),
            delta_star,
            epsilon: Some(epsilon),
        })
    }

    /// Example 2 policy: closed form `((Δ^{-ε} - 4)/5)^{1/4}`.
    pub fn example2(epsilon: T) -> Result<Self> {
        check_epsilon(epsilon)?;
        let h = move |d| h_example2(d, epsilon);
        let delta_star = dyadic_delta_star(&h)?;
        Ok(Self {
            label: "ex2-closed-form".into(),
            h: Arc::new(h),
            delta_star,
            epsilon: Some(epsilon),
        })
    }

    pub fn h(&self, delta: T) -> Result<T> {
        (self.h)(delta)
    }

    pub fn delta_star(&self) -> T {
        self.delta_star
    }

    pub fn epsilon(&self) -> Option<T> {
        self.epsilon
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_admissible(&self, delta: T) -> bool {
        delta <= self.delta_star
    }

    /// Checks on a log-spaced grid over `[delta_star · 10^{-decades}, delta_star]`
    /// that `h` is strictly decreasing, at least 1, and grows by at least
    /// `growth_factor` from the largest to the smallest grid point.
    pub fn check_invariants(&self, decades: u32, growth_factor: T) -> Result<()> {
        let points = 10 * decades as usize + 1;
        let grid: Vec<T> = (0..points)
            .map(|i| self.delta_star * T::lit(10f64.powf(-(i as f64) / 10.0)))
            .collect();
        let hs = grid.iter().map(|&d| self.h(d)).collect::<Result<Vec<T>>>()?;
        if let Some(i) = hs.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument(format!(
                "h not strictly decreasing between Δ = {} and Δ = {}",
                grid[i],
                grid[i + 1]
            )));
        }
        if let Some(i) = hs.iter().position(|&h| h < T::one()) {
            return Err(Error::InvalidArgument(format!("h({}) = {} < 1", grid[i], hs[i])));
        }
        if !(hs[points - 1] >= growth_factor * hs[0]) {
            return Err(Error::InvalidArgument(format!(
                "h grows only from {} to {} over {decades} decades",
                hs[0],
                hs[points - 1]
            )));
        }
        Ok(())
    }
}

/// Largest `Δ = 2^{-k}` at which `h` is defined and `h(Δ) ≥ 1`.
fn dyadic_delta_star<T: Real>(h: &impl Fn(T) -> Result<T>) -> Result<T> {
    for k in 0..=80 {
        let delta = T::lit(2f64.powi(-k));
        if matches!(h(delta), Ok(v) if v >= T::one()) {
            return Ok(delta);
        }
    }
    Err(Error::Domain {
        what: "delta_star",
        detail: "no dyadic step size down to 2^-80 gives h(Δ) >= 1".into(),
    })
}

pub const POLICY_NAMES: &[&str] = &["ex1-inverse", "ex2-closed-form"];

/// Policy registry; `ε` is required by both built-in constructions.
pub fn policy_by_name<T: Real>(name: &str, epsilon: T) -> Result<TruncationPolicy<T>> {
    match name {
        "ex1-inverse" => TruncationPolicy::example1(epsilon),
        "ex2-closed-form" => TruncationPolicy::example2(epsilon),
        _ => Err(Error::UnknownName {
            kind: "policy",
            name: name.to_string(),
        }),
    }
}

/// Policy paired with a built-in problem when none is named explicitly.
pub fn default_policy_name(problem: &str) -> Option<&'static str> {
    match problem {
        "example1" => Some("ex1-inverse"),
        "example2" => Some("ex2-closed-form"),
        _ => None,
    }
}
