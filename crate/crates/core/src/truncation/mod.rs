//! The modified truncation mapping and its step-size policies.
//!
//! Outside the ball `|x| ∨ |y| ≤ h`, a coefficient is evaluated at the
//! radially rescaled point and scaled back up:
//!
//! ```text
//! c_h(x, y) = (s/h) · c((h/s)·x, (h/s)·y),   s = |x| ∨ |y| > h
//! ```
//!
//! Both arguments share the same factor, so the gate is the maximum of the
//! two Euclidean norms rather than the norm of the concatenated vector.

mod admissibility;
mod policy;
mod probe;

pub use admissibility::{check_admissibility, AdmissibilityRow};
pub use policy::{default_policy_name, h_example1, h_example2, policy_by_name, TruncationPolicy, POLICY_NAMES};
pub use probe::{probe_trunc_khasminskii, probe_trunc_lipschitz, trunc_khasminskii_margin};

use crate::linalg::{norm, scale, Matrix, Scale};
use crate::model::{Coefficients, NsddeProblem};
use crate::scalar::Real;

/// `|x| ∨ |y|`.
#[inline]
pub fn gate<T: Real>(x: &[T], y: &[T]) -> T {
    norm(x).max(norm(y))
}

/// Evaluates the truncated version of `coeff` at `(x, y)` for level `h_value`.
pub fn truncate<T, O, F>(coeff: F, h_value: T, x: &[T], y: &[T]) -> O
where
    T: Real,
    O: Scale<T>,
    F: Fn(&[T], &[T]) -> O,
{
    let s = gate(x, y);
    if s <= h_value {
        return coeff(x, y);
    }
    let a = h_value / s;
    coeff(&scale(x, a), &scale(y, a)).scaled(s / h_value)
}

/// `(f_Δ, g_Δ, D)` for a frozen truncation level.
#[derive(Debug, Clone, Copy)]
pub struct TruncatedCoefficients<'a, T: Real> {
    base: &'a NsddeProblem<T>,
    h_value: T,
}

impl<'a, T: Real> TruncatedCoefficients<'a, T> {
    pub fn new(base: &'a NsddeProblem<T>, h_value: T) -> Self {
        assert!(h_value > T::zero(), "truncation level must be positive");
        Self { base, h_value }
    }

    pub fn base(&self) -> &'a NsddeProblem<T> {
        self.base
    }

    pub fn h_value(&self) -> T {
        self.h_value
    }
}

impl<T: Real> Coefficients<T> for TruncatedCoefficients<'_, T> {
    fn drift(&self, x: &[T], y: &[T]) -> Vec<T> {
        truncate(|a, b| self.base.drift(a, b), self.h_value, x, y)
    }

    fn diffusion(&self, x: &[T], y: &[T]) -> Matrix<T> {
        truncate(|a, b| self.base.diffusion(a, b), self.h_value, x, y)
    }

    fn neutral(&self, y: &[T]) -> Vec<T> {
        self.base.neutral(y)
    }

    fn truncation_active(&self, x: &[T], y: &[T]) -> bool {
        gate(x, y) > self.h_value
    }
}
