use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::TruncationPolicy;

/// Admissibility of one step size under a truncation policy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityRow<T> {
    pub delta: T,
    pub h: T,
    /// `L_{h(Δ)}⁴ Δ`.
    pub l4_delta: T,
    /// `(L_{h(Δ)}^{2q} Δ^{q/2})^{-1/(p-q)}`.
    pub rate_threshold: T,
    /// `h(Δ) ≥ rate_threshold`.
    pub rate_condition_holds: bool,
    /// `L⁴Δ` at this Δ is below its value at the next larger Δ of the grid.
    pub l4_delta_decreasing: bool,
}

impl<T: Real> AdmissibilityRow<T> {
    pub fn passed(&self) -> bool {
        self.rate_condition_holds && self.l4_delta_decreasing
    }
}

/// Evaluates the truncation-rate conditions on each step size in `deltas`.
///
/// The threshold is compared in log space, since `L^{2q}` overflows long
/// before the comparison itself becomes delicate. Rows are returned in the
/// order of `deltas`.
pub fn check_admissibility<T: Real>(
    policy: &TruncationPolicy<T>,
    lipschitz: impl Fn(T) -> T,
    p: T,
    q: T,
    deltas: &[T],
) -> Result<Vec<AdmissibilityRow<T>>> {
    if !(q > T::lit(2.0) && q < p) {
        return Err(Error::InvalidArgument(format!("need 2 < q < p, got q = {q}, p = {p}")));
    }
    if deltas.is_empty() {
        return Err(Error::InvalidArgument("delta grid must not be empty".into()));
    }
    if let Some(d) = deltas
        .iter()
        .find(|&&d| !(d > T::zero()) || d > policy.delta_star())
    {
        return Err(Error::InvalidArgument(format!(
            "Δ = {d} outside (0, Δ* = {}]",
            policy.delta_star()
        )));
    }

    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let h = policy.h(delta)?;
        let ln_l = lipschitz(h).ln();
        let ln_delta = delta.ln();
        let ln_l4_delta = T::lit(4.0) * ln_l + ln_delta;
        let ln_threshold = -(T::lit(2.0) * q * ln_l + q / T::lit(2.0) * ln_delta) / (p - q);
        rows.push(AdmissibilityRow {
            delta,
            h,
            l4_delta: ln_l4_delta.exp(),
            rate_threshold: ln_threshold.exp(),
            rate_condition_holds: h.ln() >= ln_threshold,
            l4_delta_decreasing: true,
        });
    }

    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| rows[b].delta.partial_cmp(&rows[a].delta).expect("finite deltas"));
    for w in order.windows(2) {
        let (larger, smaller) = (w[0], w[1]);
        rows[smaller].l4_delta_decreasing = rows[smaller].l4_delta < rows[larger].l4_delta;
    }
    Ok(rows)
}
