use crate::error::{Error, Result};
use crate::scalar::Real;

/// Compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum<T> {
    sum: T,
    carry: T,
}

impl<T: Real> KahanSum<T> {
    pub fn new() -> Self {
        Self { sum: T::zero(), carry: T::zero() }
    }

    pub fn add(&mut self, v: T) {
        let y = v - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn total(&self) -> T {
        self.sum
    }
}

/// Sums in slice order with compensation.
pub fn kahan_sum<T: Real>(values: impl IntoIterator<Item = T>) -> T {
    let mut k = KahanSum::new();
    values.into_iter().for_each(|v| k.add(v));
    k.total()
}

/// Sample mean and standard error of the mean, both reduced in input order.
pub fn mean_and_std_error<T: Real>(values: &[T]) -> (T, T) {
    let n = values.len();
    if n == 0 {
        return (T::nan(), T::nan());
    }
    let mean = kahan_sum(values.iter().copied()) / T::from_count(n);
    if n == 1 {
        return (mean, T::zero());
    }
    let ss = kahan_sum(values.iter().map(|&v| (v - mean) * (v - mean)));
    let var = ss / T::from_count(n - 1);
    (mean, (var / T::from_count(n)).sqrt())
}

/// Least-squares slope of `ln error` against `ln Δ`, with its standard error.
///
/// Points with non-positive error are dropped with a warning; at least three
/// distinct step sizes must remain.
pub fn fit_order<T: Real>(points: &[(T, T)]) -> Result<(T, T)> {
    let usable: Vec<(T, T)> = points
        .iter()
        .filter(|(d, e)| {
            let keep = *e > T::zero() && e.is_finite() && *d > T::zero();
            if !keep {
                log::warn!("order fit skips Δ = {d} with error {e}");
            }
            keep
        })
        .map(|&(d, e)| (d.ln(), e.ln()))
        .collect();
    let mut distinct: Vec<T> = usable.iter().map(|p| p.0).collect();
    distinct.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::InsufficientPoints(distinct.len()));
    }

    let n = T::from_count(usable.len());
    let mx = kahan_sum(usable.iter().map(|p| p.0)) / n;
    let my = kahan_sum(usable.iter().map(|p| p.1)) / n;
    let sxx = kahan_sum(usable.iter().map(|p| (p.0 - mx) * (p.0 - mx)));
    let sxy = kahan_sum(usable.iter().map(|p| (p.0 - mx) * (p.1 - my)));
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr = kahan_sum(usable.iter().map(|p| {
        let r = p.1 - intercept - slope * p.0;
        r * r
    }));
    let dof = T::from_count(usable.len() - 2);
    Ok((slope, (ssr / dof / sxx).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_beats_naive() {
        let values: Vec<f64> = std::iter::once(1.0).chain(std::iter::repeat_n(1e-16, 10_000)).collect();
        let naive: f64 = values.iter().sum();
        let comp = kahan_sum(values.iter().copied());
        assert_eq!(naive, 1.0);
        assert!((comp - (1.0 + 1e-12)).abs() < 1e-15);
    }

    #[test]
    fn mean_and_se() {
        let (m, se) = mean_and_std_error(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        // var = 5/3
        assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn exact_power_laws() {
        let deltas: [f64; 4] = [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
        let half: Vec<(f64, f64)> = deltas.iter().map(|&d| (d, d.sqrt())).collect();
        let (s, se) = fit_order(&half).unwrap();
        assert!((s - 0.5).abs() < 1e-14);
        assert!(se < 1e-12);
        let linear: Vec<(f64, f64)> = deltas.iter().map(|&d| (d, 7.3 * d)).collect();
        assert!((fit_order(&linear).unwrap().0 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn too_few_points() {
        let pts = [(0.1, 0.2), (0.05, 0.1), (0.025, 0.0)];
        assert!(matches!(fit_order(&pts), Err(Error::InsufficientPoints(2))));
    }
}
