use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::{fit_order, SweepConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Estimator {
    #[serde(rename = "fixedT_x")]
    FixedTX,
    #[serde(rename = "fixedT_xbar")]
    FixedTXbar,
    #[serde(rename = "sup_x")]
    SupX,
    #[serde(rename = "sup_xbar")]
    SupXbar,
}

impl Estimator {
    pub const ALL: [Estimator; 4] = [Self::FixedTX, Self::FixedTXbar, Self::SupX, Self::SupXbar];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::FixedTX => "fixedT_x",
            Self::FixedTXbar => "fixedT_xbar",
            Self::SupX => "sup_x",
            Self::SupXbar => "sup_xbar",
        }
    }
}

/// One `(Δ, q, estimator)` cell. `std_error` is the Monte Carlo standard
/// error of the `q`-th moment, i.e. of `error_q^q`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRow<T> {
    pub problem: String,
    pub policy: String,
    pub epsilon: T,
    pub q: T,
    pub estimator: Estimator,
    pub m: usize,
    pub delta: T,
    pub error_q: T,
    pub std_error: T,
    pub divergent_paths: usize,
}

impl<T: Real> ErrorRow<T> {
    /// `error_q^q`.
    pub fn moment(&self) -> T {
        self.error_q.powf(self.q)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FittedOrder<T> {
    pub q: T,
    pub estimator: Estimator,
    pub slope: T,
    pub slope_se: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport<T> {
    pub rows: Vec<ErrorRow<T>>,
    pub fitted_orders: Vec<FittedOrder<T>>,
    pub run_id: String,
    pub config: Value,
    pub divergent_paths_total: usize,
}

/// First 16 hex digits of the SHA-256 of the canonical JSON encoding.
pub fn run_id(config: &Value) -> String {
    let digest = Sha256::digest(config.to_string().as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

impl<T: Real> ErrorReport<T> {
    pub(crate) fn new(config: &SweepConfig<T>, rows: Vec<ErrorRow<T>>, divergent_paths_total: usize) -> Result<Self> {
        let config = serde_json::to_value(config).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let mut fitted_orders = Vec::new();
        for &q in &config_q_list(&rows) {
            for estimator in Estimator::ALL {
                let points: Vec<(T, T)> = rows
                    .iter()
                    .filter(|r| r.q == q && r.estimator == estimator)
                    .map(|r| (r.delta, r.error_q))
                    .collect();
                if points.is_empty() {
                    continue;
                }
                match fit_order(&points) {
                    Ok((slope, slope_se)) => fitted_orders.push(FittedOrder { q, estimator, slope, slope_se }),
                    Err(e) => log::warn!("no order fit for q = {q}, {}: {e}", estimator.as_str()),
                }
            }
        }
        Ok(Self {
            rows,
            fitted_orders,
            run_id: run_id(&config),
            config,
            divergent_paths_total,
        })
    }

    pub fn fitted(&self, q: T, estimator: Estimator) -> Option<&FittedOrder<T>> {
        self.fitted_orders.iter().find(|f| f.q == q && f.estimator == estimator)
    }

    /// Rows for one `(q, estimator)`, ordered by decreasing `Δ`.
    pub fn series(&self, q: T, estimator: Estimator) -> Vec<&ErrorRow<T>> {
        let mut v: Vec<&ErrorRow<T>> = self.rows.iter().filter(|r| r.q == q && r.estimator == estimator).collect();
        v.sort_by(|a, b| b.delta.partial_cmp(&a.delta).expect("finite Δ"));
        v
    }

    /// First `(m, estimator)` whose error for a smaller `q` exceeds the error
    /// for a larger one on the same samples.
    pub fn power_mean_violation(&self) -> Option<String> {
        for a in &self.rows {
            for b in &self.rows {
                if a.m == b.m && a.estimator == b.estimator && a.q < b.q && a.error_q > b.error_q * (T::one() + T::lit(1e-12)) {
                    return Some(format!(
                        "m = {}, {}: error at q = {} is {} > {} at q = {}",
                        a.m,
                        a.estimator.as_str(),
                        a.q,
                        a.error_q,
                        b.error_q,
                        b.q
                    ));
                }
            }
        }
        None
    }

    /// Rows as CSV with the fixed column set.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("CSV is UTF-8"))
    }

    /// `{run_id, config, fitted_orders, divergent_paths_total}`.
    pub fn summary_json(&self) -> Value {
        json!({
            "run_id": self.run_id,
            "config": self.config,
            "fitted_orders": self.fitted_orders,
            "divergent_paths_total": self.divergent_paths_total,
        })
    }
}

fn config_q_list<T: Real>(rows: &[ErrorRow<T>]) -> Vec<T> {
    let mut qs: Vec<T> = Vec::new();
    for r in rows {
        if !qs.contains(&r.q) {
            qs.push(r.q);
        }
    }
    qs
}
