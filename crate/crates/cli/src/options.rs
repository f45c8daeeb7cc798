//! Subcommand options, shared by the flag parser and the TOML file format.
//!
//! Every field is optional so that a file section and the command line can
//! be merged field by field, flags taking precedence.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

#[derive(Debug, Parser)]
#[command(name = "nsdde", version, about = "Truncated Euler-Maruyama experiments for neutral stochastic delay equations")]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(flatten)]
    pub global: GlobalOptions,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Probe the structural conditions and truncation admissibility.
    Check(CheckOptions),
    /// Simulate one path and write its trace.
    Simulate(SimulateOptions),
    /// Coupled strong-error sweep with order fits.
    Converge(SweepOptions),
    /// Moment-bound sweep across step sizes.
    Moments(SweepOptions),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Check(_) => "check",
            Self::Simulate(_) => "simulate",
            Self::Converge(_) => "converge",
            Self::Moments(_) => "moments",
        }
    }
}

macro_rules! merge_impl {
    ($ty:ident { $($field:ident),* $(,)? }) => {
        impl $ty {
            /// Fills every unset field from `fallback`.
            pub fn or(self, fallback: Self) -> Self {
                Self { $($field: self.$field.or(fallback.$field)),* }
            }
        }
    };
}

#[derive(Debug, Clone, Default, PartialEq, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlobalOptions {
    /// Master seed for every random stream.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; does not affect results.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Parent directory for run directories.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
}
merge_impl!(GlobalOptions { seed, workers, output_dir });

#[derive(Debug, Clone, Default, PartialEq, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckOptions {
    #[arg(long)]
    pub problem: Option<String>,
    #[arg(long)]
    pub policy: Option<String>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Sampling radius for the untruncated conditions.
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// Error exponent for the rate and initial-modulus checks.
    #[arg(long)]
    pub q: Option<f64>,
    /// Step sizes for the truncation checks (default: Δ*, Δ*/2, Δ*/4, Δ*/8).
    #[arg(long, value_delimiter = ',')]
    pub deltas: Option<Vec<f64>>,
    /// Values of `a` for the one-sided growth condition.
    #[arg(long, value_delimiter = ',')]
    pub a_grid: Option<Vec<f64>>,
    /// Constant of the initial-segment modulus check.
    #[arg(long)]
    pub khat: Option<f64>,
    /// Sub-grid points per step for the initial-segment check.
    #[arg(long)]
    pub subgrid: Option<usize>,
}
merge_impl!(CheckOptions { problem, policy, epsilon, radius, samples, q, deltas, a_grid, khat, subgrid });

#[derive(Debug, Clone, Default, PartialEq, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateOptions {
    #[arg(long)]
    pub problem: Option<String>,
    #[arg(long)]
    pub policy: Option<String>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// `mtem` or `em`.
    #[arg(long)]
    pub scheme: Option<String>,
    /// Steps per delay.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Constant initial segment.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub x0: Option<Vec<f64>>,
    #[arg(long)]
    pub path_index: Option<u64>,
}
merge_impl!(SimulateOptions { problem, policy, epsilon, scheme, m, horizon, x0, path_index });

#[derive(Debug, Clone, Default, PartialEq, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepOptions {
    #[arg(long)]
    pub problem: Option<String>,
    #[arg(long)]
    pub policy: Option<String>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Error exponents.
    #[arg(long, value_delimiter = ',')]
    pub q: Option<Vec<f64>>,
    /// Coarse steps per delay.
    #[arg(long, value_delimiter = ',')]
    pub m_list: Option<Vec<usize>>,
    /// Reference steps per delay.
    #[arg(long)]
    pub m_ref: Option<usize>,
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Monte Carlo paths.
    #[arg(long)]
    pub paths: Option<usize>,
    /// Moment exponent p̄.
    #[arg(long)]
    pub p_bar: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub x0: Option<Vec<f64>>,
}
merge_impl!(SweepOptions { problem, policy, epsilon, q, m_list, m_ref, horizon, paths, p_bar, x0 });

/// On-disk layout: `[global]` plus one optional section per subcommand.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub global: GlobalOptions,
    pub check: Option<CheckOptions>,
    pub simulate: Option<SimulateOptions>,
    pub converge: Option<SweepOptions>,
    pub moments: Option<SweepOptions>,
}
