//! Reproducible Brownian increments on a reference mesh with exact coarsening.
//!
//! Increments are held as signed fixed-point integers (ticks of 2⁻⁴⁰).
//! Integer addition is associative, so block sums, nested block sums,
//! prefix sums and the grand total are all bit-identical however they are
//! grouped. Values are converted to the scalar type only when read.

pub mod stream;

use std::sync::OnceLock;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Real;
use stream::{CounterStream, Domain};

/// Resolution of the fixed-point increment representation.
pub const TICKS_PER_UNIT: f64 = (1u64 << 40) as f64;

const BLOCK_STEPS: usize = 1 << 14;

/// Uniform mesh of step `Δ = τ/m` on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshSpec<T> {
    delay: T,
    steps_per_delay: usize,
    horizon: T,
    total_steps: usize,
    step: T,
}

impl<T: Real> MeshSpec<T> {
    pub fn new(delay: T, steps_per_delay: usize, horizon: T) -> Result<Self> {
        if !(delay > T::zero() && delay.is_finite()) {
            return Err(Error::InvalidArgument(format!("delay must be positive, got {delay}")));
        }
        if steps_per_delay == 0 {
            return Err(Error::InvalidArgument("steps per delay must be at least 1".into()));
        }
        if !(horizon > T::zero() && horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
        }
        let step = delay / T::from_count(steps_per_delay);
        let ratio = horizon / step;
        let n = ratio.round();
        if n < T::one() || (ratio - n).abs() > T::lit(1e-9) * ratio {
            return Err(Error::InvalidArgument(format!(
                "horizon {horizon} is not an integer multiple of Δ = {step}"
            )));
        }
        Ok(Self {
            delay,
            steps_per_delay,
            horizon,
            total_steps: n.to_usize().expect("step count fits usize"),
            step,
        })
    }

    pub fn delay(&self) -> T {
        self.delay
    }

    pub fn steps_per_delay(&self) -> usize {
        self.steps_per_delay
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn total_steps(&self) -> usize {
        self.total_steps
    }

    /// `Δ`, computed once as `τ/m`.
    pub fn step(&self) -> T {
        self.step
    }

    /// `kΔ`.
    pub fn node_time(&self, k: i64) -> T {
        T::from_i64(k).expect("node index representable") * self.step
    }

    fn check_factor(&self, factor: usize) -> Result<()> {
        if factor == 0 || !self.total_steps.is_multiple_of(factor) || !self.steps_per_delay.is_multiple_of(factor) {
            return Err(Error::Divisibility {
                factor,
                total: self.total_steps,
                per_delay: self.steps_per_delay,
            });
        }
        Ok(())
    }

    /// The mesh with `factor` times fewer steps per delay.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        self.check_factor(factor)?;
        let m = self.steps_per_delay / factor;
        Ok(Self {
            delay: self.delay,
            steps_per_delay: m,
            horizon: self.horizon,
            total_steps: self.total_steps / factor,
            step: self.delay / T::from_count(m),
        })
    }
}

#[inline]
fn to_ticks(v: f64) -> i64 {
    (v * TICKS_PER_UNIT).round() as i64
}

#[inline]
pub(crate) fn from_ticks<T: Real>(t: i64) -> T {
    T::lit(t as f64 / TICKS_PER_UNIT)
}

fn draw_ticks(stream: &mut CounterStream, sd: f64) -> i64 {
    to_ticks(sd * stream.next_std_normal())
}

/// `ΔB` for one fine step and component, regenerated straight from the
/// counter stream without materialising a grid.
pub fn increment_at<T: Real>(seed: u64, path_index: u64, mesh: &MeshSpec<T>, dim_w: usize, step: usize, component: usize) -> T {
    let mut s = CounterStream::new(seed, Domain::Brownian, path_index);
    s.seek((step * dim_w + component) as u64);
    from_ticks(draw_ticks(&mut s, mesh.step().as_f64().sqrt()))
}

/// Brownian increments over every step of a mesh, `dim_w` components each.
#[derive(Debug, Clone, PartialEq)]
pub struct Increments<T> {
    mesh: MeshSpec<T>,
    dim_w: usize,
    ticks: Vec<i64>,
}

impl<T: Real> Increments<T> {
    pub fn mesh(&self) -> &MeshSpec<T> {
        &self.mesh
    }

    pub fn dim_w(&self) -> usize {
        self.dim_w
    }

    pub fn len(&self) -> usize {
        self.mesh.total_steps
    }

    pub fn is_empty(&self) -> bool {
        self.ticks.is_empty()
    }

    pub fn ticks(&self) -> &[i64] {
        &self.ticks
    }

    pub fn value(&self, step: usize, component: usize) -> T {
        from_ticks(self.ticks[step * self.dim_w + component])
    }

    /// `ΔB_k` as a vector.
    pub fn step_values(&self, step: usize) -> Vec<T> {
        self.ticks[step * self.dim_w..(step + 1) * self.dim_w]
            .iter()
            .map(|&t| from_ticks(t))
            .collect()
    }

    pub fn to_values(&self) -> Vec<T> {
        self.ticks.iter().map(|&t| from_ticks(t)).collect()
    }

    /// Block sums over `factor` consecutive steps, in ascending order.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        let mesh = self.mesh.coarsen(factor)?;
        let n = self.dim_w;
        let mut ticks = vec![0i64; mesh.total_steps * n];
        for (j, out) in ticks.chunks_mut(n).enumerate() {
            for k in j * factor..(j + 1) * factor {
                for (c, o) in out.iter_mut().enumerate() {
                    *o += self.ticks[k * n + c];
                }
            }
        }
        Ok(Self { mesh, dim_w: n, ticks })
    }
}

/// One reproducible Brownian path on a reference mesh.
#[derive(Debug)]
pub struct BrownianGrid<T> {
    seed: u64,
    path_index: u64,
    increments: Increments<T>,
    prefix: OnceLock<Vec<i64>>,
}

impl<T: Real> Clone for BrownianGrid<T> {
    fn clone(&self) -> Self {
        Self {
            seed: self.seed,
            path_index: self.path_index,
            increments: self.increments.clone(),
            prefix: self.prefix.clone(),
        }
    }
}

impl<T: Real> BrownianGrid<T> {
    /// Draws `ΔB_k^c ~ N(0, Δ)` for every step `k` and component `c`, keyed by
    /// `(seed, path_index, k·dim_w + c)`. Long paths are filled in parallel
    /// blocks; the result does not depend on the blocking.
    pub fn generate(seed: u64, path_index: u64, mesh: MeshSpec<T>, dim_w: usize) -> Result<Self> {
        if dim_w == 0 {
            return Err(Error::InvalidArgument("Brownian dimension must be at least 1".into()));
        }
        let sd = mesh.step().as_f64().sqrt();
        let mut ticks = vec![0i64; mesh.total_steps() * dim_w];
        let block = BLOCK_STEPS * dim_w;
        let fill = |(b, chunk): (usize, &mut [i64])| {
            let mut s = CounterStream::new(seed, Domain::Brownian, path_index);
            s.seek((b * block) as u64);
            chunk.iter_mut().for_each(|t| *t = draw_ticks(&mut s, sd));
        };
        if ticks.len() > block {
            ticks.par_chunks_mut(block).enumerate().for_each(fill);
        } else {
            ticks.chunks_mut(block).enumerate().for_each(fill);
        }
        Ok(Self {
            seed,
            path_index,
            increments: Increments { mesh, dim_w, ticks },
            prefix: OnceLock::new(),
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path_index(&self) -> u64 {
        self.path_index
    }

    pub fn mesh(&self) -> &MeshSpec<T> {
        &self.increments.mesh
    }

    pub fn dim_w(&self) -> usize {
        self.increments.dim_w
    }

    pub fn increments(&self) -> &Increments<T> {
        &self.increments
    }

    pub fn coarsen(&self, factor: usize) -> Result<Increments<T>> {
        self.increments.coarsen(factor)
    }

    fn prefix(&self) -> &[i64] {
        self.prefix.get_or_init(|| {
            let n = self.dim_w();
            let mut out = vec![0i64; (self.mesh().total_steps() + 1) * n];
            for k in 0..self.mesh().total_steps() {
                for c in 0..n {
                    out[(k + 1) * n + c] = out[k * n + c] + self.increments.ticks[k * n + c];
                }
            }
            out
        })
    }

    /// `B(jΔ_ref)` with `B(0) = 0`.
    pub fn brownian_value_at(&self, fine_index: usize) -> Result<Vec<T>> {
        Ok(self.brownian_ticks_at(fine_index)?.into_iter().map(from_ticks).collect())
    }

    /// `B(jΔ_ref)` in ticks.
    pub fn brownian_ticks_at(&self, fine_index: usize) -> Result<Vec<i64>> {
        let max = self.mesh().total_steps();
        if fine_index > max {
            return Err(Error::IndexOutOfRange { index: fine_index, max });
        }
        let n = self.dim_w();
        Ok(self.prefix()[fine_index * n..(fine_index + 1) * n].to_vec())
    }

    /// `B(bΔ_ref) - B(aΔ_ref)` for `a ≤ b`.
    pub fn brownian_difference(&self, a: usize, b: usize) -> Result<Vec<T>> {
        let hi = self.brownian_ticks_at(b)?;
        let lo = self.brownian_ticks_at(a)?;
        Ok(hi.iter().zip(&lo).map(|(&h, &l)| from_ticks(h - l)).collect())
    }

    /// Heap bytes held: the increments, plus the prefix cache once built.
    pub fn memory_bytes(&self) -> usize {
        let word = std::mem::size_of::<i64>();
        self.increments.ticks.capacity() * word + self.prefix.get().map_or(0, |p| p.capacity() * word)
    }
}
