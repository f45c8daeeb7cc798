//! Minimal dense vector and matrix helpers.
//!
//! States are plain `Vec<T>`/`&[T]`; diffusion values are small row-major
//! `d × n` matrices. Norms follow the Euclidean convention for vectors and
//! the Frobenius convention `|A| = sqrt(trace(AᵀA))` for matrices.

use crate::scalar::Real;

/// Euclidean norm.
pub fn norm<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt()
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub fn sub<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

pub fn scale<T: Real>(v: &[T], factor: T) -> Vec<T> {
    v.iter().map(|&x| x * factor).collect()
}

/// `|a - b|` without allocating.
pub fn distance<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y))
        .sqrt()
}

pub fn all_finite<T: Real>(v: &[T]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::new(rows, cols, vec![T::zero(); rows * cols])
    }

    /// 1 × 1 matrix, the diffusion shape of a scalar equation.
    pub fn scalar(v: T) -> Self {
        Self::new(1, 1, vec![v])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    pub fn frobenius_norm(&self) -> T {
        norm(&self.data)
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.cols, "matrix-vector dimension");
        self.data
            .chunks_exact(self.cols)
            .map(|row| dot(row, v))
            .collect()
    }

    /// Frobenius distance `|A - B|`.
    pub fn distance(&self, other: &Self) -> T {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        distance(&self.data, &other.data)
    }
}

/// Values that the truncation mapping can rescale.
pub trait Scale<T> {
    fn scaled(self, factor: T) -> Self;
}

impl<T: Real> Scale<T> for Vec<T> {
    fn scaled(mut self, factor: T) -> Self {
        self.iter_mut().for_each(|x| *x = *x * factor);
        self
    }
}

impl<T: Real> Scale<T> for Matrix<T> {
    fn scaled(mut self, factor: T) -> Self {
        self.data.iter_mut().for_each(|x| *x = *x * factor);
        self
    }
}

impl<T: Real> Scale<T> for T {
    fn scaled(self, factor: T) -> Self {
        self * factor
    }
}
