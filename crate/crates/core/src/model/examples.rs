use crate::linalg::Matrix;
use crate::scalar::Real;

use super::NsddeProblem;

fn half_sin<T: Real>(y: &[T]) -> Vec<T> {
    vec![T::lit(0.5) * y[0].sin()]
}

/// `L_R = 3(1 + R + R²)e^R`.
pub fn example1_lipschitz<T: Real>(r: T) -> T {
    T::lit(3.0) * (T::one() + r + r * r) * r.exp()
}

/// `L_R = 5R⁴ + 4`.
pub fn example2_lipschitz<T: Real>(r: T) -> T {
    T::lit(5.0) * r.powi(4) + T::lit(4.0)
}

/// Scalar problem with exponential (non-polynomial) drift and diffusion:
///
/// * `f(x, y) = 2x - x e^{3x} + sin(y)/2`
/// * `g(x, y) = sqrt(x² e^{3x} / 5 + y² + 1)`
/// * `D(y) = sin(y)/2`, `τ = 1`, `ξ ≡ 1`
///
/// Declared constants: `u = 1/2`, `p = 6`, `K = 7 + e²`, no growth bound on g.
pub fn example1<T: Real>() -> NsddeProblem<T> {
    NsddeProblem::builder("example1", 1, 1, T::one())
        .drift(|x, y| {
            let x = x[0];
            vec![T::lit(2.0) * x - x * (T::lit(3.0) * x).exp() + T::lit(0.5) * y[0].sin()]
        })
        .diffusion(|x, y| {
            let (x, y) = (x[0], y[0]);
            let v = x * x * (T::lit(3.0) * x).exp() / T::lit(5.0) + y * y + T::one();
            Matrix::scalar(v.sqrt())
        })
        .neutral(half_sin)
        .initial_path(|_| vec![T::one()])
        .contractivity(T::lit(0.5))
        .lipschitz(example1_lipschitz)
        .khasminskii(T::lit(6.0), T::lit(7.0) + T::E() * T::E())
        .build()
        .expect("example1 constants are valid")
}

/// Scalar problem with polynomial drift and diffusion:
///
/// * `f(x, y) = 2x - x⁵ + sin(y)/2`
/// * `g(x, y) = x³ y / (2(1 + y²))`
/// * `D(y) = sin(y)/2`, `τ = 1`, `ξ ≡ 1`
///
/// Declared constants: `u = 1/2`, `p = 6`, `K = 11/2`, `r = 3`, `K̄ = 1`.
pub fn example2<T: Real>() -> NsddeProblem<T> {
    NsddeProblem::builder("example2", 1, 1, T::one())
        .drift(|x, y| {
            let x = x[0];
            vec![T::lit(2.0) * x - x.powi(5) + T::lit(0.5) * y[0].sin()]
        })
        .diffusion(|x, y| {
            let (x, y) = (x[0], y[0]);
            Matrix::scalar(x.powi(3) * y / (T::lit(2.0) * (T::one() + y * y)))
        })
        .neutral(half_sin)
        .initial_path(|_| vec![T::one()])
        .contractivity(T::lit(0.5))
        .lipschitz(example2_lipschitz)
        .khasminskii(T::lit(6.0), T::lit(5.5))
        .growth(T::lit(3.0), T::one())
        .build()
        .expect("example2 constants are valid")
}
