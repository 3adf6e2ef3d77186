//! Dense numerical primitives shared by every reduction method.

mod eig;
mod interp;
mod matrix;
mod quad;
mod solve;

pub use eig::{pseudo_inverse, pseudo_inverse_from, sym_eig, SpectralDecomposition, DEFAULT_RANK_TOL, SYMMETRY_TOL};
pub use interp::{interp_eval, monotone_invert, Clamped, InterpKind, Interpolant, INVERT_TOL};
pub use matrix::{axpy, dot, gemm, DenseMatrix};
pub use quad::{cumulative_trapezoid, quadrature, trapezoid_weights};
pub use solve::Cholesky;

/// `n` evenly spaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    b
                } else {
                    a + (b - a) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// Weighted inner product `sum(w_k a_k b_k)`; plain dot product when `w` is `None`.
pub fn weighted_dot(w: Option<&[f64]>, a: &[f64], b: &[f64]) -> f64 {
    match w {
        None => dot(a, b),
        Some(w) => a.iter().zip(b).zip(w).map(|((x, y), z)| x * y * z).sum(),
    }
}
