//! Dense complex linear algebra shared by every other module.
//!
//! Operators are `nalgebra` dense matrices over `Complex64`. Superoperators act
//! on column-stacked vectorizations: `vec(X)[i + j*d] = X[i, j]`, which is the
//! native storage order of `DMatrix`.

mod basis;
mod choi;
mod expm;
mod norm;
mod state;
mod superop;

pub use basis::{eigenbasis, OrthonormalBasis};
pub use choi::{choi_matrix, choi_partial_trace, min_hermitian_eigenvalue};
pub use expm::{matrix_exp, matrix_sqrt, principal_log};
#[cfg(test)]
pub(crate) use expm::gauss_legendre;
pub use norm::{
    induced_trace_norm, induced_trace_norm_with, trace_norm, NormEstimate, DEFAULT_NORM_SAMPLES, DEFAULT_NORM_SEED,
};
pub use state::{DensityOperator, StateTolerances};
pub use superop::{devectorize, vectorize, SuperOperator};

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type ComplexMatrix = DMatrix<Complex64>;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn r(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn identity(d: usize) -> ComplexMatrix {
    ComplexMatrix::identity(d, d)
}

pub fn zeros(d: usize) -> ComplexMatrix {
    ComplexMatrix::zeros(d, d)
}

/// Build a square matrix from row-major entries.
pub fn from_rows(rows: &[&[Complex64]]) -> ComplexMatrix {
    let n = rows.len();
    ComplexMatrix::from_fn(n, n, |i, j| rows[i][j])
}

pub fn sigma_x() -> ComplexMatrix {
    from_rows(&[&[r(0.0), r(1.0)], &[r(1.0), r(0.0)]])
}

pub fn sigma_y() -> ComplexMatrix {
    from_rows(&[&[r(0.0), c(0.0, -1.0)], &[c(0.0, 1.0), r(0.0)]])
}

pub fn sigma_z() -> ComplexMatrix {
    from_rows(&[&[r(1.0), r(0.0)], &[r(0.0), r(-1.0)]])
}

/// `|0><1|`, which maps `|1>` to `|0>`.
pub fn sigma_minus() -> ComplexMatrix {
    from_rows(&[&[r(0.0), r(1.0)], &[r(0.0), r(0.0)]])
}

/// `|i><j|` in dimension `d`.
pub fn unit(d: usize, i: usize, j: usize) -> ComplexMatrix {
    let mut m = zeros(d);
    m[(i, j)] = r(1.0);
    m
}

pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b - b * a
}

pub fn anticommutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b + b * a
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

pub fn trace(a: &ComplexMatrix) -> Complex64 {
    a.diagonal().sum()
}

/// Largest entry modulus.
pub fn max_abs(a: &ComplexMatrix) -> f64 {
    a.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch in max_abs_diff");
    a.iter()
        .zip(b.iter())
        .fold(0.0, |acc, (x, y)| acc.max((x - y).norm()))
}

pub fn hermiticity_residual(a: &ComplexMatrix) -> f64 {
    max_abs_diff(a, &a.adjoint())
}

pub fn is_finite(a: &ComplexMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn hermitian_part(a: &ComplexMatrix) -> ComplexMatrix {
    (a + a.adjoint()).scale(0.5)
}

/// Maximum absolute column sum.
pub fn norm_1(a: &ComplexMatrix) -> f64 {
    a.column_iter()
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub(crate) fn ensure_square(a: &ComplexMatrix) -> crate::Result<usize> {
    let (n, m) = a.shape();
    if n != m || n == 0 {
        return Err(crate::Error::InvalidInput(format!(
            "expected a non-empty square matrix, got {n}x{m}"
        )));
    }
    Ok(n)
}
