use nalgebra::DVector;
use serde::Serialize;

use super::{
    ensure_square, hermiticity_residual, min_hermitian_eigenvalue, trace, ComplexMatrix,
    OrthonormalBasis,
};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StateTolerances {
    pub hermitian: f64,
    pub trace: f64,
    /// Smallest admissible eigenvalue is `-psd`.
    pub psd: f64,
}

impl Default for StateTolerances {
    fn default() -> Self {
        Self {
            hermitian: 1e-12,
            trace: 1e-12,
            psd: 1e-10,
        }
    }
}

/// Hermitian, positive semidefinite, unit-trace matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    matrix: ComplexMatrix,
}

impl DensityOperator {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        Self::with_tolerances(matrix, StateTolerances::default())
    }

    pub fn with_tolerances(matrix: ComplexMatrix, tol: StateTolerances) -> Result<Self> {
        ensure_square(&matrix)?;
        let herm = hermiticity_residual(&matrix);
        if herm > tol.hermitian {
            return Err(Error::Validation(format!(
                "density operator is not Hermitian (residual {herm:.3e})"
            )));
        }
        let tr = trace(&matrix);
        if (tr.re - 1.0).abs() > tol.trace || tr.im.abs() > tol.trace {
            return Err(Error::Validation(format!(
                "density operator trace is {tr}, expected 1"
            )));
        }
        let min_eig = min_hermitian_eigenvalue(&matrix);
        if min_eig < -tol.psd {
            return Err(Error::Validation(format!(
                "density operator has negative eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(Self { matrix })
    }

    /// `|psi><psi|` for a (not necessarily normalized) vector.
    pub fn pure(psi: &DVector<num_complex::Complex64>) -> Result<Self> {
        let n = psi.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::InvalidInput("pure state from a zero vector".into()));
        }
        let v = psi.unscale(n);
        Self::new(&v * v.adjoint())
    }

    /// `|k><k|` in the computational basis.
    pub fn basis_state(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(Error::InvalidInput(format!("basis index {k} out of range for dimension {dim}")));
        }
        Ok(Self {
            matrix: super::unit(dim, k, k),
        })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: super::identity(dim).unscale(dim as f64),
        }
    }

    /// Diagonal state with the given populations in `basis`.
    pub fn diagonal_in(basis: &OrthonormalBasis, populations: &[f64]) -> Result<Self> {
        if populations.len() != basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: basis.dim(),
                found: populations.len(),
            });
        }
        let diag = DVector::from_iterator(
            populations.len(),
            populations.iter().map(|&p| num_complex::Complex64::new(p, 0.0)),
        );
        let u = basis.matrix();
        Self::new(u * ComplexMatrix::from_diagonal(&diag) * u.adjoint())
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn purity(&self) -> f64 {
        trace(&(&self.matrix * &self.matrix)).re
    }

    /// Diagonal entries in the computational basis.
    pub fn populations(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().map(|z| z.re).collect()
    }

    /// `<k|rho|k>` for every vector of `basis`.
    pub fn populations_in(&self, basis: &OrthonormalBasis) -> Vec<f64> {
        let rotated = basis.to_basis(&self.matrix);
        rotated.diagonal().iter().map(|z| z.re).collect()
    }

    /// Frobenius norm of the off-diagonal part in `basis`.
    pub fn offdiag_norm_in(&self, basis: &OrthonormalBasis) -> f64 {
        let rotated = basis.to_basis(&self.matrix);
        let mut s = 0.0;
        for j in 0..rotated.ncols() {
            for i in 0..rotated.nrows() {
                if i != j {
                    s += rotated[(i, j)].norm_sqr();
                }
            }
        }
        s.sqrt()
    }
}
