use nalgebra::{DVector, SymmetricEigen};
use num_complex::Complex64;

use super::{ensure_square, hermiticity_residual, identity, max_abs_diff, ComplexMatrix};
use crate::{Error, Result};

pub const GRAM_TOLERANCE: f64 = 1e-10;

/// Orthonormal basis stored as the columns of a unitary matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct OrthonormalBasis {
    vectors: ComplexMatrix,
}

impl OrthonormalBasis {
    /// Columns of `vectors` are the basis vectors.
    pub fn new(vectors: ComplexMatrix) -> Result<Self> {
        let d = ensure_square(&vectors)?;
        let gram = vectors.adjoint() * &vectors;
        let residual = max_abs_diff(&gram, &identity(d));
        if residual > GRAM_TOLERANCE {
            return Err(Error::Validation(format!(
                "basis is not orthonormal (Gram residual {residual:.3e})"
            )));
        }
        Ok(Self { vectors })
    }

    pub fn from_vectors(vectors: &[DVector<Complex64>]) -> Result<Self> {
        let d = vectors.len();
        if d == 0 {
            return Err(Error::InvalidInput("basis needs at least one vector".into()));
        }
        if let Some(v) = vectors.iter().find(|v| v.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: v.len(),
            });
        }
        Self::new(ComplexMatrix::from_columns(vectors))
    }

    pub fn computational(dim: usize) -> Self {
        Self {
            vectors: identity(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    /// Unitary whose columns are the basis vectors.
    pub fn matrix(&self) -> &ComplexMatrix {
        &self.vectors
    }

    pub fn vector(&self, k: usize) -> DVector<Complex64> {
        self.vectors.column(k).into_owned()
    }

    pub fn projector(&self, k: usize) -> ComplexMatrix {
        let v = self.vectors.column(k);
        v * v.adjoint()
    }

    /// Matrix elements `<k|X|l>`.
    pub fn to_basis(&self, x: &ComplexMatrix) -> ComplexMatrix {
        self.vectors.adjoint() * x * &self.vectors
    }

    /// Operator whose matrix elements in this basis are `y`.
    pub fn from_basis(&self, y: &ComplexMatrix) -> ComplexMatrix {
        &self.vectors * y * self.vectors.adjoint()
    }

    /// Every vector rescaled by a phase so that its largest-magnitude
    /// component is real and positive.
    pub fn gauge_fixed(&self) -> Self {
        let mut vectors = self.vectors.clone();
        for mut col in vectors.column_iter_mut() {
            let pivot = col
                .iter()
                .copied()
                .max_by(|a, b| a.norm().total_cmp(&b.norm()))
                .expect("non-empty column");
            if pivot.norm() > 0.0 {
                let phase = pivot.conj() / pivot.norm();
                col *= phase;
            }
        }
        Self { vectors }
    }

    /// Every vector rescaled by a phase so that its overlap with the
    /// corresponding vector of `reference` is real and non-negative.
    ///
    /// Fails with [`Error::Degenerate`] when some overlap vanishes, since the
    /// phase is then undetermined.
    pub fn aligned_to(&self, reference: &OrthonormalBasis, t: f64) -> Result<Self> {
        if reference.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: reference.dim(),
                found: self.dim(),
            });
        }
        let mut vectors = self.vectors.clone();
        for (k, mut col) in vectors.column_iter_mut().enumerate() {
            let overlap = reference.vectors.column(k).dotc(&col);
            if overlap.norm() < 1e-8 {
                return Err(Error::Degenerate {
                    t,
                    reason: format!("vector {k} has vanishing overlap with the previous step"),
                });
            }
            col *= overlap.conj() / overlap.norm();
        }
        Ok(Self { vectors })
    }
}

/// Eigenbasis of a Hermitian matrix, sorted by ascending eigenvalue and gauge
/// fixed. `t` is only used to label errors.
pub fn eigenbasis(h: &ComplexMatrix, t: f64, gap_tolerance: f64) -> Result<(OrthonormalBasis, Vec<f64>)> {
    let d = ensure_square(h)?;
    let herm = hermiticity_residual(h);
    if herm > 1e-10 {
        return Err(Error::Validation(format!(
            "Hamiltonian at t = {t} is not Hermitian (residual {herm:.3e})"
        )));
    }
    let eig = SymmetricEigen::new(super::hermitian_part(h));
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    for w in values.windows(2) {
        if w[1] - w[0] < gap_tolerance {
            return Err(Error::Degenerate {
                t,
                reason: format!("eigenvalue gap {:.3e} below {gap_tolerance:.1e}", w[1] - w[0]),
            });
        }
    }
    let columns: Vec<DVector<Complex64>> = order
        .iter()
        .map(|&k| eig.eigenvectors.column(k).into_owned())
        .collect();
    let basis = OrthonormalBasis {
        vectors: ComplexMatrix::from_columns(&columns),
    }
    .gauge_fixed();
    Ok((basis, values))
}
