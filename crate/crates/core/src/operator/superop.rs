use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DVector;
use num_complex::Complex64;

use super::{ensure_square, identity, matrix_exp, max_abs_diff, unit, ComplexMatrix};
use crate::{Error, Result};

/// A linear map on `d x d` operators, stored as the `d^2 x d^2` matrix acting
/// on column-stacked vectorizations.
#[derive(Clone, Debug, PartialEq)]
pub struct SuperOperator {
    dim: usize,
    matrix: ComplexMatrix,
}

impl SuperOperator {
    pub fn from_matrix(dim: usize, matrix: ComplexMatrix) -> Result<Self> {
        if dim == 0 || matrix.nrows() != dim * dim || matrix.ncols() != dim * dim {
            return Err(Error::InvalidInput(format!(
                "superoperator on dimension {dim} needs a {0}x{0} matrix, got {1}x{2}",
                dim * dim,
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { dim, matrix })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            matrix: identity(dim * dim),
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            matrix: ComplexMatrix::zeros(dim * dim, dim * dim),
        }
    }

    /// Tabulate an arbitrary linear map by its action on the units `|i><j|`.
    pub fn from_fn(dim: usize, f: impl Fn(&ComplexMatrix) -> ComplexMatrix) -> Self {
        let n = dim * dim;
        let mut matrix = ComplexMatrix::zeros(n, n);
        for j in 0..dim {
            for i in 0..dim {
                let image = f(&unit(dim, i, j));
                matrix.set_column(i + j * dim, &vectorize(&image));
            }
        }
        Self { dim, matrix }
    }

    /// `X -> A X B`, i.e. `B^T (x) A` on column-stacked vectors.
    pub fn sandwich(a: &ComplexMatrix, b: &ComplexMatrix) -> Self {
        let dim = a.nrows();
        Self {
            dim,
            matrix: b.transpose().kronecker(a),
        }
    }

    /// `X -> -i [H, X]`.
    pub fn commutator_map(h: &ComplexMatrix) -> Self {
        let eye = identity(h.nrows());
        let minus_i = Complex64::new(0.0, -1.0);
        (Self::sandwich(h, &eye) - Self::sandwich(&eye, h)) * minus_i
    }

    /// `X -> A X A^dag - 1/2 {A^dag A, X}`.
    pub fn dissipator(a: &ComplexMatrix) -> Self {
        let eye = identity(a.nrows());
        let ada = a.adjoint() * a;
        Self::sandwich(a, &a.adjoint())
            - (Self::sandwich(&ada, &eye) + Self::sandwich(&eye, &ada)) * Complex64::new(0.5, 0.0)
    }

    /// The (non completely positive) transpose map `X -> X^T`.
    pub fn transpose_map(dim: usize) -> Self {
        Self::from_fn(dim, |x| x.transpose())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn apply(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        let d = ensure_square(x)?;
        if d != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: d,
            });
        }
        Ok(devectorize(&(&self.matrix * vectorize(x)), d))
    }

    /// `self o other`: apply `other` first.
    pub fn compose(&self, other: &SuperOperator) -> SuperOperator {
        assert_eq!(self.dim, other.dim, "composing superoperators of different dimension");
        SuperOperator {
            dim: self.dim,
            matrix: &self.matrix * &other.matrix,
        }
    }

    pub fn scale(&self, s: f64) -> SuperOperator {
        SuperOperator {
            dim: self.dim,
            matrix: self.matrix.scale(s),
        }
    }

    /// `exp(t * self)`.
    pub fn exp(&self, t: f64) -> Result<SuperOperator> {
        Ok(SuperOperator {
            dim: self.dim,
            matrix: matrix_exp(&self.matrix.scale(t))?,
        })
    }

    /// Largest entry modulus of the superoperator matrix.
    pub fn max_abs(&self) -> f64 {
        super::max_abs(&self.matrix)
    }

    pub fn max_abs_diff(&self, other: &SuperOperator) -> f64 {
        max_abs_diff(&self.matrix, &other.matrix)
    }
}

impl Add for SuperOperator {
    type Output = SuperOperator;
    fn add(self, rhs: SuperOperator) -> SuperOperator {
        &self + &rhs
    }
}

impl Add for &SuperOperator {
    type Output = SuperOperator;
    fn add(self, rhs: &SuperOperator) -> SuperOperator {
        assert_eq!(self.dim, rhs.dim, "adding superoperators of different dimension");
        SuperOperator {
            dim: self.dim,
            matrix: &self.matrix + &rhs.matrix,
        }
    }
}

impl Sub for SuperOperator {
    type Output = SuperOperator;
    fn sub(self, rhs: SuperOperator) -> SuperOperator {
        &self - &rhs
    }
}

impl Sub for &SuperOperator {
    type Output = SuperOperator;
    fn sub(self, rhs: &SuperOperator) -> SuperOperator {
        assert_eq!(self.dim, rhs.dim, "subtracting superoperators of different dimension");
        SuperOperator {
            dim: self.dim,
            matrix: &self.matrix - &rhs.matrix,
        }
    }
}

impl Neg for SuperOperator {
    type Output = SuperOperator;
    fn neg(self) -> SuperOperator {
        SuperOperator {
            dim: self.dim,
            matrix: -self.matrix,
        }
    }
}

impl Mul<Complex64> for SuperOperator {
    type Output = SuperOperator;
    fn mul(self, rhs: Complex64) -> SuperOperator {
        SuperOperator {
            dim: self.dim,
            matrix: self.matrix * rhs,
        }
    }
}

impl Mul<&SuperOperator> for &SuperOperator {
    type Output = SuperOperator;
    fn mul(self, rhs: &SuperOperator) -> SuperOperator {
        self.compose(rhs)
    }
}

/// Column-stacking vectorization.
pub fn vectorize(x: &ComplexMatrix) -> DVector<Complex64> {
    DVector::from_column_slice(x.as_slice())
}

pub fn devectorize(v: &DVector<Complex64>, dim: usize) -> ComplexMatrix {
    ComplexMatrix::from_column_slice(dim, dim, v.as_slice())
}
