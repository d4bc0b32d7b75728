use nalgebra::SymmetricEigen;

use super::{hermitian_part, unit, ComplexMatrix, SuperOperator};

/// Choi matrix `C = sum_ij |i><j| (x) S[|i><j|]`.
///
/// Row index `i*d + a`, column index `j*d + b` holds `<a| S[|i><j|] |b>`.
/// `S` is completely positive iff `C` is positive semidefinite and trace
/// preserving iff the partial trace over the output factor is the identity.
pub fn choi_matrix(s: &SuperOperator) -> ComplexMatrix {
    let d = s.dim();
    let mut choi = ComplexMatrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            let image = s
                .apply(&unit(d, i, j))
                .expect("unit operator has the superoperator's dimension");
            for a in 0..d {
                for b in 0..d {
                    choi[(i * d + a, j * d + b)] = image[(a, b)];
                }
            }
        }
    }
    choi
}

/// Trace over the output factor of a Choi matrix on `d^2` dimensions.
pub fn choi_partial_trace(choi: &ComplexMatrix, d: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(d, d, |i, j| (0..d).map(|a| choi[(i * d + a, j * d + a)]).sum())
}

/// Smallest eigenvalue of the Hermitian part of `m`.
pub fn min_hermitian_eigenvalue(m: &ComplexMatrix) -> f64 {
    SymmetricEigen::new(hermitian_part(m))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}
