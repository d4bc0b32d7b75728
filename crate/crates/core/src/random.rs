//! Seeded random instances for tests, sweeps and the invariant battery.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::operator::{ComplexMatrix, DensityOperator, OrthonormalBasis};

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian(rng: &mut impl Rng) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn random_matrix(rng: &mut impl Rng, d: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(d, d, |_, _| gaussian(rng))
}

pub fn random_hermitian(rng: &mut impl Rng, d: usize) -> ComplexMatrix {
    let g = random_matrix(rng, d);
    (&g + g.adjoint()).scale(0.5)
}

/// Haar-distributed unitary (QR of a Gaussian matrix with the R-diagonal
/// phases divided out).
pub fn random_unitary(rng: &mut impl Rng, d: usize) -> ComplexMatrix {
    let qr = random_matrix(rng, d).qr();
    let (mut q, r) = qr.unpack();
    for (k, mut col) in q.column_iter_mut().enumerate() {
        let rkk = r[(k, k)];
        if rkk.norm() > 0.0 {
            col *= rkk / rkk.norm();
        }
    }
    q
}

pub fn random_basis(rng: &mut impl Rng, d: usize) -> OrthonormalBasis {
    OrthonormalBasis::new(random_unitary(rng, d)).expect("QR factor is unitary")
}

pub fn random_unit_vector(rng: &mut impl Rng, d: usize) -> DVector<Complex64> {
    let v = DVector::from_fn(d, |_, _| gaussian(rng));
    let n = v.norm();
    v.unscale(n)
}

/// Mixed state `G G^dag / tr(G G^dag)`.
pub fn random_density(rng: &mut impl Rng, d: usize) -> DensityOperator {
    let g = random_matrix(rng, d);
    let m = &g * g.adjoint();
    let tr = crate::operator::trace(&m).re;
    let m = crate::operator::hermitian_part(&m.unscale(tr));
    DensityOperator::new(m).expect("Wishart matrix is a valid state")
}

/// Hermitian matrix whose off-diagonal moduli lie in `[lo, hi]`, so every pair
/// of basis states is directly coupled.
pub fn random_connected_hermitian(rng: &mut impl Rng, d: usize, lo: f64, hi: f64) -> ComplexMatrix {
    let mut h = ComplexMatrix::zeros(d, d);
    for i in 0..d {
        h[(i, i)] = Complex64::new(rng.sample::<f64, _>(StandardNormal), 0.0);
        for j in (i + 1)..d {
            let modulus = rng.random_range(lo..=hi);
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            let z = Complex64::from_polar(modulus, phase);
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
        }
    }
    h
}

/// Unitary `exp(-i s K)` for a random Hermitian `K` normalized to unit
/// Frobenius norm; small `s` gives a basis close to the one it multiplies.
pub fn random_small_unitary(rng: &mut impl Rng, d: usize, s: f64) -> ComplexMatrix {
    let k = random_hermitian(rng, d);
    let k = k.unscale(k.norm());
    (k * Complex64::new(0.0, -s)).exp()
}
