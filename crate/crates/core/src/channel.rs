//! Nonselective rank-one projective measurements, overlap matrices between
//! consecutive measurement bases, and rate matrices extracted from them.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::operator::{
    principal_log, ComplexMatrix, OrthonormalBasis, SuperOperator,
};
use crate::{Error, Result};

/// Finite-difference step for basis derivatives, as a fraction of the
/// characteristic time of the basis motion.
pub const DEFAULT_FD_FRACTION: f64 = 1e-5;

/// Off-diagonal rates below this are clamped and the result flagged as
/// projected.
pub const PROJECTION_THRESHOLD: f64 = -1e-8;

/// Complete dephasing in a fixed orthonormal basis:
/// `X -> sum_k <k|X|k> |k><k|`.
#[derive(Clone, Debug)]
pub struct DephasingChannel {
    basis: OrthonormalBasis,
    superop: SuperOperator,
}

impl DephasingChannel {
    pub fn new(basis: OrthonormalBasis) -> Self {
        let d = basis.dim();
        let mut superop = SuperOperator::zero(d);
        for k in 0..d {
            let p = basis.projector(k);
            superop = &superop + &SuperOperator::sandwich(&p, &p);
        }
        Self { basis, superop }
    }

    /// Channel from raw column vectors; fails if they are not orthonormal.
    pub fn from_vectors(vectors: &[DVector<Complex64>]) -> Result<Self> {
        Ok(Self::new(OrthonormalBasis::from_vectors(vectors)?))
    }

    pub fn computational(dim: usize) -> Self {
        Self::new(OrthonormalBasis::computational(dim))
    }

    pub fn basis(&self) -> &OrthonormalBasis {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn superop(&self) -> &SuperOperator {
        &self.superop
    }

    /// Applies the channel directly in its basis, so the output has exactly
    /// zero coherences there.
    pub fn apply(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        if x.nrows() != self.dim() || x.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.nrows(),
            });
        }
        let inner = self.basis.to_basis(x);
        let diag = ComplexMatrix::from_diagonal(&inner.diagonal());
        Ok(self.basis.from_basis(&diag))
    }
}

pub fn dephasing_channel(basis: OrthonormalBasis) -> DephasingChannel {
    DephasingChannel::new(basis)
}

/// `B[k', k] = |<k'_next | k_prev>|^2`; rows index the new basis, columns the
/// old one. Doubly stochastic.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OverlapMatrix {
    entries: DMatrix<f64>,
}

impl OverlapMatrix {
    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Largest deviation of any row or column sum from one.
    pub fn stochasticity_residual(&self) -> f64 {
        let rows = self.entries.row_iter().map(|r| (r.sum() - 1.0).abs());
        let cols = self.entries.column_iter().map(|c| (c.sum() - 1.0).abs());
        rows.chain(cols).fold(0.0, f64::max)
    }
}

pub fn overlap_matrix(prev: &OrthonormalBasis, next: &OrthonormalBasis) -> Result<OverlapMatrix> {
    if prev.dim() != next.dim() {
        return Err(Error::DimensionMismatch {
            expected: prev.dim(),
            found: next.dim(),
        });
    }
    let amplitudes = next.matrix().adjoint() * prev.matrix();
    Ok(OverlapMatrix {
        entries: amplitudes.map(|z| z.norm_sqr()),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateRole {
    /// Rates generated by the motion of the measurement basis.
    BasisDrift,
    /// Rates generated by the dynamics between measurements.
    Dynamical,
}

/// Classical rate matrix acting on population vectors as `dp/dt = W p`.
///
/// `W[k, k']` for `k != k'` is the rate of `k' -> k`; columns sum to zero.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateMatrix {
    entries: DMatrix<f64>,
    role: RateRole,
    projected: bool,
}

impl RateMatrix {
    /// Rate matrix from off-diagonal rates; the diagonal is overwritten so
    /// every column sums to zero.
    pub fn from_offdiagonal(mut entries: DMatrix<f64>, role: RateRole) -> Self {
        repair_diagonal(&mut entries);
        Self {
            entries,
            role,
            projected: false,
        }
    }

    /// Rate matrix taken as is; checks the sign and conservation invariants.
    pub fn new(entries: DMatrix<f64>, role: RateRole) -> Result<Self> {
        let m = Self {
            entries,
            role,
            projected: false,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn zero(dim: usize, role: RateRole) -> Self {
        Self {
            entries: DMatrix::zeros(dim, dim),
            role,
            projected: false,
        }
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn role(&self) -> RateRole {
        self.role
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// True when negative off-diagonal rates had to be clamped.
    pub fn projected(&self) -> bool {
        self.projected
    }

    /// Rate of the transition `from -> to`.
    pub fn rate(&self, from: usize, to: usize) -> f64 {
        self.entries[(to, from)]
    }

    pub fn min_offdiagonal(&self) -> f64 {
        let d = self.dim();
        let mut m = f64::INFINITY;
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    m = m.min(self.entries[(i, j)]);
                }
            }
        }
        m
    }

    pub fn column_sum_residual(&self) -> f64 {
        self.entries
            .column_iter()
            .map(|c| c.sum().abs())
            .fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim() > 1 && self.min_offdiagonal() < -1e-10 {
            return Err(Error::Validation(format!(
                "negative off-diagonal rate {:.3e}",
                self.min_offdiagonal()
            )));
        }
        if self.column_sum_residual() > 1e-9 {
            return Err(Error::Validation(format!(
                "rate matrix columns do not sum to zero (residual {:.3e})",
                self.column_sum_residual()
            )));
        }
        Ok(())
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            entries: self.entries.scale(s),
            ..self.clone()
        }
    }

    /// Sum of two rate matrices, keeping the role of `self`.
    pub fn plus(&self, other: &RateMatrix) -> Self {
        Self {
            entries: &self.entries + &other.entries,
            role: self.role,
            projected: self.projected || other.projected,
        }
    }

    /// `exp(W t)`, the stochastic transfer matrix over time `t`.
    pub fn transfer(&self, t: f64) -> DMatrix<f64> {
        self.entries.scale(t).exp()
    }
}

fn repair_diagonal(entries: &mut DMatrix<f64>) {
    let d = entries.nrows();
    for k in 0..d {
        let outflow: f64 = (0..d).filter(|&j| j != k).map(|j| entries[(j, k)]).sum();
        entries[(k, k)] = -outflow;
    }
}

/// `Q = log(B) / dt`, the generator of the overlap matrix over one interval.
///
/// Off-diagonal rates below [`PROJECTION_THRESHOLD`] are clamped to zero with
/// the diagonal repaired and the result flagged as projected; rounding-level
/// negatives are clamped without the flag.
pub fn rate_from_overlap(b: &OverlapMatrix, dt: f64) -> Result<RateMatrix> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidInput(format!("time step must be positive, got {dt}")));
    }
    let complex = b.entries.map(|x| Complex64::new(x, 0.0));
    let log = principal_log(&complex).map_err(|e| e.context("rate_from_overlap"))?;
    let mut q = log.map(|z| z.re / dt);
    let d = q.nrows();
    let mut projected = false;
    for i in 0..d {
        for j in 0..d {
            if i != j && q[(i, j)] < 0.0 {
                if q[(i, j)] < PROJECTION_THRESHOLD {
                    projected = true;
                }
                q[(i, j)] = 0.0;
            }
        }
    }
    repair_diagonal(&mut q);
    Ok(RateMatrix {
        entries: q,
        role: RateRole::BasisDrift,
        projected,
    })
}

/// `|<d k'/dt | k>|^2` for every pair, by central differences with step `h`.
///
/// Bases at `t +- h` are phase-aligned to the basis at `t` before
/// differencing. The diagonal is set to zero.
pub fn basis_derivative_overlaps(
    basis_fn: &dyn Fn(f64) -> Result<OrthonormalBasis>,
    t: f64,
    h: f64,
) -> Result<DMatrix<f64>> {
    if !(h > 0.0) {
        return Err(Error::InvalidInput(format!("finite-difference step must be positive, got {h}")));
    }
    let center = basis_fn(t)?.gauge_fixed();
    let plus = basis_fn(t + h)?.gauge_fixed().aligned_to(&center, t + h)?;
    let minus = basis_fn(t - h)?.gauge_fixed().aligned_to(&center, t - h)?;
    let derivative = (plus.matrix() - minus.matrix()).unscale(2.0 * h);
    let d = center.dim();
    // entry (k', k) = <d k'/dt | k>
    let amplitudes = derivative.adjoint() * center.matrix();
    Ok(DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            0.0
        } else {
            amplitudes[(i, j)].norm_sqr()
        }
    }))
}

/// Basis-drift rates `Q[k', k] = |<d k'/dt | k>|^2 dt` at time `t`.
pub fn basis_drift_rates(
    basis_fn: &dyn Fn(f64) -> Result<OrthonormalBasis>,
    t: f64,
    dt: f64,
    fd_step: f64,
) -> Result<RateMatrix> {
    if !(dt > 0.0) {
        return Err(Error::InvalidInput(format!("time step must be positive, got {dt}")));
    }
    let overlaps = basis_derivative_overlaps(basis_fn, t, fd_step)?;
    Ok(RateMatrix::from_offdiagonal(overlaps.scale(dt), RateRole::BasisDrift))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{choi_matrix, choi_partial_trace, from_rows, identity, max_abs_diff, min_hermitian_eigenvalue, r};
    use crate::random::{random_basis, random_matrix, seeded};
    use proptest::prelude::*;

    fn rotated_basis(theta: f64) -> OrthonormalBasis {
        let (s, c) = theta.sin_cos();
        OrthonormalBasis::new(from_rows(&[&[r(c), r(-s)], &[r(s), r(c)]])).unwrap()
    }

    #[test]
    fn erases_coherences_in_computational_basis() {
        let x = from_rows(&[&[r(0.5), r(0.3)], &[r(0.3), r(0.5)]]);
        let out = DephasingChannel::computational(2).apply(&x).unwrap();
        assert!(max_abs_diff(&out, &identity(2).scale(0.5)) < 1e-16);
    }

    #[test]
    fn leaves_diagonal_operators_unchanged() {
        let x = ComplexMatrix::from_diagonal(&nalgebra::dvector![r(0.2), r(0.3), r(0.5)]);
        let ch = DephasingChannel::computational(3);
        assert_eq!(ch.apply(&x).unwrap(), x);
        assert!(max_abs_diff(&ch.superop().apply(&x).unwrap(), &x) < 1e-16);
    }

    #[test]
    fn hadamard_basis_dephases_ket_zero_to_maximally_mixed() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let basis = OrthonormalBasis::new(from_rows(&[&[r(s), r(s)], &[r(s), r(-s)]])).unwrap();
        let ch = DephasingChannel::new(basis);
        let out = ch.apply(&crate::operator::unit(2, 0, 0)).unwrap();
        assert!(max_abs_diff(&out, &identity(2).scale(0.5)) < 1e-15);
        let via_superop = ch.superop().apply(&crate::operator::unit(2, 0, 0)).unwrap();
        assert!(max_abs_diff(&via_superop, &out) < 1e-15);
    }

    #[test]
    fn rejects_non_orthonormal_vectors() {
        let v = vec![nalgebra::dvector![r(1.0), r(0.0)], nalgebra::dvector![r(1.0), r(1.0)]];
        assert!(matches!(DephasingChannel::from_vectors(&v), Err(Error::Validation(_))));
    }

    #[test]
    fn dephasing_is_idempotent_cptp_and_fixes_projectors() {
        let mut rng = seeded(12);
        for d in 2..=4 {
            let ch = DephasingChannel::new(random_basis(&mut rng, d));
            let s = ch.superop();
            assert!(s.compose(s).max_abs_diff(s) < 1e-12);
            let choi = choi_matrix(s);
            assert!(min_hermitian_eigenvalue(&choi) > -1e-10);
            assert!(max_abs_diff(&choi_partial_trace(&choi, d), &identity(d)) < 1e-10);
            for k in 0..d {
                let p = ch.basis().projector(k);
                assert!(max_abs_diff(&ch.apply(&p).unwrap(), &p) < 1e-14);
            }
            // output commutes with every projector
            let out = ch.apply(&random_matrix(&mut rng, d)).unwrap();
            for k in 0..d {
                let p = ch.basis().projector(k);
                assert!(max_abs_diff(&(&out * &p), &(&p * &out)) < 1e-13);
            }
        }
    }

    #[test]
    fn overlap_of_identical_bases_is_identity() {
        let mut rng = seeded(1);
        let b = random_basis(&mut rng, 3);
        let o = overlap_matrix(&b, &b).unwrap();
        assert!((o.entries() - DMatrix::<f64>::identity(3, 3)).abs().max() < 1e-14);
    }

    #[test]
    fn overlap_of_rotated_qubit_bases() {
        let theta = 0.37;
        let o = overlap_matrix(&rotated_basis(0.0), &rotated_basis(theta)).unwrap();
        let (s2, c2) = (theta.sin().powi(2), theta.cos().powi(2));
        let expected = DMatrix::from_row_slice(2, 2, &[c2, s2, s2, c2]);
        assert!((o.entries() - expected).abs().max() < 1e-15);
    }

    #[test]
    fn overlap_rejects_dimension_mismatch() {
        let e = overlap_matrix(&OrthonormalBasis::computational(2), &OrthonormalBasis::computational(3));
        assert!(matches!(e, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn rate_from_identity_overlap_is_zero() {
        let o = overlap_matrix(&rotated_basis(0.2), &rotated_basis(0.2)).unwrap();
        let q = rate_from_overlap(&o, 0.7).unwrap();
        assert!(q.entries().abs().max() < 1e-14);
        assert!(!q.projected());
    }

    #[test]
    fn rate_from_symmetric_two_state_overlap() {
        let b = OverlapMatrix {
            entries: DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.1, 0.9]),
        };
        let q = rate_from_overlap(&b, 1.0).unwrap();
        let k = 0.8f64.ln() / -2.0;
        let expected = DMatrix::from_row_slice(2, 2, &[-k, k, k, -k]);
        assert!((q.entries() - expected).abs().max() < 1e-14);
    }

    #[test]
    fn rate_from_slowly_rotating_basis() {
        // exact: Q_offdiag = -ln(cos 2 w dt) / (2 dt) -> w^2 dt
        let omega = 1.3;
        let dt = 1e-3;
        let o = overlap_matrix(&rotated_basis(0.4), &rotated_basis(0.4 + omega * dt)).unwrap();
        let q = rate_from_overlap(&o, dt).unwrap();
        let closed = -(2.0 * omega * dt).cos().ln() / (2.0 * dt);
        assert!((q.rate(0, 1) - closed).abs() < 1e-10);
        assert!((q.rate(0, 1) - omega * omega * dt).abs() / (omega * omega * dt) < 1e-5);
    }

    #[test]
    fn rate_from_overlap_projects_non_embeddable_matrix() {
        // Doubly stochastic with positive spectrum whose log has a negative
        // off-diagonal entry.
        let b = OverlapMatrix {
            entries: DMatrix::from_row_slice(3, 3, &[0.8, 0.2, 0.0, 0.0, 0.8, 0.2, 0.2, 0.0, 0.8]),
        };
        let q = rate_from_overlap(&b, 1.0).unwrap();
        assert!(q.projected());
        assert!(q.min_offdiagonal() >= 0.0);
        assert!(q.column_sum_residual() < 1e-14);
    }

    #[test]
    fn rate_from_overlap_propagates_branch_cut() {
        let b = OverlapMatrix {
            entries: DMatrix::from_row_slice(2, 2, &[0.2, 0.8, 0.8, 0.2]),
        };
        let err = rate_from_overlap(&b, 1.0).unwrap_err();
        assert!(matches!(err.root(), Error::BranchCut { .. }));
        assert!(err.to_string().contains("rate_from_overlap"));
    }

    #[test]
    fn constant_basis_has_zero_drift() {
        let b = rotated_basis(0.3);
        let f = move |_t: f64| Ok(b.clone());
        let q = basis_drift_rates(&f, 0.0, 0.1, 1e-5).unwrap();
        assert!(q.entries().abs().max() < 1e-20);
    }

    #[test]
    fn drift_rates_agree_with_log_of_overlap() {
        let omega = 2.0;
        let f = move |t: f64| Ok(rotated_basis(omega * t + 0.1 * t * t));
        for dt in [1e-2, 5e-3] {
            let t = 0.3;
            let fd = basis_drift_rates(&f, t, dt, 1e-6).unwrap();
            let o = overlap_matrix(&f(t - dt / 2.0).unwrap(), &f(t + dt / 2.0).unwrap()).unwrap();
            let lg = rate_from_overlap(&o, dt).unwrap();
            let diff = (fd.entries() - lg.entries()).abs().max();
            // first nonvanishing discrepancy is O(dt^3) in the rate
            assert!(diff < 10.0 * dt * dt * dt * omega.powi(4), "dt {dt}: {diff}");
        }
    }

    #[test]
    fn drift_fails_on_vanishing_overlap() {
        // basis that swaps its vectors discontinuously
        let f = |t: f64| {
            if t > 0.0 {
                Ok(rotated_basis(std::f64::consts::FRAC_PI_2))
            } else {
                Ok(rotated_basis(0.0))
            }
        };
        assert!(matches!(basis_drift_rates(&f, 0.0, 0.1, 1e-5), Err(Error::Degenerate { .. })));
    }

    proptest! {
        #[test]
        fn overlap_is_doubly_stochastic_and_transposes(seed in 0u64..500, d in 1usize..5) {
            let mut rng = seeded(seed);
            let a = random_basis(&mut rng, d);
            let b = random_basis(&mut rng, d);
            let ab = overlap_matrix(&a, &b).unwrap();
            let ba = overlap_matrix(&b, &a).unwrap();
            prop_assert!(ab.stochasticity_residual() < 1e-10);
            prop_assert!((ab.entries() - ba.entries().transpose()).abs().max() < 1e-14);
        }

        #[test]
        fn unprojected_rates_exponentiate_back(seed in 0u64..300, d in 2usize..5) {
            let mut rng = seeded(seed);
            let a = random_basis(&mut rng, d);
            let u = crate::random::random_small_unitary(&mut rng, d, 0.2);
            let b = OrthonormalBasis::new(&u * a.matrix()).unwrap();
            let o = overlap_matrix(&a, &b).unwrap();
            let q = rate_from_overlap(&o, 0.5).unwrap();
            if !q.projected() {
                prop_assert!((q.transfer(0.5) - o.entries()).abs().max() < 1e-8);
            }
        }
    }
}
