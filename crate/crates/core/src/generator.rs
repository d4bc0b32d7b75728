//! Dynamical generators `L(t)` of the unmeasured evolution.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::operator::{
    choi_matrix, hermiticity_residual, identity, induced_trace_norm_with, min_hermitian_eigenvalue,
    unit, vectorize, ComplexMatrix, SuperOperator,
};
use crate::{Error, Result};

pub type OperatorFn = Arc<dyn Fn(f64) -> ComplexMatrix + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Hermiticity tolerance applied to Hamiltonians at evaluation time.
pub const HERMITIAN_TOLERANCE: f64 = 1e-10;

/// Thresholds for the GKSL verdict.
pub const GKSL_TRACE_TOLERANCE: f64 = 1e-10;
pub const GKSL_HERMITICITY_TOLERANCE: f64 = 1e-10;
pub const GKSL_CHOI_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    Hamiltonian,
    Dissipative,
    Composite,
}

/// One dissipative channel `gamma(t) (A X A^dag - 1/2 {A^dag A, X})`.
#[derive(Clone)]
pub struct JumpTerm {
    pub operator: OperatorFn,
    pub rate: ScalarFn,
}

/// `L(t)[X] = -i[H(t), X] + sum_j gamma_j(t) D[A_j(t)][X]`, optionally scaled
/// by a constant factor.
#[derive(Clone)]
pub struct GeneratorSpec {
    dim: usize,
    hamiltonian: Option<OperatorFn>,
    jumps: Vec<JumpTerm>,
    time_dependent: bool,
    scale: f64,
}

impl fmt::Debug for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneratorSpec")
            .field("dim", &self.dim)
            .field("kind", &self.kind())
            .field("jumps", &self.jumps.len())
            .field("time_dependent", &self.time_dependent)
            .field("scale", &self.scale)
            .finish()
    }
}

impl GeneratorSpec {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            hamiltonian: None,
            jumps: Vec::new(),
            time_dependent: false,
            scale: 1.0,
        }
    }

    pub fn constant_hamiltonian(h: ComplexMatrix) -> Self {
        let mut g = hamiltonian_generator(move |_| h.clone());
        g.time_dependent = false;
        g
    }

    pub fn constant_dissipator(a: ComplexMatrix, gamma: f64) -> Self {
        let mut g = dissipative_generator(move |_| a.clone(), move |_| gamma);
        g.time_dependent = false;
        g
    }

    pub fn kind(&self) -> GeneratorKind {
        match (self.hamiltonian.is_some(), self.jumps.is_empty()) {
            (true, true) => GeneratorKind::Hamiltonian,
            (false, _) => GeneratorKind::Dissipative,
            (true, false) => GeneratorKind::Composite,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn time_dependent(&self) -> bool {
        self.time_dependent
    }

    /// True when the generator is `-i[H, .]` only (or zero).
    pub fn is_unitary(&self) -> bool {
        self.jumps.is_empty()
    }

    pub fn has_hamiltonian(&self) -> bool {
        self.hamiltonian.is_some()
    }

    /// Marks the generator as time independent, which lets downstream code
    /// evaluate it once.
    pub fn with_time_dependence(mut self, time_dependent: bool) -> Self {
        self.time_dependent = time_dependent;
        self
    }

    /// The generator multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            scale: self.scale * s,
            ..self.clone()
        }
    }

    /// Sum of two generators; both must be unscaled or share a scale.
    pub fn plus(&self, other: &GeneratorSpec) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let fold_scale = |g: &GeneratorSpec| -> (Option<OperatorFn>, Vec<JumpTerm>) {
            let s = g.scale;
            let h = g.hamiltonian.clone().map(|h| -> OperatorFn { Arc::new(move |t| h(t).scale(s)) });
            let jumps = g
                .jumps
                .iter()
                .map(|j| {
                    let rate = j.rate.clone();
                    JumpTerm {
                        operator: j.operator.clone(),
                        rate: Arc::new(move |t| s * rate(t)),
                    }
                })
                .collect();
            (h, jumps)
        };
        let (h1, mut j1) = fold_scale(self);
        let (h2, j2) = fold_scale(other);
        j1.extend(j2);
        let hamiltonian: Option<OperatorFn> = match (h1, h2) {
            (Some(a), Some(b)) => Some(Arc::new(move |t| a(t) + b(t))),
            (a, b) => a.or(b),
        };
        Ok(Self {
            dim: self.dim,
            hamiltonian,
            jumps: j1,
            time_dependent: self.time_dependent || other.time_dependent,
            scale: 1.0,
        })
    }

    /// Effective Hamiltonian `scale * H(t)`, checked for Hermiticity.
    pub fn hamiltonian_at(&self, t: f64) -> Result<Option<ComplexMatrix>> {
        let Some(h) = &self.hamiltonian else {
            return Ok(None);
        };
        let h = h(t);
        if h.nrows() != self.dim || h.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: h.nrows(),
            });
        }
        let residual = hermiticity_residual(&h);
        if residual > HERMITIAN_TOLERANCE {
            return Err(Error::Validation(format!(
                "Hamiltonian is not Hermitian at t = {t} (residual {residual:.3e})"
            )));
        }
        Ok(Some(h.scale(self.scale)))
    }

    /// Jump operators with their (scaled) rates at time `t`.
    pub fn jumps_at(&self, t: f64) -> Result<Vec<(ComplexMatrix, f64)>> {
        self.jumps
            .iter()
            .map(|j| {
                let rate = (j.rate)(t);
                if !(rate >= 0.0) {
                    return Err(Error::Validation(format!(
                        "dissipation rate must be non-negative, got {rate} at t = {t}"
                    )));
                }
                let a = (j.operator)(t);
                if a.nrows() != self.dim || a.ncols() != self.dim {
                    return Err(Error::DimensionMismatch {
                        expected: self.dim,
                        found: a.nrows(),
                    });
                }
                Ok((a, self.scale * rate))
            })
            .collect()
    }

    /// `L(t)` as a superoperator.
    pub fn evaluate(&self, t: f64) -> Result<SuperOperator> {
        let mut l = SuperOperator::zero(self.dim);
        if let Some(h) = self.hamiltonian_at(t)? {
            l = &l + &SuperOperator::commutator_map(&h);
        }
        for (a, rate) in self.jumps_at(t)? {
            if rate != 0.0 {
                l = &l + &SuperOperator::dissipator(&a).scale(rate);
            }
        }
        Ok(l)
    }
}

/// `L(t)[X] = -i[H(t), X]`.
pub fn hamiltonian_generator(h: impl Fn(f64) -> ComplexMatrix + Send + Sync + 'static) -> GeneratorSpec {
    let dim = h(0.0).nrows();
    GeneratorSpec {
        dim,
        hamiltonian: Some(Arc::new(h)),
        jumps: Vec::new(),
        time_dependent: true,
        scale: 1.0,
    }
}

/// `L(t)[X] = gamma(t) (A X A^dag - 1/2 {A^dag A, X})`.
pub fn dissipative_generator(
    a: impl Fn(f64) -> ComplexMatrix + Send + Sync + 'static,
    gamma: impl Fn(f64) -> f64 + Send + Sync + 'static,
) -> GeneratorSpec {
    let dim = a(0.0).nrows();
    GeneratorSpec {
        dim,
        hamiltonian: None,
        jumps: vec![JumpTerm {
            operator: Arc::new(a),
            rate: Arc::new(gamma),
        }],
        time_dependent: true,
        scale: 1.0,
    }
}

/// `L(t) = gamma(t) * normalized(t)` with `||normalized||_{1->1} = 1`.
#[derive(Clone, Debug)]
pub struct StrengthSample {
    pub t: f64,
    pub gamma: f64,
    pub normalized: SuperOperator,
}

pub const DEFAULT_STRENGTH_SAMPLES: usize = 1000;

/// Extract the characteristic strength of `L(t)` from the induced trace norm
/// estimator.
pub fn split_strength(l: &GeneratorSpec, t: f64) -> Result<StrengthSample> {
    split_strength_with(l, t, DEFAULT_STRENGTH_SAMPLES, 0)
}

pub fn split_strength_with(l: &GeneratorSpec, t: f64, samples: usize, seed: u64) -> Result<StrengthSample> {
    let s = l.evaluate(t)?;
    if s.max_abs() == 0.0 {
        return Err(Error::ZeroStrength { t });
    }
    let gamma = induced_trace_norm_with(&s, samples, seed).value;
    if !(gamma > 0.0) {
        return Err(Error::ZeroStrength { t });
    }
    Ok(StrengthSample {
        t,
        gamma,
        normalized: s.scale(1.0 / gamma),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct GkslReport {
    /// `max_ij |tr S[|i><j|]|`.
    pub trace_residual: f64,
    /// `max_ij ||S[|j><i|] - S[|i><j|]^dag||_max`.
    pub hermiticity_residual: f64,
    /// Smallest eigenvalue of the Choi matrix of `exp(S t_probe)`.
    pub min_choi_eigenvalue: f64,
    pub t_probe: f64,
    pub consistent: bool,
}

/// Checks that `S` generates a completely positive trace-preserving
/// semigroup: trace annihilation, Hermiticity preservation, and positivity of
/// the Choi matrix of `exp(S t_probe)`.
pub fn gksl_check(s: &SuperOperator, t_probe: f64) -> Result<GkslReport> {
    if !(t_probe > 0.0) {
        return Err(Error::InvalidInput(format!("probe time must be positive, got {t_probe}")));
    }
    let d = s.dim();
    let vec_identity = vectorize(&identity(d));
    let trace_row = vec_identity.adjoint() * s.matrix();
    let trace_residual = trace_row.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()));

    let mut hermiticity_residual: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            let a = s.apply(&unit(d, j, i))?;
            let b = s.apply(&unit(d, i, j))?.adjoint();
            hermiticity_residual = hermiticity_residual.max(crate::operator::max_abs_diff(&a, &b));
        }
    }

    let min_choi_eigenvalue = min_hermitian_eigenvalue(&choi_matrix(&s.exp(t_probe)?));
    let consistent = trace_residual < GKSL_TRACE_TOLERANCE
        && hermiticity_residual < GKSL_HERMITICITY_TOLERANCE
        && min_choi_eigenvalue >= -GKSL_CHOI_TOLERANCE;
    Ok(GkslReport {
        trace_residual,
        hermiticity_residual,
        min_choi_eigenvalue,
        t_probe,
        consistent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{
        c, choi_partial_trace, commutator, max_abs_diff, r, sigma_minus, sigma_x, sigma_y, sigma_z, trace, unit,
        I,
    };
    use crate::random::{random_hermitian, random_matrix, seeded};
    use proptest::prelude::*;

    fn lz_like(t: f64) -> ComplexMatrix {
        sigma_x() * r(0.8) + sigma_z() * r(1.7 * t)
    }

    #[test]
    fn zero_hamiltonian_gives_zero_generator() {
        let g = GeneratorSpec::constant_hamiltonian(ComplexMatrix::zeros(2, 2));
        assert_eq!(g.evaluate(0.3).unwrap().max_abs(), 0.0);
        assert_eq!(g.kind(), GeneratorKind::Hamiltonian);
    }

    #[test]
    fn sigma_z_generator_on_sigma_x() {
        let g = GeneratorSpec::constant_hamiltonian(sigma_z());
        let out = g.evaluate(0.0).unwrap().apply(&sigma_x()).unwrap();
        assert!(max_abs_diff(&out, &(sigma_y() * r(2.0))) < 1e-15);
    }

    #[test]
    fn time_dependent_hamiltonian_matches_commutator() {
        let g = hamiltonian_generator(lz_like);
        let mut rng = seeded(3);
        let x = random_matrix(&mut rng, 2);
        let got = g.evaluate(1.0).unwrap().apply(&x).unwrap();
        let h = lz_like(1.0);
        let expected = (&h * &x - &x * &h) * (-I);
        assert!(max_abs_diff(&got, &expected) < 1e-14);
    }

    #[test]
    fn non_hermitian_hamiltonian_names_the_time() {
        let g = hamiltonian_generator(|t| {
            let mut h = sigma_x();
            if t > 1.0 {
                h[(0, 1)] = c(1.0, 0.5);
            }
            h
        });
        assert!(g.evaluate(0.5).is_ok());
        let err = g.evaluate(2.0).unwrap_err();
        assert!(err.to_string().contains("t = 2"), "{err}");
    }

    #[test]
    fn zero_jump_operator_gives_zero_generator() {
        let g = GeneratorSpec::constant_dissipator(ComplexMatrix::zeros(2, 2), 1.0);
        assert_eq!(g.evaluate(0.0).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn lowering_operator_moves_excited_population() {
        let g = GeneratorSpec::constant_dissipator(sigma_minus(), 1.0);
        let out = g.evaluate(0.0).unwrap().apply(&unit(2, 1, 1)).unwrap();
        let expected = unit(2, 0, 0) - unit(2, 1, 1);
        assert!(max_abs_diff(&out, &expected) < 1e-15);
    }

    #[test]
    fn negative_rate_is_rejected() {
        let g = dissipative_generator(|_| sigma_minus(), |t| 1.0 - t);
        assert!(g.evaluate(0.5).is_ok());
        assert!(matches!(g.evaluate(2.0), Err(Error::Validation(_))));
    }

    #[test]
    fn amplitude_damping_semigroup_is_cptp() {
        let l = GeneratorSpec::constant_dissipator(sigma_minus(), 1.0).evaluate(0.0).unwrap();
        for t in [0.1, 1.0] {
            let choi = choi_matrix(&l.exp(t).unwrap());
            assert!(min_hermitian_eigenvalue(&choi) > -1e-12);
            assert!(max_abs_diff(&choi_partial_trace(&choi, 2), &identity(2)) < 1e-12);
        }
    }

    #[test]
    fn unitary_jump_gives_unital_semigroup() {
        let mut rng = seeded(17);
        let u = crate::random::random_unitary(&mut rng, 3);
        let l = GeneratorSpec::constant_dissipator(u, 1.0).evaluate(0.0).unwrap();
        let out = l.exp(0.7).unwrap().apply(&identity(3)).unwrap();
        assert!(max_abs_diff(&out, &identity(3)) < 1e-12);
    }

    #[test]
    fn strength_of_sigma_z_commutator() {
        let g = GeneratorSpec::constant_hamiltonian(sigma_z());
        let s = split_strength(&g, 0.0).unwrap();
        assert!((s.gamma - 2.0).abs() < 1e-9);
        let expected = SuperOperator::commutator_map(&sigma_z()).scale(0.5);
        assert!(s.normalized.max_abs_diff(&expected) < 1e-9);
    }

    #[test]
    fn strength_is_homogeneous() {
        let mut rng = seeded(5);
        let h = random_hermitian(&mut rng, 2);
        let g = GeneratorSpec::constant_hamiltonian(h);
        let a = split_strength_with(&g, 0.0, 200, 0).unwrap();
        let b = split_strength_with(&g.scaled(5.0), 0.0, 200, 0).unwrap();
        assert!((b.gamma / a.gamma - 5.0).abs() < 1e-9);
        assert!(a.normalized.max_abs_diff(&b.normalized) < 1e-9);
        // reconstruction
        let l = g.evaluate(0.0).unwrap();
        assert!(a.normalized.scale(a.gamma).max_abs_diff(&l) < 1e-10);
        // normalized map has unit estimated norm
        let n = crate::operator::induced_trace_norm_with(&a.normalized, 200, 0).value;
        assert!((0.9..=1.0 + 1e-12).contains(&n));
    }

    #[test]
    fn zero_generator_has_no_strength() {
        let g = GeneratorSpec::zero(2);
        assert!(matches!(split_strength(&g, 1.0), Err(Error::ZeroStrength { .. })));
    }

    #[test]
    fn hamiltonian_generators_pass_gksl() {
        let mut rng = seeded(8);
        for d in 2..=3 {
            let l = SuperOperator::commutator_map(&random_hermitian(&mut rng, d));
            assert!(gksl_check(&l, 1.0).unwrap().consistent);
        }
    }

    #[test]
    fn wrong_sign_double_commutator_fails_gksl() {
        let sz = sigma_z();
        let l = SuperOperator::from_fn(2, |x| commutator(&sz, &commutator(&sz, x)));
        let report = gksl_check(&l, 0.5).unwrap();
        assert!(!report.consistent);
        assert!(report.min_choi_eigenvalue < -1e-3);
        // the correct sign is pure dephasing and passes
        let good = SuperOperator::from_fn(2, |x| -commutator(&sz, &commutator(&sz, x)));
        assert!(gksl_check(&good, 0.5).unwrap().consistent);
    }

    #[test]
    fn composite_generator_sums_parts() {
        let h = GeneratorSpec::constant_hamiltonian(sigma_x());
        let a = GeneratorSpec::constant_dissipator(sigma_minus(), 0.3);
        let both = h.scaled(2.0).plus(&a).unwrap();
        assert_eq!(both.kind(), GeneratorKind::Composite);
        let expected = &h.evaluate(0.0).unwrap().scale(2.0) + &a.evaluate(0.0).unwrap();
        assert!(both.evaluate(0.0).unwrap().max_abs_diff(&expected) < 1e-15);
    }

    proptest! {
        #[test]
        fn generators_annihilate_trace_and_preserve_hermiticity(seed in 0u64..300, d in 2usize..5) {
            let mut rng = seeded(seed);
            let h = random_hermitian(&mut rng, d);
            let a = random_matrix(&mut rng, d);
            let g = GeneratorSpec::constant_hamiltonian(h).plus(&GeneratorSpec::constant_dissipator(a, 0.7)).unwrap();
            let l = g.evaluate(0.0).unwrap();
            let x = random_matrix(&mut rng, d);
            prop_assert!(trace(&l.apply(&x).unwrap()).norm() < 1e-11);
            let herm = crate::operator::hermitian_part(&x);
            let out = l.apply(&herm).unwrap();
            prop_assert!(hermiticity_residual(&out) < 1e-12);
        }

        #[test]
        fn hamiltonian_generator_is_odd_in_h(seed in 0u64..300) {
            let mut rng = seeded(seed);
            let h = random_hermitian(&mut rng, 3);
            let plus = GeneratorSpec::constant_hamiltonian(h.clone()).evaluate(0.0).unwrap();
            let minus = GeneratorSpec::constant_hamiltonian(-h).evaluate(0.0).unwrap();
            prop_assert!((&plus + &minus).max_abs() < 1e-14);
        }
    }
}
