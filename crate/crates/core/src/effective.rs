//! Effective generators of measured dynamics and the classical rate equations
//! they induce on populations.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::channel::{basis_derivative_overlaps, DephasingChannel, RateMatrix, RateRole};
use crate::generator::{GeneratorSpec, HERMITIAN_TOLERANCE};
use crate::operator::{
    eigenbasis, hermiticity_residual, induced_trace_norm, ComplexMatrix, OrthonormalBasis, SuperOperator,
    DEFAULT_NORM_SAMPLES,
};
use crate::stepper::{integrate, MidpointFlow, StepControl, StepStats};
use crate::{Error, Result};

/// Nodes of the midpoint rule used for the inner integral of the general
/// effective generator.
pub const DEFAULT_QUADRATURE_NODES: usize = 16;

/// Above this value of `integral gamma dt` (or of the analogous validity ratio)
/// the second-order effective description is flagged as unreliable.
pub const VALIDITY_THRESHOLD: f64 = 0.3;

/// Eigenvalue gap below which an instantaneous basis counts as degenerate.
pub const DEGENERACY_GAP: f64 = 1e-10;

/// Populations outside `[-POPULATION_SLACK, 1 + POPULATION_SLACK]` are clamped
/// and reported.
pub const POPULATION_SLACK: f64 = 1e-8;

fn check_hermitian(h: &ComplexMatrix) -> Result<usize> {
    let d = crate::operator::ensure_square(h)?;
    let residual = hermiticity_residual(h);
    if residual > HERMITIAN_TOLERANCE {
        return Err(Error::Validation(format!(
            "Hamiltonian is not Hermitian (residual {residual:.3e})"
        )));
    }
    Ok(d)
}

fn check_basis_dim(basis: &OrthonormalBasis, d: usize) -> Result<()> {
    if basis.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: basis.dim(),
        });
    }
    Ok(())
}

/// `L_eff(t) = Lam L(t) [Id + 1/2 int (L - Lam L Lam) dt''] Lam` on one
/// inter-measurement interval, with the bracket precomputed.
#[derive(Clone, Debug)]
pub struct EffectiveGenerator {
    generator: GeneratorSpec,
    channel: DephasingChannel,
    interval: (f64, f64),
    bracket: SuperOperator,
    integrated_strength: f64,
    warnings: Vec<String>,
}

impl EffectiveGenerator {
    pub fn at(&self, t: f64) -> Result<SuperOperator> {
        let lam = self.channel.superop();
        let l = self.generator.evaluate(t)?;
        Ok(lam.compose(&l).compose(&self.bracket).compose(lam))
    }

    /// `Id + 1/2 int (L - Lam L Lam) dt''` over the interval.
    pub fn bracket(&self) -> &SuperOperator {
        &self.bracket
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    /// Midpoint estimate of `int gamma(t) dt` over the interval.
    pub fn integrated_strength(&self) -> f64 {
        self.integrated_strength
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }
}

pub fn effective_generator_general(
    l: &GeneratorSpec,
    channel: &DephasingChannel,
    interval: (f64, f64),
) -> Result<EffectiveGenerator> {
    effective_generator_with_nodes(l, channel, interval, DEFAULT_QUADRATURE_NODES)
}

pub fn effective_generator_with_nodes(
    l: &GeneratorSpec,
    channel: &DephasingChannel,
    interval: (f64, f64),
    nodes: usize,
) -> Result<EffectiveGenerator> {
    let d = l.dim();
    if channel.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: channel.dim(),
        });
    }
    let (a, b) = interval;
    if !(b > a) || nodes == 0 {
        return Err(Error::InvalidInput(format!(
            "interval ({a}, {b}) must be nonempty and nodes positive"
        )));
    }
    let lam = channel.superop();
    let h = (b - a) / nodes as f64;
    let mut integral = SuperOperator::zero(d);
    let mut integrated_strength = 0.0;
    for n in 0..nodes {
        let t = a + (n as f64 + 0.5) * h;
        let lt = l.evaluate(t)?;
        integrated_strength += induced_trace_norm(&lt, DEFAULT_NORM_SAMPLES) * h;
        let sandwiched = lam.compose(&lt).compose(lam);
        integral = &integral + &(&lt - &sandwiched).scale(h);
    }
    let bracket = &SuperOperator::identity(d) + &integral.scale(0.5);
    let mut warnings = Vec::new();
    if integrated_strength > VALIDITY_THRESHOLD {
        warnings.push(format!(
            "integrated strength {integrated_strength:.3} on ({a}, {b}) exceeds {VALIDITY_THRESHOLD}"
        ));
    }
    Ok(EffectiveGenerator {
        generator: l.clone(),
        channel: channel.clone(),
        interval,
        bracket,
        integrated_strength,
        warnings,
    })
}

/// `gamma Lam Ln Lam + (gamma^2 tau / 2)(Lam Ln^2 Lam - Lam Ln Lam Ln Lam)` for
/// a time-independent normalized generator `Ln`.
pub fn stroboscopic_generator(
    l: &SuperOperator,
    channel: &DephasingChannel,
    gamma: f64,
    tau: f64,
) -> Result<SuperOperator> {
    if l.dim() != channel.dim() {
        return Err(Error::DimensionMismatch {
            expected: channel.dim(),
            found: l.dim(),
        });
    }
    if !(gamma >= 0.0 && gamma.is_finite()) || !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "strength and spacing must be finite and non-negative, got gamma = {gamma}, tau = {tau}"
        )));
    }
    let lam = channel.superop();
    let full = l.scale(gamma);
    let first = lam.compose(&full).compose(lam);
    let second = lam.compose(&full).compose(&full).compose(lam);
    // Lam L Lam L Lam = (Lam L Lam)^2 by idempotence
    let repeated = first.compose(&first);
    Ok(&first + &(&second - &repeated).scale(0.5 * tau))
}

/// `gamma^2 tau sum_{k != k'} |h_kk'|^2 (|k'><k| X |k><k'| - 1/2 {|k><k|, X})`.
pub fn gksl_effective_hamiltonian(
    h: &ComplexMatrix,
    basis: &OrthonormalBasis,
    gamma: f64,
    tau: f64,
) -> Result<SuperOperator> {
    let d = check_hermitian(h)?;
    check_basis_dim(basis, d)?;
    let g = gamma * gamma * tau;
    let inner = basis.to_basis(h);
    let mut out = SuperOperator::zero(d);
    for k in 0..d {
        for kp in 0..d {
            if k == kp {
                continue;
            }
            let weight = inner[(k, kp)].norm_sqr();
            if weight == 0.0 {
                continue;
            }
            let jump = basis.vector(kp) * basis.vector(k).adjoint();
            out = &out + &SuperOperator::dissipator(&jump).scale(g * weight);
        }
    }
    Ok(out)
}

/// `W[k, k'] = gamma^2 tau |<k|h|k'>|^2` for `k != k'`, diagonal from zero
/// column sums.
pub fn pauli_rates_hamiltonian(
    h: &ComplexMatrix,
    basis: &OrthonormalBasis,
    gamma: f64,
    tau: f64,
) -> Result<RateMatrix> {
    let d = check_hermitian(h)?;
    check_basis_dim(basis, d)?;
    let g = gamma * gamma * tau;
    let inner = basis.to_basis(h);
    let off = DMatrix::from_fn(d, d, |k, kp| if k == kp { 0.0 } else { g * inner[(k, kp)].norm_sqr() });
    Ok(RateMatrix::from_offdiagonal(off, RateRole::Dynamical))
}

/// `W[k, k'] = gamma(t) |<k|A(t)|k'>|^2` for `k != k'`.
pub fn pauli_rates_dissipative(
    a: &dyn Fn(f64) -> ComplexMatrix,
    gamma: &dyn Fn(f64) -> f64,
    basis: &OrthonormalBasis,
    t: f64,
) -> Result<RateMatrix> {
    let a_t = a(t);
    let d = crate::operator::ensure_square(&a_t)?;
    check_basis_dim(basis, d)?;
    let rate = gamma(t);
    if !(rate >= 0.0) {
        return Err(Error::Validation(format!(
            "dissipation rate must be non-negative, got {rate} at t = {t}"
        )));
    }
    let inner = basis.to_basis(&a_t);
    let off = DMatrix::from_fn(d, d, |k, kp| if k == kp { 0.0 } else { rate * inner[(k, kp)].norm_sqr() });
    Ok(RateMatrix::from_offdiagonal(off, RateRole::Dynamical))
}

/// Rates for measurements in the instantaneous eigenbasis of `H(t)`.
#[derive(Clone, Debug, Serialize)]
pub struct DriftRates {
    /// Midpoint of the interval, where all terms are evaluated.
    pub t: f64,
    pub dt: f64,
    /// `|<dk/dt|l>|^2 dt`.
    pub q: RateMatrix,
    /// `|<dk/dt|l>|^2 E_l^2 dt^3`.
    pub r: RateMatrix,
    pub total: RateMatrix,
}

/// Basis-drift plus dynamical rates for consecutive measurements at `t_prev`
/// and `t_next` in the eigenbasis of `h`, with derivatives by central
/// differences of step `fd_step`.
pub fn drifting_basis_rates(
    h: &dyn Fn(f64) -> ComplexMatrix,
    t_prev: f64,
    t_next: f64,
    fd_step: f64,
) -> Result<DriftRates> {
    let dt = t_next - t_prev;
    if !(dt > 0.0) {
        return Err(Error::InvalidInput(format!(
            "measurement times must increase, got {t_prev} -> {t_next}"
        )));
    }
    let basis_at = |s: f64| -> Result<OrthonormalBasis> {
        let hs = h(s);
        check_hermitian(&hs)?;
        Ok(eigenbasis(&hs, s, DEGENERACY_GAP)?.0)
    };
    basis_at(t_prev)?;
    basis_at(t_next)?;
    let t = 0.5 * (t_prev + t_next);
    let overlaps = basis_derivative_overlaps(&basis_at, t, fd_step)?;
    let (_, energies) = eigenbasis(&h(t), t, DEGENERACY_GAP)?;
    let d = energies.len();
    let q = overlaps.scale(dt);
    let r = DMatrix::from_fn(d, d, |k, l| overlaps[(k, l)] * energies[l] * energies[l] * dt.powi(3));
    Ok(DriftRates {
        t,
        dt,
        total: RateMatrix::from_offdiagonal(&q + &r, RateRole::Dynamical),
        q: RateMatrix::from_offdiagonal(q, RateRole::BasisDrift),
        r: RateMatrix::from_offdiagonal(r, RateRole::Dynamical),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct PauliTrajectory {
    pub times: Vec<f64>,
    pub populations: Vec<Vec<f64>>,
    pub stats: StepStats,
    /// Some population left `[-1e-8, 1 + 1e-8]` and was clamped.
    pub clamped: bool,
}

impl PauliTrajectory {
    pub fn final_populations(&self) -> &[f64] {
        self.populations.last().expect("trajectory is nonempty")
    }
}

struct PauliFlow<'a> {
    rates: &'a dyn Fn(f64) -> Result<RateMatrix>,
    dim: usize,
}

impl MidpointFlow for PauliFlow<'_> {
    type State = DVector<f64>;

    fn step(&self, p: &DVector<f64>, t_mid: f64, dt: f64) -> Result<DVector<f64>> {
        let w = (self.rates)(t_mid)?;
        if w.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: w.dim(),
            });
        }
        let next = w.transfer(dt) * p;
        if next.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonConvergence(format!("non-finite populations at t = {t_mid}")));
        }
        Ok(next)
    }

    fn distance(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        (a - b).amax()
    }
}

/// Integrates `dp/dt = W(t) p` from `t0` to `t1`.
pub fn solve_pauli(
    rates: &dyn Fn(f64) -> Result<RateMatrix>,
    p0: &[f64],
    t0: f64,
    t1: f64,
    tol: f64,
) -> Result<PauliTrajectory> {
    solve_pauli_on(rates, p0, t0, &[t1], tol)
}

/// Integrates `dp/dt = W(t) p` from `t0`, recording at each of the
/// nondecreasing `times`.
pub fn solve_pauli_on(
    rates: &dyn Fn(f64) -> Result<RateMatrix>,
    p0: &[f64],
    t0: f64,
    times: &[f64],
    tol: f64,
) -> Result<PauliTrajectory> {
    let sum: f64 = p0.iter().sum();
    if p0.is_empty() || p0.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidInput(format!(
            "initial populations must be non-negative and sum to 1, got {p0:?}"
        )));
    }
    if times.first().is_some_and(|&t| t < t0) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput("output times must be nondecreasing and start at or after t0".into()));
    }
    let flow = PauliFlow {
        rates,
        dim: p0.len(),
    };
    let mut ctl = StepControl {
        tol,
        max_steps: crate::propagate::DEFAULT_MAX_STEPS,
        initial_dt: None,
        max_dt: None,
    };
    let mut stats = StepStats::default();
    let mut state = DVector::from_column_slice(p0);
    let mut out_times = vec![t0];
    let mut populations = vec![p0.to_vec()];
    let mut clamped = false;
    let mut t = t0;
    for &target in times {
        let mut seg = StepStats::default();
        state = integrate(&flow, state, t, target, &ctl, &mut seg)?;
        if seg.last_dt > 0.0 {
            ctl.initial_dt = Some(seg.last_dt);
        }
        stats.merge(&seg);
        t = target;
        let total: f64 = state.sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::NonConvergence(format!(
                "population sum drifted to {total} at t = {t}; rates may not conserve probability"
            )));
        }
        if state.iter().any(|&p| !(-POPULATION_SLACK..=1.0 + POPULATION_SLACK).contains(&p)) {
            clamped = true;
            state.apply(|p| *p = p.clamp(0.0, 1.0));
        }
        out_times.push(t);
        populations.push(state.iter().copied().collect());
    }
    Ok(PauliTrajectory {
        times: out_times,
        populations,
        stats,
        clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::gksl_check;
    use crate::operator::{
        c, gauss_legendre, from_rows, r, sigma_minus, sigma_x, sigma_z, unit,
    };
    use crate::random::{random_basis, random_connected_hermitian, random_hermitian, seeded};
    use proptest::prelude::*;

    fn comp(d: usize) -> OrthonormalBasis {
        OrthonormalBasis::computational(d)
    }

    fn hamiltonian_super(h: &ComplexMatrix) -> SuperOperator {
        SuperOperator::commutator_map(h)
    }

    #[test]
    fn first_order_term_vanishes_for_hamiltonians() {
        let mut rng = seeded(11);
        for d in [2, 3, 4] {
            let h = random_hermitian(&mut rng, d);
            let lam = DephasingChannel::new(random_basis(&mut rng, d));
            let l = hamiltonian_super(&h);
            let s = lam.superop();
            assert!(s.compose(&l).compose(s).max_abs() < 1e-12);
            assert!(s.compose(&l).compose(s).compose(&l).compose(s).max_abs() < 1e-12);
        }
    }

    #[test]
    fn zero_generator_gives_zero_effective_map() {
        let e = effective_generator_general(&GeneratorSpec::zero(2), &DephasingChannel::computational(2), (0.0, 0.1))
            .unwrap();
        assert_eq!(e.at(0.05).unwrap().max_abs(), 0.0);
        assert!(e.warnings().is_empty());
    }

    #[test]
    fn general_form_reduces_to_stroboscopic_for_constant_generators() {
        let mut rng = seeded(12);
        let h = random_hermitian(&mut rng, 3);
        let a = crate::random::random_matrix(&mut rng, 3);
        let spec = GeneratorSpec::constant_hamiltonian(h.clone())
            .plus(&GeneratorSpec::constant_dissipator(a, 0.3))
            .unwrap();
        let channel = DephasingChannel::new(random_basis(&mut rng, 3));
        let tau = 0.01;
        let eff = effective_generator_general(&spec, &channel, (1.0, 1.0 + tau)).unwrap();
        let strobe = stroboscopic_generator(&spec.evaluate(0.0).unwrap(), &channel, 1.0, tau).unwrap();
        assert!(eff.at(1.003).unwrap().max_abs_diff(&strobe) < 1e-10);
    }

    #[test]
    fn effective_map_preserves_diagonality() {
        let spec = crate::generator::hamiltonian_generator(|t| sigma_x() + sigma_z().scale(t));
        let channel = DephasingChannel::computational(2);
        let eff = effective_generator_general(&spec, &channel, (0.0, 0.05)).unwrap();
        let out = eff.at(0.02).unwrap().apply(&unit(2, 0, 0)).unwrap();
        assert!(out[(0, 1)].norm() < 1e-15 && out[(1, 0)].norm() < 1e-15);
    }

    #[test]
    fn long_intervals_are_flagged() {
        let spec = GeneratorSpec::constant_hamiltonian(sigma_x());
        let eff = effective_generator_general(&spec, &DephasingChannel::computational(2), (0.0, 1.0)).unwrap();
        assert_eq!(eff.warnings().len(), 1);
        assert!((eff.integrated_strength() - 2.0).abs() < 1e-2);
    }

    #[test]
    fn strobe_with_zero_spacing_freezes_hamiltonian_dynamics() {
        let l = hamiltonian_super(&sigma_x());
        let s = stroboscopic_generator(&l, &DephasingChannel::computational(2), 3.0, 0.0).unwrap();
        assert!(s.max_abs() < 1e-15);
    }

    #[test]
    fn strobe_for_sigma_x_has_pauli_rates() {
        let (gamma, tau) = (2.0, 0.1);
        let s = stroboscopic_generator(&hamiltonian_super(&sigma_x()), &DephasingChannel::computational(2), gamma, tau)
            .unwrap();
        let out = s.apply(&unit(2, 0, 0)).unwrap();
        let g = gamma * gamma * tau;
        assert!((out[(1, 1)].re - g).abs() < 1e-12);
        assert!((out[(0, 0)].re + g).abs() < 1e-12);
    }

    #[test]
    fn gksl_form_of_diagonal_hamiltonian_is_zero() {
        let h = from_rows(&[&[r(1.0), r(0.0)], &[r(0.0), r(-2.0)]]);
        assert_eq!(gksl_effective_hamiltonian(&h, &comp(2), 1.0, 1.0).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn gksl_form_rejects_non_hermitian() {
        let h = from_rows(&[&[r(0.0), r(1.0)], &[r(0.0), r(0.0)]]);
        assert!(matches!(gksl_effective_hamiltonian(&h, &comp(2), 1.0, 1.0), Err(Error::Validation(_))));
    }

    #[test]
    fn gksl_form_for_sigma_x_is_symmetric_flip() {
        let (gamma, tau) = (1.5, 0.2);
        let g = gamma * gamma * tau;
        let s = gksl_effective_hamiltonian(&sigma_x(), &comp(2), gamma, tau).unwrap();
        let expected = &SuperOperator::dissipator(&sigma_minus()).scale(g)
            + &SuperOperator::dissipator(&sigma_minus().adjoint()).scale(g);
        assert!(s.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn gksl_form_agrees_with_strobe_on_diagonal_inputs() {
        let mut rng = seeded(13);
        for d in [2, 3, 4] {
            let h = random_hermitian(&mut rng, d);
            let basis = random_basis(&mut rng, d);
            let channel = DephasingChannel::new(basis.clone());
            let (gamma, tau) = (1.7, 0.3);
            let g17 = gksl_effective_hamiltonian(&h, &basis, gamma, tau).unwrap();
            let strobe = stroboscopic_generator(&hamiltonian_super(&h), &channel, gamma, tau).unwrap();
            let lam = channel.superop();
            assert!(g17.compose(lam).max_abs_diff(&strobe) < 1e-12);
            assert!(lam.compose(&g17).compose(lam).max_abs_diff(&strobe) < 1e-12);
            assert!(gksl_check(&g17, 1.0).unwrap().consistent);
        }
    }

    #[test]
    fn gksl_form_fixes_maximally_mixed_state() {
        let mut rng = seeded(14);
        let h = random_connected_hermitian(&mut rng, 3, 0.5, 1.5);
        let s = gksl_effective_hamiltonian(&h, &random_basis(&mut rng, 3), 1.0, 1.0).unwrap();
        let out = s.apply(&crate::operator::identity(3).unscale(3.0)).unwrap();
        assert!(crate::operator::max_abs(&out) < 1e-14);
    }

    #[test]
    fn hamiltonian_rates_for_sigma_x() {
        let w = pauli_rates_hamiltonian(&sigma_x(), &comp(2), 1.0, 1.0).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]);
        assert!((w.entries() - expected).amax() < 1e-15);
    }

    #[test]
    fn hamiltonian_rates_for_qutrit_links() {
        let h = from_rows(&[
            &[r(0.5), r(2.0), r(0.0)],
            &[r(2.0), r(-1.0), c(0.0, 1.0)],
            &[r(0.0), c(0.0, -1.0), r(0.2)],
        ]);
        let (gamma, tau) = (2.0, 0.25);
        let g = gamma * gamma * tau;
        let w = pauli_rates_hamiltonian(&h, &comp(3), gamma, tau).unwrap();
        assert!((w.rate(0, 1) - 4.0 * g).abs() < 1e-14);
        assert!((w.rate(1, 2) - g).abs() < 1e-14);
        assert_eq!(w.rate(0, 2), 0.0);
    }

    #[test]
    fn hamiltonian_rates_of_diagonal_h_vanish() {
        let h = from_rows(&[&[r(3.0), r(0.0)], &[r(0.0), r(1.0)]]);
        assert_eq!(pauli_rates_hamiltonian(&h, &comp(2), 1.0, 1.0).unwrap().entries().amax(), 0.0);
    }

    #[test]
    fn dissipative_rates_for_lowering_operator() {
        let w = pauli_rates_dissipative(&|_| sigma_minus(), &|_| 0.7, &comp(2), 0.0).unwrap();
        assert!((w.rate(1, 0) - 0.7).abs() < 1e-15);
        assert_eq!(w.rate(0, 1), 0.0);
    }

    #[test]
    fn dissipative_rates_of_diagonal_operator_vanish() {
        let a = from_rows(&[&[c(0.0, 1.0), r(0.0)], &[r(0.0), r(-1.0)]]);
        let w = pauli_rates_dissipative(&|_| a.clone(), &|_| 2.0, &comp(2), 0.0).unwrap();
        assert_eq!(w.entries().amax(), 0.0);
    }

    #[test]
    fn dissipative_rates_match_sandwiched_generator() {
        let mut rng = seeded(15);
        let a = crate::random::random_matrix(&mut rng, 3);
        let basis = random_basis(&mut rng, 3);
        let w = pauli_rates_dissipative(&|_| a.clone(), &|t| 1.0 + t, &basis, 0.5).unwrap();
        let lam = DephasingChannel::new(basis.clone());
        let l = SuperOperator::dissipator(&a).scale(1.5);
        let s = lam.superop().compose(&l).compose(lam.superop());
        for k in 0..3 {
            let out = basis.to_basis(&s.apply(&basis.projector(k)).unwrap());
            for j in 0..3 {
                assert!((out[(j, j)].re - w.entries()[(j, k)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn static_hamiltonian_has_no_drift() {
        let h = sigma_z() + sigma_x().scale(0.3);
        let rates = drifting_basis_rates(&|_| h.clone(), 0.0, 0.1, 1e-5).unwrap();
        assert!(rates.total.entries().amax() < 1e-12);
    }

    #[test]
    fn drift_rates_reject_degenerate_endpoints() {
        let err = drifting_basis_rates(&|t| sigma_z().scale(t), 0.0, 0.1, 1e-5).unwrap_err();
        assert!(matches!(err, Error::Degenerate { t, .. } if t == 0.0));
    }

    fn lz(delta: f64, eps: f64) -> impl Fn(f64) -> ComplexMatrix {
        move |t| sigma_x().scale(delta) + sigma_z().scale(eps * t)
    }

    #[test]
    fn lz_drift_at_crossing_matches_closed_form() {
        let (delta, eps) = (1.0, 2.0);
        let dt = 1e-3;
        let rates = drifting_basis_rates(&lz(delta, eps), -dt / 2.0, dt / 2.0, 1e-4).unwrap();
        let expected = eps * eps / (4.0 * delta * delta);
        assert!((rates.q.rate(0, 1) / dt - expected).abs() < 1e-6 * expected);
    }

    #[test]
    fn r_part_is_negligible_for_small_steps() {
        let dt = 1e-3;
        let rates = drifting_basis_rates(&lz(1.0, 2.0), 0.3, 0.3 + dt, 1e-5).unwrap();
        assert!(rates.r.rate(0, 1) < 1e-2 * rates.q.rate(0, 1));
    }

    /// Population transferred `l -> k` by `1/2 int Lam_next L^2 Lam_prev dt''`.
    fn r_quadrature(h: &dyn Fn(f64) -> ComplexMatrix, t_prev: f64, t_next: f64, k: usize, l: usize) -> f64 {
        let prev = eigenbasis(&h(t_prev), t_prev, 1e-10).unwrap().0;
        let next = eigenbasis(&h(t_next), t_next, 1e-10).unwrap().0;
        let (x, w) = gauss_legendre(16);
        let half = 0.5 * (t_next - t_prev);
        let mid = 0.5 * (t_next + t_prev);
        let input = prev.projector(l);
        let mut total = 0.0;
        for (xi, wi) in x.iter().zip(w.iter()) {
            let lt = SuperOperator::commutator_map(&h(mid + half * xi));
            let out = lt.compose(&lt).apply(&input).unwrap();
            total += wi * half * next.to_basis(&out)[(k, k)].re;
        }
        0.5 * total
    }

    #[test]
    fn r_part_against_second_order_quadrature() {
        // The quadrature carries a factor -2/3 relative to the closed
        // approximation at small steps.
        let h = lz(1.0, 2.0);
        for &(t, dt) in &[(0.0, 0.02), (0.4, 0.01), (-0.7, 0.02)] {
            let (t_prev, t_next) = (t - dt / 2.0, t + dt / 2.0);
            let rates = drifting_basis_rates(&h, t_prev, t_next, 1e-5).unwrap();
            let quad = r_quadrature(&h, t_prev, t_next, 1, 0);
            let ratio = quad / rates.r.rate(0, 1);
            assert!((ratio + 2.0 / 3.0).abs() < 0.1 * 2.0 / 3.0, "t {t}: ratio {ratio}");
        }
    }

    #[test]
    fn constant_symmetric_rates_relax_exponentially() {
        let w = 0.8;
        let rates = RateMatrix::new(DMatrix::from_row_slice(2, 2, &[-w, w, w, -w]), RateRole::Dynamical).unwrap();
        let times: Vec<f64> = (1..=10).map(|k| 0.3 * k as f64).collect();
        let traj = solve_pauli_on(&|_| Ok(rates.clone()), &[0.9, 0.1], 0.0, &times, 1e-12).unwrap();
        for (t, p) in traj.times.iter().zip(traj.populations.iter()) {
            let expected = 0.5 + 0.4 * (-2.0 * w * t).exp();
            assert!((p[0] - expected).abs() < 1e-10);
        }
        assert!(!traj.clamped);
    }

    #[test]
    fn zero_rates_keep_populations() {
        let traj = solve_pauli(&|_| Ok(RateMatrix::zero(3, RateRole::Dynamical)), &[0.2, 0.3, 0.5], 0.0, 5.0, 1e-10)
            .unwrap();
        assert_eq!(traj.final_populations(), &[0.2, 0.3, 0.5]);
    }

    #[test]
    fn invalid_initial_populations_are_rejected() {
        let rates = |_: f64| Ok(RateMatrix::zero(2, RateRole::Dynamical));
        assert!(solve_pauli(&rates, &[0.7, 0.7], 0.0, 1.0, 1e-8).is_err());
        assert!(solve_pauli(&rates, &[1.1, -0.1], 0.0, 1.0, 1e-8).is_err());
    }

    #[test]
    fn time_dependent_rates_match_closed_form() {
        // W(t) = t (sigma_x - 1): p0 - 1/2 decays as exp(-t^2)
        let rates = |t: f64| {
            RateMatrix::new(DMatrix::from_row_slice(2, 2, &[-t, t, t, -t]), RateRole::Dynamical)
        };
        let traj = solve_pauli(&rates, &[1.0, 0.0], 0.0, 1.5, 1e-10).unwrap();
        let expected = 0.5 + 0.5 * (-1.5f64 * 1.5).exp();
        assert!((traj.final_populations()[0] - expected).abs() < 1e-8);
    }

    #[test]
    fn connected_symmetric_rates_reach_uniform() {
        let mut rng = seeded(16);
        let h = random_connected_hermitian(&mut rng, 4, 0.5, 1.5);
        let w = pauli_rates_hamiltonian(&h, &comp(4), 1.0, 1.0).unwrap();
        let traj = solve_pauli(&|_| Ok(w.clone()), &[1.0, 0.0, 0.0, 0.0], 0.0, 60.0, 1e-10).unwrap();
        for p in traj.final_populations() {
            assert!((p - 0.25).abs() < 1e-8);
        }
    }

    #[test]
    fn rate_solution_matches_effective_superoperator_on_diagonal_states() {
        let mut rng = seeded(17);
        let h = random_hermitian(&mut rng, 3);
        let basis = random_basis(&mut rng, 3);
        let (gamma, tau) = (1.0, 0.5);
        let w = pauli_rates_hamiltonian(&h, &basis, gamma, tau).unwrap();
        let s = gksl_effective_hamiltonian(&h, &basis, gamma, tau).unwrap();
        let rho = crate::operator::DensityOperator::diagonal_in(&basis, &[0.6, 0.3, 0.1]).unwrap().into_matrix();
        let quantum = basis.to_basis(&s.exp(2.0).unwrap().apply(&rho).unwrap());
        let classical = solve_pauli(&|_| Ok(w.clone()), &[0.6, 0.3, 0.1], 0.0, 2.0, 1e-12).unwrap();
        for k in 0..3 {
            assert!((quantum[(k, k)].re - classical.final_populations()[k]).abs() < 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn hamiltonian_rates_are_symmetric_and_satisfy_sum_rule(seed in 0u64..10_000, d in 2usize..5) {
            let mut rng = seeded(seed);
            let h = random_hermitian(&mut rng, d);
            let basis = random_basis(&mut rng, d);
            let (gamma, tau) = (1.3, 0.4);
            let w = pauli_rates_hamiltonian(&h, &basis, gamma, tau).unwrap();
            let e = w.entries();
            prop_assert!((e - e.transpose()).amax() < 1e-14);
            let inner = basis.to_basis(&h);
            let h2 = &inner * &inner;
            for k in 0..d {
                let spread = h2[(k, k)].re - inner[(k, k)].re.powi(2);
                prop_assert!((-e[(k, k)] - gamma * gamma * tau * spread).abs() < 1e-12);
            }
        }

        #[test]
        fn strobe_matches_gksl_form_after_dephasing(seed in 0u64..10_000, d in 2usize..4) {
            let mut rng = seeded(seed);
            let h = random_hermitian(&mut rng, d);
            let basis = random_basis(&mut rng, d);
            let channel = DephasingChannel::new(basis.clone());
            let strobe = stroboscopic_generator(&SuperOperator::commutator_map(&h), &channel, 0.9, 0.6).unwrap();
            let g17 = gksl_effective_hamiltonian(&h, &basis, 0.9, 0.6).unwrap();
            prop_assert!(g17.compose(channel.superop()).max_abs_diff(&strobe) < 1e-12);
        }

        #[test]
        fn pauli_solutions_conserve_probability(seed in 0u64..10_000) {
            let mut rng = seeded(seed);
            let h = random_hermitian(&mut rng, 3);
            let w = pauli_rates_hamiltonian(&h, &comp(3), 1.0, 0.5).unwrap();
            let traj = solve_pauli(&|_| Ok(w.clone()), &[0.5, 0.5, 0.0], 0.0, 3.0, 1e-9).unwrap();
            let p = traj.final_populations();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            prop_assert!(p.iter().all(|&x| (-1e-8..=1.0 + 1e-8).contains(&x)));
        }
    }
}
