//! Randomized battery of the structural identities the library relies on.
//!
//! Instances depend on the seed; verdicts do not.

use serde::Serialize;

use crate::channel::{overlap_matrix, rate_from_overlap, DephasingChannel};
use crate::effective::{gksl_effective_hamiltonian, pauli_rates_hamiltonian, solve_pauli, stroboscopic_generator};
use crate::generator::gksl_check;
use crate::operator::{
    choi_matrix, choi_partial_trace, identity, max_abs, max_abs_diff, min_hermitian_eigenvalue, OrthonormalBasis,
    SuperOperator,
};
use crate::random::{
    random_basis, random_connected_hermitian, random_hermitian, random_matrix, random_small_unitary, seeded,
};
use crate::{Error, Result};

pub const MAX_CHECK_DIM: usize = 8;
const INSTANCES: usize = 5;

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// Worst residual over the instances.
    pub residual: f64,
    pub threshold: f64,
}

struct Battery {
    results: Vec<CheckResult>,
}

impl Battery {
    /// Records `residual <= threshold`; `residual` is the worst case.
    fn record(&mut self, name: &'static str, residual: f64, threshold: f64) {
        self.results.push(CheckResult {
            name,
            passed: residual <= threshold,
            residual,
            threshold,
        });
    }
}

fn worst(values: impl IntoIterator<Item = Result<f64>>) -> Result<f64> {
    let mut m: f64 = 0.0;
    for v in values {
        let v = v?;
        m = if v.is_nan() { f64::INFINITY } else { m.max(v) };
    }
    Ok(m)
}

/// Runs every check on `dim`-dimensional instances drawn from `seed`.
pub fn run_invariant_suite(seed: u64, dim: usize) -> Result<Vec<CheckResult>> {
    if !(2..=MAX_CHECK_DIM).contains(&dim) {
        return Err(Error::InvalidInput(format!(
            "check dimension must be between 2 and {MAX_CHECK_DIM}, got {dim}"
        )));
    }
    let d = dim;
    let mut rng = seeded(seed);
    let mut battery = Battery { results: Vec::new() };

    let bases: Vec<OrthonormalBasis> = (0..INSTANCES).map(|_| random_basis(&mut rng, d)).collect();
    let hams: Vec<_> = (0..INSTANCES).map(|_| random_hermitian(&mut rng, d)).collect();
    let channels: Vec<DephasingChannel> = bases.iter().cloned().map(DephasingChannel::new).collect();

    battery.record(
        "dephasing is idempotent",
        worst(channels.iter().map(|c| {
            let s = c.superop();
            Ok(s.compose(s).max_abs_diff(s))
        }))?,
        1e-11,
    );

    battery.record(
        "dephasing is completely positive and trace preserving",
        worst(channels.iter().map(|c| {
            let choi = choi_matrix(c.superop());
            let negativity = (-min_hermitian_eigenvalue(&choi)).max(0.0);
            let trace = max_abs_diff(&choi_partial_trace(&choi, d), &identity(d));
            Ok(negativity.max(trace))
        }))?,
        1e-11,
    );

    battery.record(
        "first-order Hamiltonian term vanishes",
        worst(channels.iter().zip(&hams).map(|(c, h)| {
            let lam = c.superop();
            Ok(lam.compose(&SuperOperator::commutator_map(h)).compose(lam).max_abs())
        }))?,
        1e-11,
    );

    battery.record(
        "repeated first-order Hamiltonian term vanishes",
        worst(channels.iter().zip(&hams).map(|(c, h)| {
            let lam = c.superop();
            let l = SuperOperator::commutator_map(h);
            Ok(lam.compose(&l).compose(lam).compose(&l).compose(lam).max_abs())
        }))?,
        1e-11,
    );

    battery.record(
        "overlap matrices are doubly stochastic",
        worst(bases.windows(2).map(|w| Ok(overlap_matrix(&w[0], &w[1])?.stochasticity_residual())))?,
        1e-10,
    );

    battery.record(
        "GKSL form of the effective generator is valid",
        worst(bases.iter().zip(&hams).map(|(b, h)| {
            let report = gksl_check(&gksl_effective_hamiltonian(h, b, 1.0, 0.5)?, 1.0)?;
            Ok(report
                .trace_residual
                .max(report.hermiticity_residual)
                .max((-report.min_choi_eigenvalue).max(0.0)))
        }))?,
        1e-9,
    );

    battery.record(
        "Lindblad generators are valid",
        worst(hams.iter().map(|h| {
            let a = random_matrix(&mut rng, d);
            let l = &SuperOperator::commutator_map(h) + &SuperOperator::dissipator(&a).scale(0.4);
            let report = gksl_check(&l, 0.5)?;
            Ok(report
                .trace_residual
                .max(report.hermiticity_residual)
                .max((-report.min_choi_eigenvalue).max(0.0)))
        }))?,
        1e-9,
    );

    battery.record(
        "stroboscopic generator equals GKSL form on dephased inputs",
        worst(channels.iter().zip(&hams).map(|(c, h)| {
            let strobe = stroboscopic_generator(&SuperOperator::commutator_map(h), c, 1.3, 0.2)?;
            let g17 = gksl_effective_hamiltonian(h, c.basis(), 1.3, 0.2)?;
            Ok(g17.compose(c.superop()).max_abs_diff(&strobe))
        }))?,
        1e-10,
    );

    battery.record(
        "maximally mixed state is a fixed point",
        worst(bases.iter().map(|b| {
            let h = random_connected_hermitian(&mut rng, d, 0.5, 1.5);
            let s = gksl_effective_hamiltonian(&h, b, 1.0, 1.0)?;
            Ok(max_abs(&s.apply(&identity(d).unscale(d as f64))?))
        }))?,
        1e-12,
    );

    battery.record(
        "Hamiltonian rates are symmetric and obey the sum rule",
        worst(bases.iter().zip(&hams).map(|(b, h)| {
            let w = pauli_rates_hamiltonian(h, b, 1.0, 1.0)?;
            let e = w.entries();
            let inner = b.to_basis(h);
            let h2 = &inner * &inner;
            let sum_rule = (0..d)
                .map(|k| (-e[(k, k)] - (h2[(k, k)].re - inner[(k, k)].re.powi(2))).abs())
                .fold(0.0, f64::max);
            Ok((e - e.transpose()).amax().max(sum_rule))
        }))?,
        1e-10,
    );

    battery.record(
        "Pauli solutions conserve probability",
        worst(hams.iter().zip(&bases).map(|(h, b)| {
            let w = pauli_rates_hamiltonian(h, b, 1.0, 0.3)?;
            let mut p0 = vec![0.0; d];
            p0[0] = 1.0;
            let traj = solve_pauli(&|_| Ok(w.clone()), &p0, 0.0, 2.0, 1e-10)?;
            Ok((traj.final_populations().iter().sum::<f64>() - 1.0).abs())
        }))?,
        1e-10,
    );

    // near pairs keep the overlap close to the identity, where the logarithm
    // is principal
    battery.record(
        "overlap rates reproduce the overlap matrix",
        worst(bases.iter().map(|b| {
            let u = random_small_unitary(&mut rng, d, 0.05);
            let next = OrthonormalBasis::new(&u * b.matrix())?;
            let overlap = overlap_matrix(b, &next)?;
            let q = rate_from_overlap(&overlap, 0.1)?;
            if q.projected() {
                return Ok(0.0);
            }
            Ok((q.transfer(0.1) - overlap.entries()).amax())
        }))?,
        1e-8,
    );

    Ok(battery.results)
}
