//! Open quantum system dynamics intervened by repeated nonselective
//! (dephasing) measurements.
//!
//! The crate provides exact propagation of time-dependent master equations
//! with interleaved dephasing channels, the effective and stroboscopic
//! generators that replace the measured dynamics by a classical rate equation
//! on the populations, rate matrices for measurement bases that drift in time,
//! and a Landau-Zener case study with measurement-suppressed transitions.

pub mod channel;
pub mod effective;
mod error;
pub mod generator;
pub mod invariants;
pub mod lz;
pub mod operator;
pub mod propagate;
pub mod random;
mod stepper;

pub use channel::{
    basis_drift_rates, overlap_matrix, rate_from_overlap, DephasingChannel, OverlapMatrix,
    RateMatrix, RateRole,
};
pub use effective::{
    drifting_basis_rates, effective_generator_general, gksl_effective_hamiltonian,
    pauli_rates_dissipative, pauli_rates_hamiltonian, solve_pauli, stroboscopic_generator,
    DriftRates, EffectiveGenerator, PauliTrajectory,
};
pub use error::{Error, Result};
pub use generator::{
    dissipative_generator, gksl_check, hamiltonian_generator, split_strength, GeneratorKind,
    GeneratorSpec, GkslReport, StrengthSample,
};
pub use lz::{
    diabatic_basis, lz_closed_form, lz_effective_ode, lz_exact, lz_experiment, lz_formula, lz_hamiltonian,
    make_schedule, LzMode, LzOptions, LzParams, LzReport, LzSchedule, LzScheduleKind,
};
pub use operator::{
    choi_matrix, induced_trace_norm, matrix_exp, principal_log, ComplexMatrix, DensityOperator,
    OrthonormalBasis, SuperOperator,
};
pub use propagate::{
    intervened_evolution, propagate, zeno_freeze_probe, BasisSource, MeasurementEvent,
    MeasurementSchedule, PropagateOptions, Trajectory,
};
pub use stepper::StepStats;
