//! Landau-Zener sweep `H(t) = delta sigma_x + eps t sigma_z` with nonselective
//! measurements in the instantaneous eigenbasis.
//!
//! Populations labelled `rho11` always refer to the excited instantaneous
//! eigenstate `phi_1(t)`. Since `phi_1(+inf) = |0>`, the unmeasured value of
//! `rho11(+inf)` is the Landau-Zener probability `exp(-pi delta^2 / eps)`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{RateMatrix, RateRole};
use crate::effective::{solve_pauli_on, VALIDITY_THRESHOLD};
use crate::generator::{hamiltonian_generator, GeneratorSpec};
use crate::operator::{sigma_x, sigma_z, ComplexMatrix, DensityOperator, OrthonormalBasis};
use crate::propagate::{intervened_evolution, MeasurementSchedule, PointKind, PropagateOptions, Trajectory};
use crate::stepper::StepStats;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LzParams {
    pub delta: f64,
    pub eps: f64,
}

impl LzParams {
    pub fn new(delta: f64, eps: f64) -> Result<Self> {
        let p = Self { delta, eps };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidInput(format!("delta must be positive, got {}", self.delta)));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidInput(format!("eps must be positive, got {}", self.eps)));
        }
        Ok(())
    }

    pub fn hamiltonian(&self, t: f64) -> ComplexMatrix {
        sigma_x().scale(self.delta) + sigma_z().scale(self.eps * t)
    }

    pub fn generator(&self) -> GeneratorSpec {
        let p = *self;
        hamiltonian_generator(move |t| p.hamiltonian(t))
    }

    /// `sqrt(delta^2 + (eps t)^2)`; the eigenvalues are `-E` and `+E`.
    pub fn energy(&self, t: f64) -> f64 {
        self.delta.hypot(self.eps * t)
    }

    /// Columns `phi_0(t)` (energy `-E`) and `phi_1(t)` (energy `+E`).
    pub fn diabatic_basis(&self, t: f64) -> OrthonormalBasis {
        let (delta, et) = (self.delta, self.eps * t);
        let e = self.energy(t);
        // e - et without cancellation for et > 0
        let a = if et > 0.0 { delta * delta / (e + et) } else { e - et };
        let norm = (2.0 * e * a).sqrt();
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[a / norm, delta / norm, -delta / norm, a / norm],
        )
        .map(Complex64::from);
        OrthonormalBasis::new(m).expect("closed-form eigenvectors are orthonormal")
    }

    /// `|<d phi_1/dt | phi_0>|^2 = eps^2 delta^2 / 4 (delta^2 + (eps t)^2)^2`.
    pub fn coupling_sq(&self, t: f64) -> f64 {
        let e2 = self.energy(t).powi(2);
        self.eps * self.eps * self.delta * self.delta / (4.0 * e2 * e2)
    }

    /// Half-width `2 delta / eps` of the measurement window.
    pub fn window(&self) -> f64 {
        2.0 * self.delta / self.eps
    }

    /// `dt eps delta / (delta^2 + (eps t)^2)`; the effective equation needs
    /// this to be small.
    pub fn validity_ratio(&self, t: f64, dt: f64) -> f64 {
        dt * self.eps * self.delta / self.energy(t).powi(2)
    }

    /// Initial truncation half-length `4 max(2 delta / eps, 1 / sqrt(eps))`.
    pub fn initial_horizon(&self) -> f64 {
        4.0 * self.window().max(1.0 / self.eps.sqrt())
    }
}

pub fn lz_hamiltonian(p: &LzParams) -> impl Fn(f64) -> ComplexMatrix + Send + Sync + 'static {
    let p = *p;
    move |t| p.hamiltonian(t)
}

pub fn diabatic_basis(p: &LzParams, t: f64) -> OrthonormalBasis {
    p.diabatic_basis(t)
}

/// `exp(-pi delta^2 / eps)`.
pub fn lz_formula(p: &LzParams) -> f64 {
    (-std::f64::consts::PI * p.delta * p.delta / p.eps).exp()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LzScheduleKind {
    Uniform,
    Adapted,
    None,
}

impl FromStr for LzScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" => Ok(Self::Uniform),
            "adapted" => Ok(Self::Adapted),
            "none" => Ok(Self::None),
            other => Err(Error::InvalidInput(format!(
                "unknown schedule kind '{other}' (expected uniform, adapted or none)"
            ))),
        }
    }
}

impl fmt::Display for LzScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Uniform => "uniform",
            Self::Adapted => "adapted",
            Self::None => "none",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LzSchedule {
    pub kind: LzScheduleKind,
    pub n: usize,
    /// Strictly increasing measurement times.
    pub times: Vec<f64>,
}

impl LzSchedule {
    pub fn spacings(&self) -> Vec<f64> {
        self.times.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn to_measurements(&self) -> Result<MeasurementSchedule> {
        MeasurementSchedule::instantaneous(&self.times)
    }
}

/// Uniform: `2N+1` equally spaced times on `[-2 delta/eps, 2 delta/eps]`.
/// Adapted: `t = sgn(j) 2 delta |j| (|j|+1) / (eps N (N+1))` for
/// `j = -N..=N`, which is dense near the crossing and spans the same window.
pub fn make_schedule(p: &LzParams, kind: LzScheduleKind, n: usize) -> Result<LzSchedule> {
    p.validate()?;
    if kind != LzScheduleKind::None && n == 0 {
        return Err(Error::InvalidInput("number of measurements N must be at least 1".into()));
    }
    let w = p.window();
    let mut times: Vec<f64> = match kind {
        LzScheduleKind::None => Vec::new(),
        LzScheduleKind::Uniform => {
            let spacing = 2.0 * w / (2 * n) as f64;
            (0..=2 * n).map(|m| -w + m as f64 * spacing).collect()
        }
        LzScheduleKind::Adapted => {
            let nn = n as f64;
            (-(n as i64)..=n as i64)
                .map(|j| {
                    let a = j.unsigned_abs() as f64;
                    (j as f64).signum() * w * a * (a + 1.0) / (nn * (nn + 1.0))
                })
                .collect()
        }
    };
    times.sort_by(f64::total_cmp);
    times.dedup();
    Ok(LzSchedule {
        kind,
        n: if kind == LzScheduleKind::None { 0 } else { n },
        times,
    })
}

/// The adapted times `2 delta (m-N-1)(m-N) / (eps N (N+1))`, `m = 1..=2N+1`,
/// evaluated literally (not monotone; kept for comparison).
pub fn adapted_times_literal(p: &LzParams, n: usize) -> Vec<f64> {
    let nn = n as f64;
    (1..=2 * n + 1)
        .map(|m| {
            let m = m as f64;
            2.0 * p.delta * (m - nn - 1.0) * (m - nn) / (p.eps * nn * (nn + 1.0))
        })
        .collect()
}

/// Terminal excited population from the closed-form integrals of the
/// effective equation.
pub fn lz_closed_form(p: &LzParams, kind: LzScheduleKind, n: usize) -> Result<f64> {
    p.validate()?;
    if kind != LzScheduleKind::None && n == 0 {
        return Err(Error::InvalidInput("number of measurements N must be at least 1".into()));
    }
    let (d2, e2) = (p.delta * p.delta, p.eps * p.eps);
    let nn = n as f64;
    Ok(match kind {
        LzScheduleKind::None => lz_formula(p),
        LzScheduleKind::Uniform => {
            let exponent = std::f64::consts::PI * (8.0 * d2 * d2 + e2 * nn * nn) / (2.0 * e2 * nn.powi(3));
            0.5 * (1.0 - (-exponent).exp())
        }
        LzScheduleKind::Adapted => {
            let m = nn + 1.0;
            let exponent = (m * m + 4.0 * d2 * d2 / (3.0 * e2)) / (2.0 * m.powi(3));
            0.5 * (1.0 - (-exponent).exp())
        }
    })
}

/// Rate `eps^2 delta^2 dt / 4 E^2 (1/E^2 + dt^2)` of the two-level effective
/// equation `d rho11/dt = rate (1 - 2 rho11)`.
pub fn effective_rate(p: &LzParams, t: f64, dt: f64) -> f64 {
    let e2 = p.energy(t).powi(2);
    p.eps * p.eps * p.delta * p.delta * dt / (4.0 * e2) * (1.0 / e2 + dt * dt)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LzOptions {
    /// Local tolerance of every time integration.
    pub tol: f64,
    /// Truncation `[-T, T]` is accepted once doubling `T` changes the
    /// terminal excited population by less than this.
    pub truncation_tol: f64,
    pub max_doublings: u32,
}

impl Default for LzOptions {
    fn default() -> Self {
        Self {
            tol: crate::propagate::DEFAULT_TOLERANCE,
            truncation_tol: 1e-5,
            max_doublings: 10,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EffectiveRun {
    pub times: Vec<f64>,
    pub rho11: Vec<f64>,
    /// `rho11(+inf)`; equal to the value at the last measurement, since the
    /// equation only acts between measurements.
    pub terminal: f64,
    /// Largest validity ratio over the intervals.
    pub max_validity_ratio: f64,
    pub stats: StepStats,
    pub warnings: Vec<String>,
}

/// Integrates the effective two-level equation interval by interval with
/// `rho11 = 0` at the first measurement.
///
/// Without measurements the equation does not apply; use [`lz_exact`].
pub fn lz_effective_ode(p: &LzParams, schedule: &LzSchedule, tol: f64) -> Result<EffectiveRun> {
    p.validate()?;
    if schedule.times.is_empty() {
        return Err(Error::InvalidInput(
            "the effective equation needs at least one measurement; use the exact propagation".into(),
        ));
    }
    let mut times = vec![schedule.times[0]];
    let mut rho11 = vec![0.0];
    let mut stats = StepStats::default();
    let mut max_validity_ratio: f64 = 0.0;
    let mut pops = vec![1.0, 0.0];
    for w in schedule.times.windows(2) {
        let (a, b) = (w[0], w[1]);
        let dt = b - a;
        // the ratio peaks where |t| is smallest
        let t_closest = if a <= 0.0 && b >= 0.0 { 0.0 } else if b < 0.0 { b } else { a };
        max_validity_ratio = max_validity_ratio.max(p.validity_ratio(t_closest, dt));
        let rates = |t: f64| {
            let r = effective_rate(p, t, dt);
            RateMatrix::new(DMatrix::from_row_slice(2, 2, &[-r, r, r, -r]), RateRole::Dynamical)
        };
        let traj = solve_pauli_on(&rates, &pops, a, &[b], tol)?;
        stats.merge(&traj.stats);
        pops = traj.final_populations().to_vec();
        times.push(b);
        rho11.push(pops[1]);
    }
    let mut warnings = Vec::new();
    if max_validity_ratio > VALIDITY_THRESHOLD {
        warnings.push(format!(
            "measurement spacing too coarse for the effective equation: validity ratio {max_validity_ratio:.3} > {VALIDITY_THRESHOLD}"
        ));
    }
    Ok(EffectiveRun {
        terminal: *rho11.last().expect("nonempty"),
        times,
        rho11,
        max_validity_ratio,
        stats,
        warnings,
    })
}

#[derive(Clone, Debug)]
pub struct ExactRun {
    /// Truncation half-length actually used.
    pub horizon: f64,
    pub doublings: u32,
    /// Excited instantaneous population at `+T`, the estimate of
    /// `rho11(+inf)`.
    pub terminal: f64,
    /// Computational-basis populations at `+T`.
    pub computational: [f64; 2],
    /// Change of `terminal` in the last doubling.
    pub truncation_change: f64,
    pub trajectory: Trajectory,
    pub warnings: Vec<String>,
}

impl ExactRun {
    /// `(t, rho11)` right after every measurement.
    pub fn measured_rho11(&self, p: &LzParams) -> Vec<(f64, f64)> {
        self.trajectory
            .measurement_points()
            .map(|pt| (pt.t, pt.state.populations_in(&p.diabatic_basis(pt.t))[1]))
            .collect()
    }
}

fn exact_once(p: &LzParams, schedule: &MeasurementSchedule, horizon: f64, opts: &LzOptions) -> Result<Trajectory> {
    let g = p.generator();
    let phi0 = p.diabatic_basis(-horizon).vector(0);
    let rho0 = DensityOperator::pure(&DVector::from_iterator(2, phi0.iter().copied()))?;
    intervened_evolution(
        &g,
        schedule,
        &rho0,
        -horizon,
        horizon,
        &PropagateOptions::with_tol(opts.tol),
        &[],
    )
}

/// Exact measured dynamics on `[-T, T]` starting in the ground state
/// `phi_0(-T)`, doubling `T` until the terminal excited population settles.
pub fn lz_exact(p: &LzParams, schedule: &LzSchedule, opts: &LzOptions) -> Result<ExactRun> {
    p.validate()?;
    let measurements = schedule.to_measurements()?;
    let terminal_of = |traj: &Trajectory, horizon: f64| traj.final_state().populations_in(&p.diabatic_basis(horizon))[1];

    let mut horizon = p.initial_horizon().max(2.0 * p.window());
    let mut traj = exact_once(p, &measurements, horizon, opts)?;
    let mut terminal = terminal_of(&traj, horizon);
    let mut change = f64::INFINITY;
    let mut doublings = 0;
    let mut warnings = traj.meta.warnings.clone();
    while doublings < opts.max_doublings {
        let next_horizon = 2.0 * horizon;
        let next = exact_once(p, &measurements, next_horizon, opts)?;
        let next_terminal = terminal_of(&next, next_horizon);
        change = (next_terminal - terminal).abs();
        horizon = next_horizon;
        traj = next;
        terminal = next_terminal;
        doublings += 1;
        if change < opts.truncation_tol {
            break;
        }
    }
    if change >= opts.truncation_tol {
        warnings.push(format!(
            "truncation did not settle: last doubling changed the result by {change:.3e}"
        ));
    }
    let last = traj
        .points
        .iter()
        .rev()
        .find(|pt| pt.kind == PointKind::Final)
        .expect("final point");
    let pops = last.state.populations();
    Ok(ExactRun {
        horizon,
        doublings,
        terminal,
        computational: [pops[0], pops[1]],
        truncation_change: change,
        trajectory: traj,
        warnings,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LzMode {
    Exact,
    Effective,
    Closed,
    All,
}

impl LzMode {
    fn wants(self, other: LzMode) -> bool {
        self == LzMode::All || self == other
    }
}

impl FromStr for LzMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(Self::Exact),
            "effective" => Ok(Self::Effective),
            "closed" => Ok(Self::Closed),
            "all" => Ok(Self::All),
            other => Err(Error::InvalidInput(format!(
                "unknown mode '{other}' (expected exact, effective, closed or all)"
            ))),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExactSummary {
    pub terminal_rho11: f64,
    /// Computational `<0|rho|0>` and `<1|rho|1>` at `+T`.
    pub computational: [f64; 2],
    /// Computational populations as `T -> inf`, where the excited state
    /// tends to `|0>`.
    pub computational_limit: [f64; 2],
    pub horizon: f64,
    pub doublings: u32,
    pub truncation_change: f64,
    pub steps: StepStats,
}

#[derive(Clone, Debug, Serialize)]
pub struct EffectiveSummary {
    pub terminal_rho11: f64,
    pub max_validity_ratio: f64,
    pub steps: StepStats,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Deviations {
    pub exact_vs_effective: Option<f64>,
    pub exact_vs_closed: Option<f64>,
    pub effective_vs_closed: Option<f64>,
    /// `|effective - closed| / closed`.
    pub effective_vs_closed_relative: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LzReport {
    pub params: LzParams,
    pub kind: LzScheduleKind,
    pub n: usize,
    pub measurement_times: Vec<f64>,
    pub options: LzOptions,
    pub exact: Option<ExactSummary>,
    pub effective: Option<EffectiveSummary>,
    pub closed_form: Option<f64>,
    pub deviations: Deviations,
    /// `N rho11(+inf)` per scheme, for the suppression scaling.
    pub n_times_exact: Option<f64>,
    pub n_times_effective: Option<f64>,
    pub n_times_closed: Option<f64>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub exact_run: Option<ExactRun>,
    #[serde(skip)]
    pub effective_run: Option<EffectiveRun>,
}

/// Runs the requested schemes for one schedule and compares their terminal
/// excited populations.
pub fn lz_experiment(
    p: &LzParams,
    kind: LzScheduleKind,
    n: usize,
    mode: LzMode,
    opts: &LzOptions,
) -> Result<LzReport> {
    let schedule = make_schedule(p, kind, n)?;
    let mut warnings = Vec::new();

    let exact_run = if mode.wants(LzMode::Exact) {
        let run = lz_exact(p, &schedule, opts).map_err(|e| e.context("exact run"))?;
        warnings.extend(run.warnings.iter().map(|w| format!("exact: {w}")));
        Some(run)
    } else {
        None
    };
    let effective_run = if mode.wants(LzMode::Effective) && kind != LzScheduleKind::None {
        let run = lz_effective_ode(p, &schedule, opts.tol).map_err(|e| e.context("effective run"))?;
        warnings.extend(run.warnings.iter().map(|w| format!("effective: {w}")));
        Some(run)
    } else {
        None
    };
    let closed_form = if mode.wants(LzMode::Closed) {
        Some(lz_closed_form(p, kind, n)?)
    } else {
        None
    };

    let exact_value = exact_run.as_ref().map(|r| r.terminal);
    let effective_value = effective_run.as_ref().map(|r| r.terminal);
    let diff = |a: Option<f64>, b: Option<f64>| a.zip(b).map(|(a, b)| (a - b).abs());
    let deviations = Deviations {
        exact_vs_effective: diff(exact_value, effective_value),
        exact_vs_closed: diff(exact_value, closed_form),
        effective_vs_closed: diff(effective_value, closed_form),
        effective_vs_closed_relative: diff(effective_value, closed_form)
            .zip(closed_form)
            .map(|(d, c)| d / c),
    };
    let scale = |v: Option<f64>| if kind == LzScheduleKind::None { None } else { v.map(|v| v * n as f64) };

    Ok(LzReport {
        params: *p,
        kind,
        n: schedule.n,
        measurement_times: schedule.times.clone(),
        options: *opts,
        exact: exact_run.as_ref().map(|r| ExactSummary {
            terminal_rho11: r.terminal,
            computational: r.computational,
            computational_limit: [r.terminal, 1.0 - r.terminal],
            horizon: r.horizon,
            doublings: r.doublings,
            truncation_change: r.truncation_change,
            steps: r.trajectory.meta.stats,
        }),
        effective: effective_run.as_ref().map(|r| EffectiveSummary {
            terminal_rho11: r.terminal,
            max_validity_ratio: r.max_validity_ratio,
            steps: r.stats,
        }),
        closed_form,
        deviations,
        n_times_exact: scale(exact_value),
        n_times_effective: scale(effective_value),
        n_times_closed: scale(closed_form),
        warnings,
        exact_run,
        effective_run,
    })
}
