//! Exact time-ordered propagation and the exact measured (intervened)
//! dynamics, used as the reference for every effective description.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::Serialize;

use crate::channel::DephasingChannel;
use crate::generator::GeneratorSpec;
use crate::operator::{
    eigenbasis, hermitian_part, matrix_exp, max_abs_diff, vectorize, devectorize, ComplexMatrix, DensityOperator,
    OrthonormalBasis, StateTolerances, SuperOperator,
};
use crate::stepper::{integrate, MidpointFlow, StepControl, StepStats};
use crate::{Error, Result};

pub const DEFAULT_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_MAX_STEPS: u64 = 10_000_000;
pub const DEFAULT_GAP_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct PropagateOptions {
    /// Local error tolerance per step (Richardson estimate, max-abs norm).
    pub tol: f64,
    pub max_steps: u64,
    /// Upper bound on the step length.
    pub max_dt: Option<f64>,
    /// Minimum eigenvalue gap when resolving instantaneous eigenbases.
    pub gap_tolerance: f64,
}

impl Default for PropagateOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOLERANCE,
            max_steps: DEFAULT_MAX_STEPS,
            max_dt: None,
            gap_tolerance: DEFAULT_GAP_TOLERANCE,
        }
    }
}

impl PropagateOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }

    fn control(&self, initial_dt: Option<f64>) -> StepControl {
        StepControl {
            tol: self.tol,
            max_steps: self.max_steps,
            initial_dt,
            max_dt: self.max_dt,
        }
    }

    fn state_tolerances(&self) -> StateTolerances {
        StateTolerances {
            hermitian: 1e-12,
            trace: (10.0 * self.tol).max(1e-12),
            psd: 1e-8,
        }
    }
}

/// `rho -> U rho U^dag` with `U = exp(-i H(t_mid) dt)`.
struct UnitaryFlow<'a> {
    generator: &'a GeneratorSpec,
    constant: Option<ComplexMatrix>,
}

impl MidpointFlow for UnitaryFlow<'_> {
    type State = ComplexMatrix;

    fn step(&self, rho: &ComplexMatrix, t_mid: f64, dt: f64) -> Result<ComplexMatrix> {
        let h = match &self.constant {
            Some(h) => h.clone(),
            None => match self.generator.hamiltonian_at(t_mid)? {
                Some(h) => h,
                None => return Ok(rho.clone()),
            },
        };
        let u = matrix_exp(&(h * Complex64::new(0.0, -dt)))?;
        Ok(&u * rho * u.adjoint())
    }

    fn distance(&self, a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
        max_abs_diff(a, b)
    }

    fn tidy(&self, rho: ComplexMatrix) -> ComplexMatrix {
        hermitian_part(&rho)
    }
}

/// `vec(rho) -> exp(L(t_mid) dt) vec(rho)`.
struct SuperoperatorFlow<'a> {
    generator: &'a GeneratorSpec,
    constant: Option<SuperOperator>,
}

impl MidpointFlow for SuperoperatorFlow<'_> {
    type State = ComplexMatrix;

    fn step(&self, rho: &ComplexMatrix, t_mid: f64, dt: f64) -> Result<ComplexMatrix> {
        let l = match &self.constant {
            Some(l) => l.clone(),
            None => self.generator.evaluate(t_mid)?,
        };
        let propagator = matrix_exp(&l.into_matrix().scale(dt))?;
        let v: DVector<Complex64> = propagator * vectorize(rho);
        Ok(devectorize(&v, rho.nrows()))
    }

    fn distance(&self, a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
        max_abs_diff(a, b)
    }

    fn tidy(&self, rho: ComplexMatrix) -> ComplexMatrix {
        hermitian_part(&rho)
    }
}

/// Time-ordered solution of `d rho / dt = L(t)[rho]` from `t0` to `t1`.
pub fn propagate(
    generator: &GeneratorSpec,
    rho: &DensityOperator,
    t0: f64,
    t1: f64,
    opts: &PropagateOptions,
) -> Result<DensityOperator> {
    let mut stats = StepStats::default();
    propagate_with_stats(generator, rho, t0, t1, opts, None, &mut stats)
}

/// [`propagate`] that reports integrator statistics and can warm-start the
/// step size.
pub fn propagate_with_stats(
    generator: &GeneratorSpec,
    rho: &DensityOperator,
    t0: f64,
    t1: f64,
    opts: &PropagateOptions,
    initial_dt: Option<f64>,
    stats: &mut StepStats,
) -> Result<DensityOperator> {
    if rho.dim() != generator.dim() {
        return Err(Error::DimensionMismatch {
            expected: generator.dim(),
            found: rho.dim(),
        });
    }
    if t1 < t0 {
        return Err(Error::InvalidInput(format!("propagation end {t1} precedes start {t0}")));
    }
    if t1 == t0 {
        return Ok(rho.clone());
    }
    let ctl = opts.control(initial_dt);
    let start = rho.matrix().clone();
    let out = if generator.is_unitary() {
        let constant = if generator.time_dependent() {
            None
        } else {
            generator.hamiltonian_at(t0)?
        };
        if !generator.has_hamiltonian() {
            return Ok(rho.clone());
        }
        let flow = UnitaryFlow { generator, constant };
        integrate(&flow, start, t0, t1, &ctl, stats)?
    } else {
        let constant = if generator.time_dependent() {
            None
        } else {
            Some(generator.evaluate(t0)?)
        };
        let flow = SuperoperatorFlow { generator, constant };
        integrate(&flow, start, t0, t1, &ctl, stats)?
    };
    DensityOperator::with_tolerances(out, opts.state_tolerances())
        .map_err(|e| e.context(format!("state after propagation to t = {t1}")))
}

/// Where the basis of a measurement comes from.
#[derive(Clone, Debug)]
pub enum BasisSource {
    Fixed(OrthonormalBasis),
    /// Eigenbasis of the generator's Hamiltonian at the measurement time,
    /// sorted by ascending energy.
    InstantaneousEigenbasis,
}

#[derive(Clone, Debug)]
pub struct MeasurementEvent {
    pub time: f64,
    pub basis: BasisSource,
}

/// Nonselective measurements at strictly increasing times.
#[derive(Clone, Debug, Default)]
pub struct MeasurementSchedule {
    events: Vec<MeasurementEvent>,
}

impl MeasurementSchedule {
    pub fn new(events: Vec<MeasurementEvent>) -> Result<Self> {
        for (k, w) in events.windows(2).enumerate() {
            if !(w[1].time > w[0].time) {
                return Err(Error::Validation(format!(
                    "measurement times must be strictly increasing: event {} at {} follows {}",
                    k + 1,
                    w[1].time,
                    w[0].time
                )));
            }
        }
        if let Some(e) = events.iter().find(|e| !e.time.is_finite()) {
            return Err(Error::Validation(format!("measurement time {} is not finite", e.time)));
        }
        Ok(Self { events })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn fixed(times: &[f64], basis: &OrthonormalBasis) -> Result<Self> {
        Self::new(
            times
                .iter()
                .map(|&time| MeasurementEvent {
                    time,
                    basis: BasisSource::Fixed(basis.clone()),
                })
                .collect(),
        )
    }

    pub fn instantaneous(times: &[f64]) -> Result<Self> {
        Self::new(
            times
                .iter()
                .map(|&time| MeasurementEvent {
                    time,
                    basis: BasisSource::InstantaneousEigenbasis,
                })
                .collect(),
        )
    }

    /// Measurements at `spacing, 2 spacing, ...` up to and including `horizon`
    /// (with a relative slack of 1e-9 on the last point).
    pub fn stroboscopic(spacing: f64, horizon: f64, basis: &OrthonormalBasis) -> Result<Self> {
        if !(spacing > 0.0) {
            return Err(Error::InvalidInput(format!("spacing must be positive, got {spacing}")));
        }
        let count = (horizon / spacing * (1.0 + 1e-9)).floor() as usize;
        let times: Vec<f64> = (1..=count).map(|k| k as f64 * spacing).collect();
        Self::fixed(&times, basis)
    }

    pub fn events(&self) -> &[MeasurementEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.events.iter().map(|e| e.time).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PointKind {
    /// State immediately after a measurement.
    Measurement,
    Grid,
    Final,
}

#[derive(Clone, Debug)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub kind: PointKind,
    pub state: DensityOperator,
    /// Basis of the measurement for `Measurement` points.
    pub basis: Option<OrthonormalBasis>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct TrajectoryMeta {
    pub scheme: String,
    pub stats: StepStats,
    pub measurements: usize,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn final_state(&self) -> &DensityOperator {
        &self.points.last().expect("trajectory has a final point").state
    }

    pub fn measurement_points(&self) -> impl Iterator<Item = &TrajectoryPoint> {
        self.points.iter().filter(|p| p.kind == PointKind::Measurement)
    }
}

fn resolve_basis(
    generator: &GeneratorSpec,
    source: &BasisSource,
    t: f64,
    opts: &PropagateOptions,
) -> Result<OrthonormalBasis> {
    match source {
        BasisSource::Fixed(b) => {
            if b.dim() != generator.dim() {
                return Err(Error::DimensionMismatch {
                    expected: generator.dim(),
                    found: b.dim(),
                });
            }
            Ok(b.clone())
        }
        BasisSource::InstantaneousEigenbasis => {
            let h = generator.hamiltonian_at(t)?.ok_or_else(|| {
                Error::InvalidInput("instantaneous eigenbasis requested for a generator without a Hamiltonian".into())
            })?;
            Ok(eigenbasis(&h, t, opts.gap_tolerance)?.0)
        }
    }
}

/// Exact measured dynamics: propagate between events and apply the dephasing
/// channel of each event at its time.
///
/// Records the state right after every measurement, at every `grid` time in
/// `[t_start, t_end]`, and at `t_end`.
pub fn intervened_evolution(
    generator: &GeneratorSpec,
    schedule: &MeasurementSchedule,
    rho0: &DensityOperator,
    t_start: f64,
    t_end: f64,
    opts: &PropagateOptions,
    grid: &[f64],
) -> Result<Trajectory> {
    if t_end < t_start {
        return Err(Error::InvalidInput(format!("t_end {t_end} precedes t_start {t_start}")));
    }
    if let Some(e) = schedule
        .events()
        .iter()
        .find(|e| e.time < t_start || e.time > t_end)
    {
        return Err(Error::Validation(format!(
            "measurement at t = {} lies outside [{t_start}, {t_end}]",
            e.time
        )));
    }

    let mut meta = TrajectoryMeta {
        scheme: "exact".to_string(),
        measurements: schedule.len(),
        ..Default::default()
    };
    // the measurement preceding the run is modelled by the first event's
    // basis source resolved at t_start
    if let Some(first) = schedule.events().first() {
        let basis = resolve_basis(generator, &first.basis, t_start, opts)?;
        let dephased = DephasingChannel::new(basis).apply(rho0.matrix())?;
        let change = max_abs_diff(&dephased, rho0.matrix());
        if change > 1e-10 {
            meta.warnings.push(format!(
                "initial state is not a fixed point of the first measurement (change {change:.3e})"
            ));
        }
    }

    let mut grid: Vec<f64> = grid.iter().copied().filter(|&t| t >= t_start && t <= t_end).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let mut points = Vec::new();
    let mut state = rho0.clone();
    let mut t = t_start;
    let mut last_dt = None;
    let mut events = schedule.events().iter().peekable();
    let mut grid_iter = grid.iter().copied().peekable();

    loop {
        let next_event = events.peek().map(|e| e.time);
        let next_grid = grid_iter.peek().copied();
        let target = match (next_event, next_grid) {
            (None, None) => break,
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (Some(a), Some(b)) => a.min(b),
        };
        let mut stats = StepStats::default();
        state = propagate_with_stats(generator, &state, t, target, opts, last_dt, &mut stats)?;
        if stats.last_dt > 0.0 {
            last_dt = Some(stats.last_dt);
        }
        meta.stats.merge(&stats);
        t = target;
        if next_event == Some(target) {
            let event = events.next().expect("peeked");
            let basis = resolve_basis(generator, &event.basis, target, opts)?;
            let channel = DephasingChannel::new(basis.clone());
            let dephased = channel.apply(state.matrix())?;
            state = DensityOperator::with_tolerances(dephased, opts.state_tolerances())?;
            points.push(TrajectoryPoint {
                t: target,
                kind: PointKind::Measurement,
                state: state.clone(),
                basis: Some(basis),
            });
        }
        if next_grid == Some(target) {
            grid_iter.next();
            points.push(TrajectoryPoint {
                t: target,
                kind: PointKind::Grid,
                state: state.clone(),
                basis: None,
            });
        }
    }

    let mut stats = StepStats::default();
    state = propagate_with_stats(generator, &state, t, t_end, opts, last_dt, &mut stats)?;
    meta.stats.merge(&stats);
    points.push(TrajectoryPoint {
        t: t_end,
        kind: PointKind::Final,
        state,
        basis: None,
    });
    Ok(Trajectory { points, meta })
}

#[derive(Clone, Debug, Serialize)]
pub struct ZenoRow {
    pub tau: f64,
    pub measurements: usize,
    /// Largest change of any population, in the measurement basis, over all
    /// measurement times.
    pub max_deviation: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ZenoProbe {
    pub rows: Vec<ZenoRow>,
    /// Deviations are nonincreasing as `tau` shrinks, within a 5% margin.
    pub monotone: bool,
}

/// Runs measured dynamics with stroboscopic spacing `tau` over `[0, horizon]`
/// for every `tau` in `taus` and reports how far the populations drift from
/// their initial values.
pub fn zeno_freeze_probe(
    generator: &GeneratorSpec,
    basis: &OrthonormalBasis,
    taus: &[f64],
    horizon: f64,
    rho0: &DensityOperator,
    opts: &PropagateOptions,
) -> Result<ZenoProbe> {
    if taus.is_empty() || taus.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::InvalidInput("tau list must be non-empty and positive".into()));
    }
    if taus.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput("tau list must be strictly decreasing".into()));
    }
    let initial = rho0.populations_in(basis);
    let mut rows = Vec::with_capacity(taus.len());
    for &tau in taus {
        let schedule = MeasurementSchedule::stroboscopic(tau, horizon, basis)?;
        let traj = intervened_evolution(generator, &schedule, rho0, 0.0, horizon, opts, &[])?;
        let max_deviation = traj
            .measurement_points()
            .flat_map(|p| {
                p.state
                    .populations_in(basis)
                    .into_iter()
                    .zip(initial.iter())
                    .map(|(p, q)| (p - q).abs())
                    .collect::<Vec<_>>()
            })
            .fold(0.0, f64::max);
        rows.push(ZenoRow {
            tau,
            measurements: schedule.len(),
            max_deviation,
        });
    }
    let monotone = rows
        .windows(2)
        .all(|w| w[1].max_deviation <= 1.05 * w[0].max_deviation + 1e-15);
    Ok(ZenoProbe { rows, monotone })
}
